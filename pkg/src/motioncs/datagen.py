"""Synthetic experiment inputs.

A phantom of smooth-edged ellipses on periodic trajectories provides a
dynamic sequence with an analytically known displacement field, so the
motion-compensated machinery can be validated against ground truth instead
of by eye.  Coil maps, variable-density sampling masks, and noisy
acquisition close the loop from image to undersampled k-space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metrics import Roi
from .operators import MeasurementOperator, SamplingMask, _transition_frames


@dataclass(frozen=True)
class Ellipse:
    """One ellipse with a per-frame center trajectory.

    ``centers`` is ``(n_t, 2)`` as ``(cy, cx)``.  ``scales`` optionally
    multiplies both semi-axes per frame (a pulsation).  ``falloff`` dims the
    interior quadratically toward the rim so the inside carries gradient
    information, not just the edge.
    """

    centers: np.ndarray
    semi_axes: tuple[float, float]
    intensity: float
    scales: np.ndarray | None = None
    falloff: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "centers", np.atleast_2d(np.asarray(self.centers, dtype=float)))
        if self.centers.shape[1] != 2:
            raise ValueError("centers must be (n_t, 2)")
        if self.scales is not None:
            object.__setattr__(self, "scales", np.asarray(self.scales, dtype=float))
        if min(self.semi_axes) <= 0:
            raise ValueError("semi-axes must be positive")
        if not 0 <= self.intensity <= 1:
            raise ValueError("intensity must be in [0, 1]")

    def scale_at(self, t: int) -> float:
        return 1.0 if self.scales is None else float(self.scales[t])

    @property
    def moving(self) -> bool:
        if not np.allclose(self.centers, self.centers[0]):
            return True
        return self.scales is not None and not np.allclose(self.scales, self.scales[0])


@dataclass(frozen=True)
class PhantomSpec:
    n_x: int
    n_y: int
    n_t: int
    objects: tuple[Ellipse, ...]
    roi: Roi
    background: float = 0.0
    edge_width: float = 1.0
    n_coils: int = 4
    periodic: bool = True

    def __post_init__(self):
        for name in ("n_x", "n_y", "n_t"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_coils < 1:
            raise ValueError("n_coils must be positive")


def scaled_profile(n_x: int, n_y: int, n_t: int, n_coils: int) -> PhantomSpec:
    """Beating-heart phantom scaled to the requested grid.

    A large static body holds a bright chamber that dwells for most of the
    cycle and makes one smooth excursion (a contraction burst) peaking
    mid-cycle at 2+ px per frame, with a co-moving inner structure so the
    chamber interior carries edges, not just its rim.  That dwell/burst time
    profile is what makes the temporal priors behave like they do on cine
    data: frame differences stay sparse through the dwell while the burst
    spreads energy across the whole temporal spectrum.
    """
    t = np.arange(n_t, dtype=float)
    wrapped = np.minimum(np.abs(t - n_t / 2.0), n_t - np.abs(t - n_t / 2.0))
    width = max(0.7, 0.1 * n_t)
    bump = np.exp(-0.5 * (wrapped / width) ** 2)
    # Burst amplitude targets a ~2.2 px/frame peak step.
    amp = 2.2 / float(np.max(np.abs(np.diff(np.append(bump, bump[0])))))
    direction = np.array([0.45, 1.0])
    direction /= np.linalg.norm(direction)
    base = np.array([0.515 * n_y, 0.485 * n_x])
    centers = base[None, :] + amp * bump[:, None] * direction[None, :]

    mover_axes = (0.141 * n_y, 0.156 * n_x)
    objects = (
        Ellipse(
            centers=np.tile([n_y / 2.0, n_x / 2.0], (n_t, 1)),
            semi_axes=(0.406 * n_y, 0.344 * n_x),
            intensity=0.3,
        ),
        Ellipse(centers=centers, semi_axes=mover_axes, intensity=0.45, falloff=0.25),
        Ellipse(
            centers=centers,
            semi_axes=(0.42 * mover_axes[0], 0.42 * mover_axes[1]),
            intensity=0.25,
        ),
    )

    pad = 3.0 + 4.0 + 1.0  # roi margin + motion-support dilation
    extent_y = amp * direction[0] / 2.0 + mover_axes[0] + pad
    extent_x = amp * direction[1] / 2.0 + mover_axes[1] + pad
    mid = base + amp * direction / 2.0
    roi = Roi(
        x0=max(int(mid[1] - extent_x), 0),
        y0=max(int(mid[0] - extent_y), 0),
        x1=min(int(mid[1] + extent_x) + 1, n_x),
        y1=min(int(mid[0] + extent_y) + 1, n_y),
    )
    return PhantomSpec(
        n_x=n_x, n_y=n_y, n_t=n_t, objects=objects, roi=roi, n_coils=n_coils
    )


def ci_profile() -> PhantomSpec:
    """Small profile for fast test runs: 64x64, 8 frames, 8 coils."""
    return scaled_profile(64, 64, 8, 8)


def full_profile() -> PhantomSpec:
    """Desk-scale benchmark profile: 256x256, 24 frames, 9 coils."""
    return scaled_profile(256, 256, 24, 9)


def _rho2(spec: PhantomSpec, obj: Ellipse, t: int, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
    g = obj.scale_at(t)
    cy, cx = obj.centers[t] if obj.centers.shape[0] > 1 else obj.centers[0]
    ry, rx = obj.semi_axes[0] * g, obj.semi_axes[1] * g
    return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2


def _raster(spec: PhantomSpec, obj: Ellipse, t: int, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
    rho2 = _rho2(spec, obj, t, yy, xx)
    rho = np.sqrt(rho2)
    g = obj.scale_at(t)
    min_axis = min(obj.semi_axes) * g
    sd = (rho - 1.0) * min_axis
    edge = 1.0 / (1.0 + np.exp(np.clip(sd / spec.edge_width, -60.0, 60.0)))
    shade = 1.0 - obj.falloff * np.minimum(rho2, 1.0)
    return obj.intensity * edge * shade


def _check_bounds(spec: PhantomSpec) -> None:
    for k, obj in enumerate(spec.objects):
        n_frames = obj.centers.shape[0]
        for t in range(spec.n_t):
            cy, cx = obj.centers[t] if n_frames > 1 else obj.centers[0]
            g = obj.scale_at(t) if obj.scales is not None else 1.0
            ry, rx = obj.semi_axes[0] * g, obj.semi_axes[1] * g
            if cy - ry < 0 or cy + ry > spec.n_y - 1 or cx - rx < 0 or cx + rx > spec.n_x - 1:
                raise ValueError(f"object {k} leaves the image bounds at frame {t}")


def generate_phantom(spec: PhantomSpec) -> tuple[np.ndarray, np.ndarray, Roi]:
    """Rasterize the phantom and its analytic backward displacement field.

    Returns ``(x_true, v_true, roi)``: the complex sequence with peak
    magnitude exactly 1, and the per-transition field satisfying the
    intensity-constancy relation up to rasterization error.
    """
    _check_bounds(spec)
    n_t, n_y, n_x = spec.n_t, spec.n_y, spec.n_x
    yy, xx = np.meshgrid(np.arange(n_y, dtype=float), np.arange(n_x, dtype=float), indexing="ij")

    frames = np.full((n_t, n_y, n_x), spec.background, dtype=float)
    for obj in spec.objects:
        for t in range(n_t):
            frames[t] += _raster(spec, obj, t, yy, xx)
    peak = frames.max()
    if peak <= 0:
        raise ValueError("phantom is identically zero")
    frames /= peak

    pairs = _transition_frames(n_t, spec.periodic)
    v_true = np.zeros((len(pairs), n_y, n_x, 2))
    margin = 4.0 * spec.edge_width + 1.0
    for j, (tgt, src) in enumerate(pairs):
        for obj in spec.objects:
            if not obj.moving:
                continue
            g_t, g_s = obj.scale_at(tgt), obj.scale_at(src)
            c_t = obj.centers[tgt] if obj.centers.shape[0] > 1 else obj.centers[0]
            c_s = obj.centers[src] if obj.centers.shape[0] > 1 else obj.centers[0]
            ratio = g_s / g_t
            vy = c_s[0] + ratio * (yy - c_t[0]) - yy
            vx = c_s[1] + ratio * (xx - c_t[1]) - xx
            min_axis = min(obj.semi_axes)
            sd_t = (np.sqrt(_rho2(spec, obj, tgt, yy, xx)) - 1.0) * min_axis * g_t
            sd_s = (np.sqrt(_rho2(spec, obj, src, yy, xx)) - 1.0) * min_axis * g_s
            inside = np.minimum(sd_t, sd_s) <= margin
            v_true[j, inside, 0] = vy[inside]
            v_true[j, inside, 1] = vx[inside]

    return frames.astype(np.complex128), v_true, spec.roi


def moving_support(spec: PhantomSpec) -> np.ndarray:
    """Boolean ``(n_transitions, n_y, n_x)`` mask of pixels strictly inside a
    moving object in each transition's target frame."""
    yy, xx = np.meshgrid(
        np.arange(spec.n_y, dtype=float), np.arange(spec.n_x, dtype=float), indexing="ij"
    )
    pairs = _transition_frames(spec.n_t, spec.periodic)
    out = np.zeros((len(pairs), spec.n_y, spec.n_x), dtype=bool)
    for j, (tgt, _) in enumerate(pairs):
        for obj in spec.objects:
            if obj.moving:
                out[j] |= _rho2(spec, obj, tgt, yy, xx) <= 1.0
    return out


def generate_coils(n_y: int, n_x: int, n_c: int) -> np.ndarray:
    """Smooth complex coil maps with unit root-sum-of-squares everywhere.

    Localized Gaussian magnitude lobes sit on a ring around the image and
    each coil carries a distinct linear phase ramp, so the array genuinely
    encodes space (the ramps act as small k-space shifts).  Ramp slope and
    lobe width keep the per-pixel map gradient below 0.1.  A single coil
    normalizes to exactly 1.
    """
    if n_c < 1:
        raise ValueError("n_c must be >= 1")
    if n_c == 1:
        return np.ones((1, n_y, n_x), dtype=np.complex128)
    yy, xx = np.meshgrid(np.arange(n_y, dtype=float), np.arange(n_x, dtype=float), indexing="ij")
    cy, cx = (n_y - 1) / 2.0, (n_x - 1) / 2.0
    ring = 0.52 * max(n_y, n_x)
    width = 0.22 * max(n_y, n_x)

    maps = np.empty((n_c, n_y, n_x), dtype=np.complex128)
    for c in range(n_c):
        theta = 2.0 * math.pi * c / n_c
        gy, gx = cy + ring * math.sin(theta), cx + ring * math.cos(theta)
        mag = np.exp(-((yy - gy) ** 2 + (xx - gx) ** 2) / (2.0 * width**2))
        if n_c == 1:
            phase = 0.0
        else:
            phase = 0.08 * (math.cos(theta) * (yy - cy) + math.sin(theta) * (xx - cx))
        maps[c] = mag * np.exp(1j * phase)

    rss = np.sqrt((np.abs(maps) ** 2).sum(axis=0))
    return maps / rss


@dataclass(frozen=True)
class MaskSpec:
    """Variable-density line sampling: Gaussian across rows, uniform in time."""

    rate: float
    sigma_fraction: float = 0.45
    seed: int = 0
    always_sample_dc: bool = True

    def __post_init__(self):
        if self.rate < 1:
            raise ValueError("rate must be >= 1")
        if self.sigma_fraction <= 0:
            raise ValueError("sigma_fraction must be positive")


def generate_mask(spec: MaskSpec, n_y: int, n_t: int) -> SamplingMask:
    """Draw ``round(n_y / rate)`` distinct lines per frame.

    Line probabilities follow a Gaussian centered on the DC row; the DC row
    itself is forced when ``always_sample_dc``.  Fully reproducible from the
    spec's seed, with patterns varying frame to frame.
    """
    n_lines = int(round(n_y / spec.rate))
    if n_lines < 1:
        raise ValueError(f"rate {spec.rate} leaves no lines for n_y={n_y}")
    rng = np.random.default_rng(spec.seed)
    rows = np.arange(n_y)
    dc = n_y // 2
    sigma = spec.sigma_fraction * n_y
    weights = np.exp(-((rows - dc) ** 2) / (2.0 * sigma**2))

    lines = []
    for _ in range(n_t):
        if spec.always_sample_dc:
            pool = rows[rows != dc]
            w = weights[rows != dc]
            picked = rng.choice(pool, size=n_lines - 1, replace=False, p=w / w.sum())
            frame_rows = np.sort(np.append(picked, dc))
        else:
            frame_rows = np.sort(
                rng.choice(rows, size=n_lines, replace=False, p=weights / weights.sum())
            )
        lines.append(frame_rows.astype(np.intp))
    return SamplingMask(lines=tuple(lines), n_y=n_y, rate=spec.rate)


def simulate_acquisition(
    x_true: np.ndarray,
    coils: np.ndarray,
    mask: SamplingMask,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> np.ndarray:
    """Masked multi-coil k-space of the phantom, plus complex Gaussian noise
    of per-sample standard deviation ``noise_sigma`` on the sampled lines."""
    h = MeasurementOperator(mask, coils, x_true.shape)
    y = h.apply(x_true)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        scale = noise_sigma / math.sqrt(2.0)
        noise = scale * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
        y = y + noise * mask.as_bool_array()[:, None, :, None]
    return y


def noise_epsilon(mask: SamplingMask, n_x: int, n_c: int, noise_sigma: float) -> float:
    """Expected squared noise norm: (number of complex samples) * sigma^2."""
    return mask.n_sampled * n_x * n_c * noise_sigma**2


def suggest_epsilon(y: np.ndarray, mask: SamplingMask, noise_sigma: float) -> float:
    """Data-consistency bound: the expected noise energy, or a tiny fraction
    of the measurement energy for noiseless data."""
    if noise_sigma > 0:
        n_c, n_x = y.shape[1], y.shape[3]
        return noise_epsilon(mask, n_x, n_c, noise_sigma)
    return 1e-10 * float(np.vdot(y, y).real)
