"""Dense motion estimation between frames.

A demons-style deformable registration drives a per-pixel displacement field
by intensity-difference forces and keeps it smooth with Gaussian filtering of
the field (the usual stand-in for a squared-gradient penalty on the field).
Forces are computed on magnitude images; the resulting real field is applied
to complex data.

The sampling convention is backward warping: ``warp(source, v)[y, x]``
interpolates ``source`` at ``(y + dy, x + dx)``, matching the sparse warp
matrices in :mod:`motioncs.operators` bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import check_finite, fft2_centered
from .operators import bilinear_terms, _transition_frames


@dataclass(frozen=True)
class RegistrationConfig:
    """Knobs of the per-pair demons iteration.

    ``smoothing_sigma`` (pixels) regularizes the field: larger values favor
    smoother displacement fields at the cost of fine local motion.
    """

    step_scale: float = 1.0
    smoothing_sigma: float = 1.5
    max_iters: int = 100
    force_epsilon: float = 1e-6

    def __post_init__(self):
        if self.step_scale <= 0:
            raise ValueError("step_scale must be positive")
        if self.smoothing_sigma <= 0:
            raise ValueError("smoothing_sigma must be positive")
        if self.max_iters <= 0:
            raise ValueError("max_iters must be positive")
        if self.force_epsilon <= 0:
            raise ValueError("force_epsilon must be positive")


def warp(frame: np.ndarray, field: np.ndarray) -> np.ndarray:
    """Backward-warp one frame by a displacement field.

    Numerically identical to applying the sparse matrix from
    :func:`motioncs.operators.build_motion_matrix`: same clamped coordinates,
    same weights, same summation order.
    """
    frame = np.asarray(frame)
    n_y, n_x = frame.shape
    _, cols, w, _, _ = bilinear_terms(np.asarray(field, dtype=float), n_y, n_x)
    flat = frame.ravel()
    out = w[0] * flat[cols[0]] + w[1] * flat[cols[1]] + w[2] * flat[cols[2]] + w[3] * flat[cols[3]]
    return out.reshape(n_y, n_x)


def gradient_energy(field: np.ndarray) -> float:
    """Sum of squared spatial gradients of every displacement component."""
    field = np.asarray(field, dtype=float)
    total = 0.0
    comps = field.reshape(-1, field.shape[-3], field.shape[-2], field.shape[-1])
    for comp in comps:
        for c in range(comp.shape[-1]):
            gy, gx = np.gradient(comp[:, :, c])
            total += float((gy * gy).sum() + (gx * gx).sum())
    return total


def smooth_field(field: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian-smooth each displacement component of one transition field."""
    out = np.empty_like(field)
    out[:, :, 0] = gaussian_filter(field[:, :, 0], sigma, mode="nearest")
    out[:, :, 1] = gaussian_filter(field[:, :, 1], sigma, mode="nearest")
    return out


def register_pair(
    target: np.ndarray,
    source: np.ndarray,
    v_init: np.ndarray | None = None,
    cfg: RegistrationConfig = RegistrationConfig(),
) -> np.ndarray:
    """Estimate the displacement field aligning ``warp(source, v)`` to
    ``target``.

    Each iteration evaluates the demons force

        dv = -e * grad(w) / (|grad(w)|^2 + e^2 + force_epsilon)

    with ``w = warp(source, v)`` and ``e = w - target``, then Gaussian-smooths
    ``v + step_scale * dv``.  A step that fails to decrease the squared warp
    residual is rejected and the iteration stops, so the residual sequence is
    non-increasing.
    """
    target = np.asarray(target)
    source = np.asarray(source)
    if target.shape != source.shape:
        raise ValueError(f"shape mismatch: {target.shape} vs {source.shape}")
    check_finite(target, "target frame")
    check_finite(source, "source frame")
    n_y, n_x = target.shape

    tm = np.abs(target).astype(float)
    sm = np.abs(source).astype(float)
    if v_init is None:
        v = np.zeros((n_y, n_x, 2))
    else:
        v = np.array(v_init, dtype=float)
        if v.shape != (n_y, n_x, 2):
            raise ValueError(f"expected v_init shape {(n_y, n_x, 2)}, got {v.shape}")

    w = warp(sm, v)
    res = float(((w - tm) ** 2).sum())
    for _ in range(cfg.max_iters):
        if res == 0.0:
            break
        e = w - tm
        gy, gx = np.gradient(w)
        denom = gy * gy + gx * gx + e * e + cfg.force_epsilon
        force = -e / denom
        dv = np.stack([force * gy, force * gx], axis=-1)
        v_new = smooth_field(v + cfg.step_scale * dv, cfg.smoothing_sigma)
        w_new = warp(sm, v_new)
        res_new = float(((w_new - tm) ** 2).sum())
        if res_new > res:
            break
        v, w, res = v_new, w_new, res_new
    return v


def register_sequence(
    x: np.ndarray,
    v_init: np.ndarray | None = None,
    cfg: RegistrationConfig = RegistrationConfig(),
    periodic: bool = True,
) -> np.ndarray:
    """Register every consecutive transition of a sequence independently.

    Transition ``j`` aligns frame ``j+1`` (target) to frame ``j`` (source);
    with ``periodic=True`` the final transition aligns frame 0 to the last
    frame, mirroring :class:`motioncs.operators.MotionCompensatedDifference`.
    """
    x = np.asarray(x)
    n_t, n_y, n_x = x.shape
    if n_t < 2:
        raise ValueError(f"need at least 2 frames, got n_t={n_t}")
    pairs = _transition_frames(n_t, periodic)
    out = np.zeros((len(pairs), n_y, n_x, 2))
    for j, (tgt, src) in enumerate(pairs):
        init = None if v_init is None else v_init[j]
        out[j] = register_pair(x[tgt], x[src], init, cfg)
    return out


def estimate_global_translation(target: np.ndarray, source: np.ndarray) -> tuple[float, float]:
    """Whole-frame shift ``(dy, dx)`` such that ``target ~= roll(source, (dy, dx))``.

    Integer resolution comes from the Fourier phase-correlation peak; a
    quadratic fit around the peak refines it to subpixel resolution.
    """
    target = np.asarray(target)
    source = np.asarray(source)
    if target.shape != source.shape:
        raise ValueError(f"shape mismatch: {target.shape} vs {source.shape}")
    tm = np.abs(target).astype(float)
    sm = np.abs(source).astype(float)
    if not tm.any() or not sm.any():
        raise ValueError("cannot register all-zero frames")

    cross = fft2_centered(tm) * np.conj(fft2_centered(sm))
    mag = np.abs(cross)
    cross = np.where(mag > 0, cross / np.where(mag > 0, mag, 1.0), 0)
    corr = np.fft.ifft2(np.fft.ifftshift(cross)).real

    n_y, n_x = corr.shape
    py, px = np.unravel_index(np.argmax(corr), corr.shape)

    def refine(vals: np.ndarray, p: int, n: int) -> float:
        prev, mid, nxt = vals[(p - 1) % n], vals[p], vals[(p + 1) % n]
        denom = prev - 2.0 * mid + nxt
        if denom >= 0:
            return 0.0
        return float(0.5 * (prev - nxt) / denom)

    dy = py + refine(corr[:, px], py, n_y)
    dx = px + refine(corr[py, :], px, n_x)
    if dy > n_y / 2:
        dy -= n_y
    if dx > n_x / 2:
        dx -= n_x
    return float(dy), float(dx)
