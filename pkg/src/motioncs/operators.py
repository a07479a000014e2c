"""Concrete linear operators for dynamic-sequence reconstruction.

* :class:`MeasurementOperator` -- per-frame coil-weighted, line-masked
  centered Fourier sampling (the acquisition model).
* :class:`TemporalDifference` -- frame-to-frame differences, optionally with
  the wrap transition last-frame -> first-frame.
* :class:`TemporalDFT` -- orthonormal DFT along the frame axis.
* :class:`MotionCompensatedDifference` -- differences along motion
  trajectories, built from per-transition sparse bilinear-warp matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as _fft
import scipy.sparse as sp

from .core import LinearOperator, check_finite, fft2_centered, ifft2_centered


# ---------------------------------------------------------------------------
# Bilinear sampling machinery (shared with motion.warp so that the dense and
# the sparse-matrix code paths produce identical floating-point results).
# ---------------------------------------------------------------------------

def bilinear_terms(
    field: np.ndarray, n_y: int, n_x: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Neighbor indices and weights for backward bilinear sampling.

    ``field`` is ``(n_y, n_x, 2)`` with ``(dy, dx)`` displacements: the pixel
    at ``(y, x)`` samples the source image at ``(y + dy, x + dx)``.  Source
    coordinates are clamped to the image bounds, so every output row keeps a
    weight sum of exactly 1.

    Returns ``(rows, cols, weights, y0, x0)`` where ``cols`` and ``weights``
    are ``(4, n_y*n_x)`` arrays ordered top-left, top-right, bottom-left,
    bottom-right (strictly increasing flat column index per row).
    """
    if field.shape != (n_y, n_x, 2):
        raise ValueError(f"expected field shape {(n_y, n_x, 2)}, got {field.shape}")
    if not np.isfinite(field).all():
        raise ValueError("motion field contains non-finite values")

    yy, xx = np.meshgrid(np.arange(n_y, dtype=float), np.arange(n_x, dtype=float), indexing="ij")
    ys = np.clip(yy + field[:, :, 0], 0.0, n_y - 1.0).ravel()
    xs = np.clip(xx + field[:, :, 1], 0.0, n_x - 1.0).ravel()

    # Keep the +1 neighbor in bounds: the fractional part may then reach 1.0
    # exactly at the far edge, which is still a valid convex weight.
    y0 = np.minimum(np.floor(ys), max(n_y - 2, 0)).astype(np.intp)
    x0 = np.minimum(np.floor(xs), max(n_x - 2, 0)).astype(np.intp)
    a = ys - y0
    b = xs - x0
    y1 = np.minimum(y0 + 1, n_y - 1)
    x1 = np.minimum(x0 + 1, n_x - 1)

    cols = np.stack(
        [y0 * n_x + x0, y0 * n_x + x1, y1 * n_x + x0, y1 * n_x + x1]
    )
    weights = np.stack([(1 - a) * (1 - b), (1 - a) * b, a * (1 - b), a * b])
    rows = np.arange(n_y * n_x, dtype=np.intp)
    return rows, cols, weights, y0, x0


def build_motion_matrix(field: np.ndarray, n_y: int, n_x: int) -> sp.csr_matrix:
    """Sparse warp matrix for one frame transition.

    Row ``s`` holds the bilinear weights of the up-to-4 source pixels around
    ``s + v(s)``; integer displacements collapse to a single unit entry.
    """
    rows, cols, weights, _, _ = bilinear_terms(field, n_y, n_x)
    n = n_y * n_x
    mat = sp.csr_matrix(
        (weights.ravel(), (np.tile(rows, 4), cols.ravel())), shape=(n, n)
    )
    mat.eliminate_zeros()
    return mat


def _transition_frames(n_t: int, periodic: bool) -> list[tuple[int, int]]:
    """(target, source) frame pairs; the wrap pair (0, n_t-1) comes last."""
    pairs = [(i + 1, i) for i in range(n_t - 1)]
    if periodic:
        pairs.append((0, n_t - 1))
    return pairs


def n_transitions(n_t: int, periodic: bool) -> int:
    return n_t if periodic else n_t - 1


# ---------------------------------------------------------------------------
# Temporal operators
# ---------------------------------------------------------------------------

class TemporalDifference(LinearOperator):
    """Frame-difference operator: output transition i is ``x_{i+1} - x_i``.

    With ``periodic=True`` an extra final transition ``x_0 - x_{n_t-1}``
    closes the loop (cine sequences repeat).
    """

    def __init__(self, shape: tuple[int, int, int], periodic: bool = True):
        n_t, n_y, n_x = shape
        if n_t < 2:
            raise ValueError(f"need at least 2 frames, got n_t={n_t}")
        self.periodic = periodic
        self.domain_shape = (n_t, n_y, n_x)
        self.range_shape = (n_transitions(n_t, periodic), n_y, n_x)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = self._check_domain(x)
        out = np.empty(self.range_shape, dtype=x.dtype)
        out[: x.shape[0] - 1] = x[1:] - x[:-1]
        if self.periodic:
            out[-1] = x[0] - x[-1]
        return out

    def adjoint(self, r: np.ndarray) -> np.ndarray:
        r = self._check_range(r)
        n_t = self.domain_shape[0]
        out = np.zeros(self.domain_shape, dtype=np.promote_types(r.dtype, np.complex128))
        out[1:] += r[: n_t - 1]
        out[: n_t - 1] -= r[: n_t - 1]
        if self.periodic:
            out[0] += r[-1]
            out[-1] -= r[-1]
        return out


class TemporalDFT(LinearOperator):
    """Orthonormal DFT along the frame axis; unitary, so adjoint = inverse."""

    def __init__(self, shape: tuple[int, int, int]):
        self.domain_shape = tuple(shape)
        self.range_shape = tuple(shape)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = self._check_domain(x)
        return np.fft.fft(x, axis=0, norm="ortho")

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        y = self._check_range(y)
        return np.fft.ifft(y, axis=0, norm="ortho")


# ---------------------------------------------------------------------------
# Motion-compensated difference
# ---------------------------------------------------------------------------

class MotionCompensatedDifference(LinearOperator):
    """Difference along motion trajectories: transition i is
    ``x_{i+1} - K_i x_i`` with ``K_i`` the sparse bilinear warp for the
    displacement field of that transition.

    A zero motion field makes every ``K_i`` the identity and the operator
    coincides with :class:`TemporalDifference` exactly.
    """

    def __init__(
        self,
        field: np.ndarray,
        shape: tuple[int, int, int],
        periodic: bool = True,
    ):
        n_t, n_y, n_x = shape
        if n_t < 2:
            raise ValueError(f"need at least 2 frames, got n_t={n_t}")
        n_tr = n_transitions(n_t, periodic)
        field = np.asarray(field, dtype=float)
        if field.shape != (n_tr, n_y, n_x, 2):
            raise ValueError(
                f"expected motion field shape {(n_tr, n_y, n_x, 2)}, got {field.shape}"
            )
        check_finite(field, "motion field")
        self.periodic = periodic
        self.domain_shape = (n_t, n_y, n_x)
        self.range_shape = (n_tr, n_y, n_x)
        self.field = field
        self.transitions = _transition_frames(n_t, periodic)
        self.matrices = [build_motion_matrix(field[j], n_y, n_x) for j in range(n_tr)]

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = self._check_domain(x)
        _, n_y, n_x = self.domain_shape
        out = np.empty(self.range_shape, dtype=np.promote_types(x.dtype, np.complex128))
        for j, (tgt, src) in enumerate(self.transitions):
            warped = self.matrices[j].dot(x[src].ravel()).reshape(n_y, n_x)
            out[j] = x[tgt] - warped
        return out

    def adjoint(self, r: np.ndarray) -> np.ndarray:
        r = self._check_range(r)
        _, n_y, n_x = self.domain_shape
        out = np.zeros(self.domain_shape, dtype=np.promote_types(r.dtype, np.complex128))
        for j, (tgt, src) in enumerate(self.transitions):
            out[tgt] += r[j]
            # Weights are real, so the conjugate transpose is the plain
            # transpose, applied as a CSC traversal without materializing it.
            out[src] -= self.matrices[j].T.dot(r[j].ravel()).reshape(n_y, n_x)
        return out


# ---------------------------------------------------------------------------
# Sampling mask and measurement operator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplingMask:
    """Per-frame sets of sampled row indices (phase-encode lines).

    ``lines[t]`` is a sorted array of distinct row indices sampled in frame
    ``t``; ``rate`` is the nominal undersampling factor R.
    """

    lines: tuple[np.ndarray, ...]
    n_y: int
    rate: float = 1.0

    def __post_init__(self):
        cleaned = []
        for t, rows in enumerate(self.lines):
            rows = np.unique(np.asarray(rows, dtype=np.intp))
            if rows.size == 0:
                raise ValueError(f"frame {t} samples no lines")
            if rows[0] < 0 or rows[-1] >= self.n_y:
                raise ValueError(f"frame {t} has line indices outside [0, {self.n_y})")
            cleaned.append(rows)
        object.__setattr__(self, "lines", tuple(cleaned))

    @property
    def n_t(self) -> int:
        return len(self.lines)

    @property
    def n_sampled(self) -> int:
        """Total sampled lines over all frames."""
        return int(sum(rows.size for rows in self.lines))

    def as_bool_array(self) -> np.ndarray:
        """(n_t, n_y) boolean array, True on sampled lines."""
        out = np.zeros((self.n_t, self.n_y), dtype=bool)
        for t, rows in enumerate(self.lines):
            out[t, rows] = True
        return out


def full_mask(n_t: int, n_y: int) -> SamplingMask:
    rows = np.arange(n_y)
    return SamplingMask(lines=tuple(rows.copy() for _ in range(n_t)), n_y=n_y, rate=1.0)


class MeasurementOperator(LinearOperator):
    """Acquisition model: coil-weight each frame, take the centered FFT, and
    zero the unsampled k-space lines.

    Forward output is a full-grid ``(n_t, n_c, n_y, n_x)`` array with zeros
    on unsampled lines; the adjoint re-applies the mask, inverse transforms,
    conjugate-weights, and sums the coils in a fixed order.
    """

    def __init__(self, mask: SamplingMask, coils: np.ndarray, shape: tuple[int, int, int]):
        n_t, n_y, n_x = shape
        coils = np.asarray(coils, dtype=np.complex128)
        if coils.ndim != 3 or coils.shape[1:] != (n_y, n_x):
            raise ValueError(
                f"expected coil maps shaped (n_c, {n_y}, {n_x}), got {coils.shape}"
            )
        if mask.n_t != n_t:
            raise ValueError(f"mask has {mask.n_t} frames, sequence has {n_t}")
        if mask.n_y != n_y:
            raise ValueError(f"mask n_y={mask.n_y} does not match image n_y={n_y}")
        self.mask = mask
        self.coils = coils
        self.domain_shape = (n_t, n_y, n_x)
        self.range_shape = (n_t, coils.shape[0], n_y, n_x)
        self._mask_bool = mask.as_bool_array()[:, None, :, None]
        # Mask in unshifted FFT coordinates, used by the shift-free normal op.
        self._mask_unshifted = np.fft.ifftshift(mask.as_bool_array(), axes=-1)[:, None, :, None]

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = self._check_domain(x)
        cx = self.coils[None, :, :, :] * x[:, None, :, :]
        k = fft2_centered(cx)
        k *= self._mask_bool
        return k

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        y = self._check_range(y)
        img = ifft2_centered(y * self._mask_bool)
        return np.sum(np.conj(self.coils)[None, :, :, :] * img, axis=1)

    def normal(self, x: np.ndarray) -> np.ndarray:
        """``adjoint(apply(x))`` with the interior centering shifts cancelled.

        Exactly the same operator; the fftshift/ifftshift pair around the
        mask multiply is a permutation that commutes with it, so it is
        dropped and the masking happens in unshifted coordinates.  Saves two
        full-array shuffles per call in the CG inner loops.
        """
        x = self._check_domain(x)
        axes = (-2, -1)
        cx = self.coils[None, :, :, :] * x[:, None, :, :]
        k = _fft.fft2(np.fft.ifftshift(cx, axes=axes), axes=axes, norm="ortho")
        k *= self._mask_unshifted
        img = np.fft.fftshift(_fft.ifft2(k, axes=axes, norm="ortho"), axes=axes)
        return np.sum(np.conj(self.coils)[None, :, :, :] * img, axis=1)
