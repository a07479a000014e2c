"""Core numeric primitives: array conventions, centered FFT, inner products.

Conventions used throughout the package
---------------------------------------
* A dynamic image sequence is a complex128 array of shape ``(n_t, n_y, n_x)``
  (frame, row, column), row-major in memory.
* Coil sensitivity maps are ``(n_c, n_y, n_x)``.
* Dense motion fields are ``(n_transitions, n_y, n_x, 2)`` with the last axis
  holding ``(dy, dx)`` pixel displacements.

Every concrete operator derives from :class:`LinearOperator` and satisfies
the adjoint identity ``inner(A.apply(u), w) == inner(u, A.adjoint(w))`` in
the complex inner product implemented by :func:`inner`.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np
import scipy.fft as _fft


def fft2_centered(u: np.ndarray) -> np.ndarray:
    """Centered orthonormal 2D FFT over the last two axes.

    The zero-frequency (DC) coefficient lands at ``(n_y // 2, n_x // 2)`` and
    the transform is unitary (scaling ``1/sqrt(n_y * n_x)``), so the adjoint
    equals the inverse.
    """
    if u.ndim < 2:
        raise ValueError(f"expected an array with at least 2 axes, got shape {u.shape}")
    axes = (-2, -1)
    return np.fft.fftshift(
        _fft.fft2(np.fft.ifftshift(u, axes=axes), axes=axes, norm="ortho"), axes=axes
    )


def ifft2_centered(k: np.ndarray) -> np.ndarray:
    """Inverse (= adjoint) of :func:`fft2_centered`."""
    if k.ndim < 2:
        raise ValueError(f"expected an array with at least 2 axes, got shape {k.shape}")
    axes = (-2, -1)
    return np.fft.fftshift(
        _fft.ifft2(np.fft.ifftshift(k, axes=axes), axes=axes, norm="ortho"), axes=axes
    )


def inner(u: np.ndarray, w: np.ndarray) -> complex:
    """Complex inner product ``sum_k u_k * conj(w_k)``.

    Conjugate-linear in the second argument.
    """
    u = np.asarray(u)
    w = np.asarray(w)
    if u.size != w.size:
        raise ValueError(f"length mismatch: {u.size} vs {w.size}")
    # np.vdot conjugates its first argument, so swap to conjugate w.
    return complex(np.vdot(w.ravel(), u.ravel()))


def l1_norm(u: np.ndarray) -> float:
    return float(np.abs(u).sum())


def l2_norm(u: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(u).ravel()))


def l0_count(u: np.ndarray, tol: float) -> int:
    """Number of entries with magnitude above ``tol``."""
    return int((np.abs(u) > tol).sum())


def check_finite(u: np.ndarray, name: str = "array") -> np.ndarray:
    u = np.asarray(u)
    if not np.isfinite(u).all():
        raise ValueError(f"{name} contains non-finite values")
    return u


class LinearOperator(ABC):
    """Forward/adjoint pair acting on fixed-shape complex arrays.

    Instances are immutable after construction and safe to apply from
    several threads at once.
    """

    domain_shape: tuple[int, ...]
    range_shape: tuple[int, ...]

    @abstractmethod
    def apply(self, x: np.ndarray) -> np.ndarray:
        """Map a domain-shaped array to a range-shaped array."""

    @abstractmethod
    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """Map a range-shaped array back to the domain (conjugate transpose)."""

    def _check_domain(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != self.domain_shape:
            raise ValueError(f"expected domain shape {self.domain_shape}, got {x.shape}")
        return x

    def _check_range(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        if y.shape != self.range_shape:
            raise ValueError(f"expected range shape {self.range_shape}, got {y.shape}")
        return y
