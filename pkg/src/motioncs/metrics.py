"""Quantitative evaluation: ROI error, pixel time series, motion accuracy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Roi:
    """Half-open rectangle ``[y0, y1) x [x0, x1)`` in pixel coordinates."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ValueError(f"empty roi {self}")
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError(f"negative roi origin {self}")

    @property
    def yslice(self) -> slice:
        return slice(self.y0, self.y1)

    @property
    def xslice(self) -> slice:
        return slice(self.x0, self.x1)


def rmse_roi(x: np.ndarray, ref: np.ndarray, roi: Roi) -> tuple[np.ndarray, float]:
    """Per-frame and pooled RMSE of the complex difference over the ROI.

    Invariant under a common global phase of both arguments, and symmetric
    in its first two arguments.
    """
    x = np.asarray(x)
    ref = np.asarray(ref)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {ref.shape}")
    if roi.y1 > x.shape[1] or roi.x1 > x.shape[2]:
        raise ValueError(f"roi {roi} exceeds frame shape {x.shape[1:]}")
    diff = np.abs(x[:, roi.yslice, roi.xslice] - ref[:, roi.yslice, roi.xslice]) ** 2
    per_frame = np.sqrt(diff.reshape(diff.shape[0], -1).mean(axis=1))
    overall = float(np.sqrt(diff.mean()))
    return per_frame, overall


def pixel_traces(x: np.ndarray, pixels: list[tuple[int, int]]) -> np.ndarray:
    """Magnitude time series, one row per requested ``(y, x)`` pixel."""
    x = np.asarray(x)
    n_t, n_y, n_x = x.shape
    out = np.empty((len(pixels), n_t))
    for i, (py, px) in enumerate(pixels):
        if not (0 <= py < n_y and 0 <= px < n_x):
            raise ValueError(f"pixel {(py, px)} outside frame {(n_y, n_x)}")
        out[i] = np.abs(x[:, py, px])
    return out


def motion_endpoint_error(v: np.ndarray, v_true: np.ndarray, support: np.ndarray) -> float:
    """Mean Euclidean displacement error (pixels) over a support mask.

    ``support`` broadcasts against the leading field axes, so one mask can
    cover all transitions or each transition can bring its own.
    """
    v = np.asarray(v, dtype=float)
    v_true = np.asarray(v_true, dtype=float)
    if v.shape != v_true.shape:
        raise ValueError(f"shape mismatch: {v.shape} vs {v_true.shape}")
    support = np.broadcast_to(np.asarray(support, dtype=bool), v.shape[:-1])
    if not support.any():
        raise ValueError("empty support")
    err = np.sqrt(((v - v_true) ** 2).sum(axis=-1))
    return float(err[support].mean())


@dataclass
class EvalReport:
    """Bundle of the standard evaluation outputs for one reconstruction."""

    per_frame_rmse: np.ndarray
    overall_rmse: float
    roi: Roi
    trace_pixels: list[tuple[int, int]]
    traces: np.ndarray
    motion_epe: float | None = None
