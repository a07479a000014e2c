"""Bit-exact file formats tying the pipeline stages together.

* ``CSQ1``: complex sequences. Magic ``CSQ1``, four little-endian u32 fields
  ``n_x, n_y, n_t, n_c``, then float32 ``(re, im)`` pairs in ``(c, t, y, x)``
  row-major order.
* ``CMV1``: motion fields. Magic ``CMV1``, u32 ``n_x, n_y, n_transitions``,
  then float32 ``(dy, dx)`` pairs in ``(transition, y, x)`` order.
* ``mask.json`` / ``roi.json``: sampling lines and evaluation rectangle.
* CSV reports and 16-bit binary PGM frame exports.

Readers validate magic and dimensions before touching the payload and name
the offending field on failure.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .metrics import Roi
from .operators import SamplingMask

SEQ_MAGIC = b"CSQ1"
MOT_MAGIC = b"CMV1"


class FileFormatError(ValueError):
    """A file failed structural validation; ``field`` names the culprit."""

    def __init__(self, path: str | Path, field: str, detail: str):
        self.path = str(path)
        self.field = field
        super().__init__(f"{path}: invalid {field}: {detail}")


# ---------------------------------------------------------------------------
# CSQ1 sequences
# ---------------------------------------------------------------------------

def write_sequence(path: str | Path, data: np.ndarray) -> None:
    """Write a complex stack; 3D input ``(n_t, n_y, n_x)`` is stored with
    ``n_c = 1``, 4D input is ``(n_c, n_t, n_y, n_x)``."""
    data = np.asarray(data)
    if data.ndim == 3:
        data = data[None]
    if data.ndim != 4:
        raise ValueError(f"expected 3D or 4D data, got shape {data.shape}")
    n_c, n_t, n_y, n_x = data.shape
    with open(path, "wb") as f:
        f.write(SEQ_MAGIC)
        f.write(struct.pack("<4I", n_x, n_y, n_t, n_c))
        f.write(np.ascontiguousarray(data).astype("<c8").tobytes())


def read_sequence(path: str | Path) -> np.ndarray:
    """Read a CSQ1 file as complex128 ``(n_c, n_t, n_y, n_x)``."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != SEQ_MAGIC:
            raise FileFormatError(path, "magic", f"expected {SEQ_MAGIC!r}, got {magic!r}")
        header = f.read(16)
        if len(header) != 16:
            raise FileFormatError(path, "header", "truncated dimension block")
        n_x, n_y, n_t, n_c = struct.unpack("<4I", header)
        for name, val in (("n_x", n_x), ("n_y", n_y), ("n_t", n_t), ("n_c", n_c)):
            if val == 0:
                raise FileFormatError(path, name, "must be positive")
        payload = f.read()
    expected = 8 * n_x * n_y * n_t * n_c
    if len(payload) != expected:
        raise FileFormatError(path, "payload", f"expected {expected} bytes, got {len(payload)}")
    data = np.frombuffer(payload, dtype="<c8").reshape(n_c, n_t, n_y, n_x)
    return data.astype(np.complex128)


def read_image_sequence(path: str | Path) -> np.ndarray:
    """Read a single-coil CSQ1 file as ``(n_t, n_y, n_x)``."""
    data = read_sequence(path)
    if data.shape[0] != 1:
        raise FileFormatError(path, "n_c", f"expected a single-coil file, got n_c={data.shape[0]}")
    return data[0]


def write_coils(path: str | Path, coils: np.ndarray, n_t: int) -> None:
    """Store coil maps replicated per frame so one reader serves all files."""
    coils = np.asarray(coils)
    n_c, n_y, n_x = coils.shape
    write_sequence(path, np.broadcast_to(coils[:, None], (n_c, n_t, n_y, n_x)))


def read_coils(path: str | Path) -> np.ndarray:
    """Read coil maps as ``(n_c, n_y, n_x)`` (frame 0 of the stored stack)."""
    return read_sequence(path)[:, 0]


# ---------------------------------------------------------------------------
# CMV1 motion fields
# ---------------------------------------------------------------------------

def write_motion(path: str | Path, field: np.ndarray) -> None:
    field = np.asarray(field)
    if field.ndim != 4 or field.shape[-1] != 2:
        raise ValueError(f"expected field shape (n_transitions, n_y, n_x, 2), got {field.shape}")
    n_tr, n_y, n_x, _ = field.shape
    with open(path, "wb") as f:
        f.write(MOT_MAGIC)
        f.write(struct.pack("<3I", n_x, n_y, n_tr))
        f.write(np.ascontiguousarray(field).astype("<f4").tobytes())


def read_motion(path: str | Path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MOT_MAGIC:
            raise FileFormatError(path, "magic", f"expected {MOT_MAGIC!r}, got {magic!r}")
        header = f.read(12)
        if len(header) != 12:
            raise FileFormatError(path, "header", "truncated dimension block")
        n_x, n_y, n_tr = struct.unpack("<3I", header)
        for name, val in (("n_x", n_x), ("n_y", n_y), ("n_transitions", n_tr)):
            if val == 0:
                raise FileFormatError(path, name, "must be positive")
        payload = f.read()
    expected = 8 * n_x * n_y * n_tr
    if len(payload) != expected:
        raise FileFormatError(path, "payload", f"expected {expected} bytes, got {len(payload)}")
    field = np.frombuffer(payload, dtype="<f4").reshape(n_tr, n_y, n_x, 2)
    return field.astype(np.float64)


# ---------------------------------------------------------------------------
# JSON sidecars
# ---------------------------------------------------------------------------

def write_mask_json(path: str | Path, mask: SamplingMask, seed: int) -> None:
    payload = {
        "R": mask.rate,
        "seed": int(seed),
        "lines": [[int(r) for r in rows] for rows in mask.lines],
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def read_mask_json(path: str | Path, n_y: int) -> tuple[SamplingMask, int]:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FileFormatError(path, "json", str(exc)) from exc
    for key in ("R", "seed", "lines"):
        if key not in payload:
            raise FileFormatError(path, key, "missing field")
    lines = tuple(np.asarray(rows, dtype=np.intp) for rows in payload["lines"])
    mask = SamplingMask(lines=lines, n_y=n_y, rate=float(payload["R"]))
    return mask, int(payload["seed"])


def write_roi_json(path: str | Path, roi: Roi) -> None:
    Path(path).write_text(
        json.dumps({"x0": roi.x0, "y0": roi.y0, "x1": roi.x1, "y1": roi.y1}) + "\n"
    )


def read_roi_json(path: str | Path) -> Roi:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FileFormatError(path, "json", str(exc)) from exc
    for key in ("x0", "y0", "x1", "y1"):
        if key not in payload:
            raise FileFormatError(path, key, "missing field")
    return Roi(x0=int(payload["x0"]), y0=int(payload["y0"]), x1=int(payload["x1"]), y1=int(payload["y1"]))


# ---------------------------------------------------------------------------
# CSV reports
# ---------------------------------------------------------------------------

def write_report_csv(path: str | Path, per_frame: np.ndarray, overall: float) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["frame", "rmse"])
        for t, val in enumerate(per_frame):
            w.writerow([t, f"{val:.10g}"])
        w.writerow(["overall", f"{overall:.10g}"])


def write_traces_csv(path: str | Path, pixels: list[tuple[int, int]], traces: np.ndarray) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["pixel", "frame", "magnitude"])
        for i, (py, px) in enumerate(pixels):
            for t in range(traces.shape[1]):
                w.writerow([f"{py}:{px}", t, f"{traces[i, t]:.10g}"])


ITER_COLUMNS = ["iter", "l1_prior", "data_residual_sq", "r_pm", "r_mx", "r_ys"]


def write_iters_csv(path: str | Path, records: list[dict[str, float]], joint: bool) -> None:
    columns = ITER_COLUMNS + (["beta"] if joint else [])
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(columns)
        for rec in records:
            w.writerow(
                [rec["iter"]] + [f"{rec[c]:.10g}" for c in columns[1:]]
            )


def write_table_csv(path: str | Path, rows: list[tuple[str, float, float]]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["solver", "R", "overall_rmse"])
        for solver, rate, rmse in rows:
            w.writerow([solver, f"{rate:g}", f"{rmse:.10g}"])


# ---------------------------------------------------------------------------
# PGM export
# ---------------------------------------------------------------------------

def write_pgm(path: str | Path, frame_magnitude: np.ndarray, global_max: float) -> None:
    """16-bit binary PGM with values scaled by a shared maximum."""
    mag = np.asarray(frame_magnitude, dtype=float)
    if mag.ndim != 2:
        raise ValueError(f"expected a 2D frame, got shape {mag.shape}")
    if global_max > 0:
        scaled = np.clip(np.rint(mag / global_max * 65535.0), 0, 65535)
    else:
        scaled = np.zeros_like(mag)
    h, w = mag.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(scaled.astype(">u2").tobytes())
