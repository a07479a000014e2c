import csv
import struct

import numpy as np
import pytest

from motioncs import io
from motioncs.metrics import Roi
from motioncs.operators import SamplingMask
from conftest import random_complex


# ---------------------------------------------------------------------------
# CSQ1 sequences
# ---------------------------------------------------------------------------

def test_sequence_round_trip_exact_at_float32(tmp_path, rng):
    x = random_complex(rng, (3, 6, 5))
    path = tmp_path / "seq.csq"
    io.write_sequence(path, x)
    back = io.read_image_sequence(path)
    assert back.shape == (3, 6, 5)
    assert np.array_equal(back, x.astype(np.complex64).astype(np.complex128))
    # Second round trip is lossless.
    io.write_sequence(path, back)
    assert np.array_equal(io.read_image_sequence(path), back)


def test_sequence_header_fields(tmp_path, rng):
    x = random_complex(rng, (2, 4, 3, 5))  # (n_c, n_t, n_y, n_x)
    path = tmp_path / "seq.csq"
    io.write_sequence(path, x)
    raw = path.read_bytes()
    assert raw[:4] == b"CSQ1"
    assert struct.unpack("<4I", raw[4:20]) == (5, 3, 4, 2)
    assert len(raw) == 20 + 8 * 5 * 3 * 4 * 2


def test_sequence_bad_magic(tmp_path):
    path = tmp_path / "bad.csq"
    path.write_bytes(b"XXXX" + b"\0" * 16)
    with pytest.raises(io.FileFormatError) as err:
        io.read_sequence(path)
    assert err.value.field == "magic"


def test_sequence_zero_dim_names_field(tmp_path):
    path = tmp_path / "bad.csq"
    path.write_bytes(b"CSQ1" + struct.pack("<4I", 4, 0, 2, 1))
    with pytest.raises(io.FileFormatError) as err:
        io.read_sequence(path)
    assert err.value.field == "n_y"


def test_sequence_truncated_payload(tmp_path):
    path = tmp_path / "bad.csq"
    path.write_bytes(b"CSQ1" + struct.pack("<4I", 2, 2, 1, 1) + b"\0" * 8)
    with pytest.raises(io.FileFormatError) as err:
        io.read_sequence(path)
    assert err.value.field == "payload"


def test_read_image_sequence_rejects_multicoil(tmp_path, rng):
    path = tmp_path / "mc.csq"
    io.write_sequence(path, random_complex(rng, (3, 2, 4, 4)))
    with pytest.raises(io.FileFormatError) as err:
        io.read_image_sequence(path)
    assert err.value.field == "n_c"


def test_coils_round_trip(tmp_path, rng):
    coils = random_complex(rng, (4, 6, 5)).astype(np.complex64).astype(np.complex128)
    path = tmp_path / "coils.csq"
    io.write_coils(path, coils, n_t=3)
    raw = path.read_bytes()
    assert struct.unpack("<4I", raw[4:20]) == (5, 6, 3, 4)
    assert np.array_equal(io.read_coils(path), coils)


# ---------------------------------------------------------------------------
# CMV1 motion fields
# ---------------------------------------------------------------------------

def test_motion_round_trip(tmp_path, rng):
    field = rng.standard_normal((3, 5, 4, 2))
    path = tmp_path / "v.cmv"
    io.write_motion(path, field)
    back = io.read_motion(path)
    assert back.shape == (3, 5, 4, 2)
    assert np.array_equal(back, field.astype(np.float32).astype(np.float64))
    raw = path.read_bytes()
    assert raw[:4] == b"CMV1"
    assert struct.unpack("<3I", raw[4:16]) == (4, 5, 3)


def test_motion_bad_magic(tmp_path):
    path = tmp_path / "bad.cmv"
    path.write_bytes(b"CSQ1" + b"\0" * 12)
    with pytest.raises(io.FileFormatError) as err:
        io.read_motion(path)
    assert err.value.field == "magic"


def test_motion_length_check(tmp_path):
    path = tmp_path / "bad.cmv"
    path.write_bytes(b"CMV1" + struct.pack("<3I", 2, 2, 1) + b"\0" * 7)
    with pytest.raises(io.FileFormatError) as err:
        io.read_motion(path)
    assert err.value.field == "payload"


# ---------------------------------------------------------------------------
# JSON sidecars
# ---------------------------------------------------------------------------

def test_mask_json_round_trip(tmp_path):
    mask = SamplingMask(
        lines=(np.array([1, 8, 16]), np.array([0, 16, 30])), n_y=32, rate=10.7
    )
    path = tmp_path / "mask.json"
    io.write_mask_json(path, mask, seed=42)
    back, seed = io.read_mask_json(path, n_y=32)
    assert seed == 42
    assert back.rate == 10.7
    for a, b in zip(back.lines, mask.lines):
        assert np.array_equal(a, b)


def test_mask_json_missing_field(tmp_path):
    path = tmp_path / "mask.json"
    path.write_text('{"R": 8, "lines": [[1]]}')
    with pytest.raises(io.FileFormatError) as err:
        io.read_mask_json(path, n_y=8)
    assert err.value.field == "seed"


def test_roi_json_round_trip(tmp_path):
    path = tmp_path / "roi.json"
    io.write_roi_json(path, Roi(3, 4, 10, 12))
    assert io.read_roi_json(path) == Roi(3, 4, 10, 12)


# ---------------------------------------------------------------------------
# CSV reports
# ---------------------------------------------------------------------------

def test_report_csv_layout(tmp_path):
    per_frame = np.array([0.5, 0.25, 0.125])
    overall = float(np.sqrt(np.mean(per_frame**2)))
    path = tmp_path / "report.csv"
    io.write_report_csv(path, per_frame, overall)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["frame", "rmse"]
    assert len(rows) == 1 + 3 + 1
    assert rows[-1][0] == "overall"
    parsed = [float(r[1]) for r in rows[1:-1]]
    assert float(rows[-1][1]) == pytest.approx(np.sqrt(np.mean(np.array(parsed) ** 2)))


def test_traces_csv_layout(tmp_path):
    traces = np.array([[1.0, 2.0], [3.0, 4.0]])
    path = tmp_path / "traces.csv"
    io.write_traces_csv(path, [(5, 6), (7, 8)], traces)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["pixel", "frame", "magnitude"]
    assert len(rows) == 1 + 4
    assert rows[1] == ["5:6", "0", "1"]


def test_iters_csv_columns(tmp_path):
    rec = {
        "iter": 0, "l1_prior": 1.0, "data_residual_sq": 2.0,
        "r_pm": 3.0, "r_mx": 4.0, "r_ys": 5.0, "beta": 6.0,
    }
    plain = tmp_path / "iters.csv"
    io.write_iters_csv(plain, [rec], joint=False)
    rows = list(csv.reader(plain.open()))
    assert rows[0] == ["iter", "l1_prior", "data_residual_sq", "r_pm", "r_mx", "r_ys"]
    joint = tmp_path / "iters_joint.csv"
    io.write_iters_csv(joint, [rec], joint=True)
    rows = list(csv.reader(joint.open()))
    assert rows[0][-1] == "beta"


def test_table_csv_layout(tmp_path):
    path = tmp_path / "table.csv"
    io.write_table_csv(path, [("tv", 8.0, 0.025), ("dft", 10.0, 0.05)])
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["solver", "R", "overall_rmse"]
    assert rows[1] == ["tv", "8", "0.025"]


# ---------------------------------------------------------------------------
# PGM export
# ---------------------------------------------------------------------------

def test_pgm_header_and_scaling(tmp_path):
    frame = np.array([[0.0, 0.5], [0.25, 1.0]])
    path = tmp_path / "frame.pgm"
    io.write_pgm(path, frame, global_max=1.0)
    raw = path.read_bytes()
    header = b"P5\n2 2\n65535\n"
    assert raw.startswith(header)
    pixels = np.frombuffer(raw[len(header):], dtype=">u2").reshape(2, 2)
    assert pixels[1, 1] == 65535
    assert pixels[0, 0] == 0
    assert pixels[0, 1] == round(0.5 * 65535)


def test_pgm_zero_frame(tmp_path):
    path = tmp_path / "zero.pgm"
    io.write_pgm(path, np.zeros((3, 4)), global_max=0.0)
    raw = path.read_bytes()
    pixels = np.frombuffer(raw[len(b"P5\n4 3\n65535\n"):], dtype=">u2")
    assert (pixels == 0).all()


def test_write_determinism(tmp_path, rng):
    x = random_complex(rng, (2, 4, 4))
    a, b = tmp_path / "a.csq", tmp_path / "b.csq"
    io.write_sequence(a, x)
    io.write_sequence(b, x)
    assert a.read_bytes() == b.read_bytes()
