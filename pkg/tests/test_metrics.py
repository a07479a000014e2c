import numpy as np
import pytest

from motioncs.core import l2_norm
from motioncs.datagen import (
    MaskSpec,
    ci_profile,
    generate_mask,
    generate_phantom,
    simulate_acquisition,
)
from motioncs.metrics import (
    EvalReport,
    Roi,
    motion_endpoint_error,
    pixel_traces,
    rmse_roi,
)
from motioncs.operators import MeasurementOperator, full_mask
from motioncs.solvers import AdmmParams, reconstruct_admm, temporal_prior
from conftest import random_complex


def test_roi_validation():
    with pytest.raises(ValueError):
        Roi(4, 4, 4, 8)
    with pytest.raises(ValueError):
        Roi(-1, 0, 4, 4)


def test_rmse_zero_for_identical_inputs(rng):
    x = random_complex(rng, (3, 8, 8))
    per_frame, overall = rmse_roi(x, x, Roi(1, 1, 7, 7))
    assert np.abs(per_frame).max() == 0
    assert overall == 0


def test_rmse_constant_offset():
    x = np.zeros((3, 8, 8), dtype=complex)
    roi = Roi(2, 2, 6, 6)
    x[:, roi.yslice, roi.xslice] = 0.5 - 0.25j
    per_frame, overall = rmse_roi(x, np.zeros_like(x), roi)
    assert np.allclose(per_frame, abs(0.5 - 0.25j))
    assert overall == pytest.approx(abs(0.5 - 0.25j))


def test_rmse_global_phase_invariance(rng):
    x = random_complex(rng, (4, 10, 10))
    ref = random_complex(rng, (4, 10, 10))
    roi = Roi(2, 1, 9, 8)
    _, base = rmse_roi(x, ref, roi)
    phase = np.exp(1j * 1.234)
    _, rotated = rmse_roi(phase * x, phase * ref, roi)
    assert rotated == pytest.approx(base, rel=1e-12)


def test_rmse_symmetry(rng):
    x = random_complex(rng, (2, 6, 6))
    ref = random_complex(rng, (2, 6, 6))
    roi = Roi(0, 0, 6, 6)
    assert rmse_roi(x, ref, roi)[1] == rmse_roi(ref, x, roi)[1]


def test_rmse_overall_pools_per_frame_values(rng):
    x = random_complex(rng, (5, 8, 8))
    ref = random_complex(rng, (5, 8, 8))
    per_frame, overall = rmse_roi(x, ref, Roi(1, 2, 7, 8))
    assert overall == pytest.approx(np.sqrt(np.mean(per_frame**2)), rel=1e-12)


def test_rmse_roi_out_of_bounds(rng):
    x = random_complex(rng, (2, 6, 6))
    with pytest.raises(ValueError):
        rmse_roi(x, x, Roi(0, 0, 7, 6))


def test_pixel_traces_static_sequence(rng):
    frame = random_complex(rng, (6, 6))
    x = np.broadcast_to(frame, (5, 6, 6)).copy()
    traces = pixel_traces(x, [(2, 3), (4, 1)])
    assert traces.shape == (2, 5)
    assert np.allclose(traces, traces[:, :1])


def test_pixel_traces_bounds_check(rng):
    with pytest.raises(ValueError):
        pixel_traces(random_complex(rng, (2, 4, 4)), [(4, 0)])


def test_trace_of_fully_sampled_recon_matches_truth():
    spec = ci_profile()
    x_true, _, roi = generate_phantom(spec)
    mask = full_mask(spec.n_t, spec.n_y)
    coils = np.ones((1, spec.n_y, spec.n_x), dtype=complex)
    h = MeasurementOperator(mask, coils, x_true.shape)
    recon = h.adjoint(h.apply(x_true))
    pixel = ((roi.y0 + roi.y1) // 2, (roi.x0 + roi.x1) // 2)
    t_recon = pixel_traces(recon, [pixel])
    t_true = pixel_traces(x_true, [pixel])
    assert np.abs(t_recon - t_true).max() < 1e-10


def test_dft_reconstruction_smooths_fast_pixels():
    # The temporal-DFT prior shaves high temporal frequencies: on the most
    # dynamic pixel its reconstruction carries less high-frequency energy
    # than the ground truth does.
    spec = ci_profile()
    x_true, _, roi = generate_phantom(spec)
    coils = np.ones((1, spec.n_y, spec.n_x), dtype=complex)
    mask = generate_mask(MaskSpec(rate=8, seed=4), spec.n_y, spec.n_t)
    y = simulate_acquisition(x_true, coils, mask, noise_sigma=0.01, seed=21)
    h = MeasurementOperator(mask, coils, x_true.shape)
    eps = mask.n_sampled * spec.n_x * 1 * 0.01**2
    recon = reconstruct_admm(
        y, h, temporal_prior("dft", x_true.shape), AdmmParams(epsilon=eps, max_iters=60)
    )

    mags = np.abs(x_true)
    variance = mags.var(axis=0)
    py, px = np.unravel_index(np.argmax(variance), variance.shape)

    def high_freq_energy(x):
        spectrum = np.fft.fft(np.abs(x[:, py, px]))
        return float(np.abs(spectrum[2:-1]).sum())

    assert high_freq_energy(recon) < high_freq_energy(x_true)


def test_motion_epe_zero_for_equal_fields(rng):
    v = rng.standard_normal((3, 5, 5, 2))
    sup = np.ones((3, 5, 5), dtype=bool)
    assert motion_endpoint_error(v, v, sup) == 0


def test_motion_epe_constant_offset(rng):
    v = rng.standard_normal((2, 4, 4, 2))
    shifted = v + np.array([1.0, 0.0])
    sup = np.ones((2, 4, 4), dtype=bool)
    assert motion_endpoint_error(shifted, v, sup) == pytest.approx(1.0)


def test_motion_epe_empty_support(rng):
    v = rng.standard_normal((2, 4, 4, 2))
    with pytest.raises(ValueError):
        motion_endpoint_error(v, v, np.zeros((2, 4, 4), dtype=bool))


def test_eval_report_container():
    report = EvalReport(
        per_frame_rmse=np.zeros(3),
        overall_rmse=0.0,
        roi=Roi(0, 0, 4, 4),
        trace_pixels=[(1, 1)],
        traces=np.zeros((1, 3)),
    )
    assert report.motion_epe is None
