"""Acceptance gate: one test per criterion, each printing a PASS line.

Criteria 5-7 share one benchmark: the small-profile acquisition at R=8 run
through all four solvers with iteration logging.  The full 256x256x24 sweep
over R in {8, 10, 12, 14} is opt-in (MOTIONCS_ACCEPT_FULL=1) because it
needs a multi-hour budget on a single core.
"""

import math
import os
import time

import numpy as np
import pytest

from motioncs import io
from motioncs.cli import main
from motioncs.core import fft2_centered, ifft2_centered, inner, l1_norm, l2_norm
from motioncs.datagen import (
    MaskSpec,
    ci_profile,
    full_profile,
    generate_coils,
    generate_mask,
    generate_phantom,
    moving_support,
    simulate_acquisition,
    suggest_epsilon,
)
from motioncs.metrics import motion_endpoint_error, rmse_roi
from motioncs.operators import (
    MeasurementOperator,
    MotionCompensatedDifference,
    TemporalDFT,
    TemporalDifference,
    build_motion_matrix,
    full_mask,
)
from motioncs.solvers import (
    AdmmParams,
    cg_solve,
    project_consistency,
    reconstruct_admm,
    reconstruct_joint,
    reconstruct_separate,
    soft_threshold,
    temporal_prior,
)
from conftest import random_complex

BENCH_NOISE = 0.005
BENCH_SEED = 16


def _report(criterion, detail):
    print(f"ACCEPTANCE criterion {criterion}: PASS ({detail})")


@pytest.fixture(scope="module")
def ci_benchmark():
    """R=8 benchmark cell on the small profile: all four solvers + logs."""
    spec = ci_profile()
    x_true, v_true, roi = generate_phantom(spec)
    support = moving_support(spec)
    coils = generate_coils(spec.n_y, spec.n_x, spec.n_coils)
    mask = generate_mask(MaskSpec(rate=8, seed=BENCH_SEED), spec.n_y, spec.n_t)
    y = simulate_acquisition(x_true, coils, mask, noise_sigma=BENCH_NOISE, seed=7008)
    epsilon = suggest_epsilon(y, mask, BENCH_NOISE)
    h = MeasurementOperator(mask, coils, x_true.shape)
    params = AdmmParams(epsilon=epsilon)

    logs, recon, fields = {}, {}, {}
    t0 = time.process_time()
    for name in ("dft", "tv"):
        logs[name] = []
        recon[name] = reconstruct_admm(
            y, h, temporal_prior(name, x_true.shape), params, callback=logs[name].append
        )
    logs["motion_tv"] = []
    recon["motion_tv"], fields["motion_tv"] = reconstruct_separate(
        y, h, params, callback=logs["motion_tv"].append
    )
    logs["joint_motion_tv"] = []
    recon["joint_motion_tv"], fields["joint_motion_tv"] = reconstruct_joint(
        y, h, params, callback=logs["joint_motion_tv"].append
    )
    elapsed = time.process_time() - t0

    rmse = {name: rmse_roi(xh, x_true, roi)[1] for name, xh in recon.items()}
    return {
        "spec": spec, "x_true": x_true, "v_true": v_true, "roi": roi,
        "support": support, "epsilon": epsilon, "rmse": rmse, "logs": logs,
        "recon": recon, "fields": fields, "elapsed": elapsed,
    }


def test_criterion_1_operator_algebra(rng):
    t0 = time.process_time()
    spec = ci_profile()
    shape = (spec.n_t, spec.n_y, spec.n_x)
    coils = generate_coils(spec.n_y, spec.n_x, spec.n_coils)
    mask = generate_mask(MaskSpec(rate=8, seed=3), spec.n_y, spec.n_t)
    field = rng.uniform(-2.5, 2.5, (spec.n_t, spec.n_y, spec.n_x, 2))
    operators = {
        "H": MeasurementOperator(mask, coils, shape),
        "D_t": TemporalDifference(shape),
        "Phi_t": TemporalDFT(shape),
        "K_t(v)": MotionCompensatedDifference(field, shape),
    }
    for name, op in operators.items():
        for _ in range(10):
            u = random_complex(rng, op.domain_shape)
            w = random_complex(rng, op.range_shape)
            gap = abs(inner(op.apply(u), w) - inner(u, op.adjoint(w)))
            assert gap <= 1e-10 * (l2_norm(u) * l2_norm(w)), name

    x = random_complex(rng, shape)
    phi = operators["Phi_t"]
    assert np.abs(phi.adjoint(phi.apply(x)) - x).max() <= 1e-12
    u = random_complex(rng, (spec.n_y, spec.n_x))
    assert np.abs(ifft2_centered(fft2_centered(u)) - u).max() <= 1e-12

    for mat in MotionCompensatedDifference(field, shape).matrices:
        assert np.abs(np.asarray(mat.sum(axis=1)).ravel() - 1.0).max() <= 1e-12

    zero_field = np.zeros((spec.n_t, spec.n_y, spec.n_x, 2))
    k0 = MotionCompensatedDifference(zero_field, shape)
    dt = TemporalDifference(shape)
    assert np.array_equal(k0.apply(x), dt.apply(x))

    elapsed = time.process_time() - t0
    assert elapsed < 10.0
    _report(1, f"adjoints/unitarity/row-sums/K(0)=D_t in {elapsed:.1f}s")


def test_criterion_2_solver_kernels(rng):
    t0 = time.process_time()
    u = random_complex(rng, 10_000) * rng.uniform(0.05, 4.0)
    tau = 0.6
    out = soft_threshold(u, tau)
    for k in range(u.size):
        a = complex(u[k])
        mag = math.sqrt(a.real * a.real + a.imag * a.imag)
        expected = ((mag - tau) / mag) * a if mag > tau else 0.0
        assert out[k] == expected

    for _ in range(50):
        r = random_complex(rng, 64)
        eps = float(np.vdot(r, r).real) * rng.uniform(0.2, 2.0)
        s = project_consistency(r, np.zeros_like(r), np.zeros_like(r), eps)
        s_sq = float(np.vdot(s, s).real)
        assert s_sq == 0.0 or abs(s_sq - eps) <= 1e-12 * eps

    for n in (8, 32, 64):
        a = random_complex(rng, (n, n))
        mat = a.conj().T @ a + np.eye(n)
        b = random_complex(rng, n)
        x, _ = cg_solve(lambda z: mat @ z, b, max_iters=4 * n, tol=1e-12)
        expected = np.linalg.solve(mat, b)
        assert l2_norm(x - expected) / l2_norm(expected) < 1e-6

    elapsed = time.process_time() - t0
    assert elapsed < 10.0
    _report(2, f"threshold exact on 1e4 scalars, projection, CG vs dense in {elapsed:.1f}s")


def test_criterion_3_full_sampling_recovery():
    t0 = time.process_time()
    spec = ci_profile()
    x_true, _, _ = generate_phantom(spec)
    h = MeasurementOperator(
        full_mask(spec.n_t, spec.n_y), np.ones((1, spec.n_y, spec.n_x), complex), x_true.shape
    )
    y = h.apply(x_true)
    params = AdmmParams(epsilon=1e-10 * float(np.vdot(y, y).real))

    errors = {}
    errors["dft"] = reconstruct_admm(y, h, temporal_prior("dft", x_true.shape), params)
    errors["tv"] = reconstruct_admm(y, h, temporal_prior("tv", x_true.shape), params)
    errors["motion_tv"], _ = reconstruct_separate(y, h, params)
    errors["joint_motion_tv"], _ = reconstruct_joint(y, h, params)
    rel = {k: l2_norm(v - x_true) / l2_norm(x_true) for k, v in errors.items()}
    for name, err in rel.items():
        assert err < 1e-3, (name, err)

    elapsed = time.process_time() - t0
    assert elapsed < 120.0
    worst = max(rel.values())
    _report(3, f"all four solvers, worst rel err {worst:.1e} in {elapsed:.0f}s")


def test_criterion_4_prior_sparsity():
    t0 = time.process_time()
    spec = ci_profile()
    x_true, v_true, _ = generate_phantom(spec)
    support = moving_support(spec)
    peak_step = max(
        np.sqrt((v_true[j][support[j]] ** 2).sum(axis=-1)).mean()
        for j in range(v_true.shape[0])
    )
    assert peak_step >= 2.0

    kt = MotionCompensatedDifference(v_true, x_true.shape)
    dt = TemporalDifference(x_true.shape)
    ratio = l1_norm(kt.apply(x_true)) / l1_norm(dt.apply(x_true))
    assert ratio <= 0.5

    elapsed = time.process_time() - t0
    assert elapsed < 30.0
    _report(4, f"l1 ratio {ratio:.3f} <= 0.5 at {peak_step:.1f} px/frame in {elapsed:.1f}s")


def test_criterion_5_reconstruction_ordering(ci_benchmark):
    rmse = ci_benchmark["rmse"]
    assert rmse["motion_tv"] < rmse["tv"] < rmse["dft"], rmse
    ratio = rmse["joint_motion_tv"] / rmse["motion_tv"]
    assert ratio <= 1.15, rmse
    assert ci_benchmark["elapsed"] <= 180.0
    _report(
        5,
        "R=8 CI profile: motion_tv {motion_tv:.4f} < tv {tv:.4f} < dft {dft:.4f}, "
        "joint/separate {ratio:.2f}, {elapsed:.0f}s".format(
            ratio=ratio, elapsed=ci_benchmark["elapsed"], **rmse
        ),
    )


def test_criterion_6_motion_recovery(ci_benchmark):
    epe = motion_endpoint_error(
        ci_benchmark["fields"]["motion_tv"],
        ci_benchmark["v_true"],
        ci_benchmark["support"],
    )
    assert epe < 0.5

    x_joint = ci_benchmark["recon"]["joint_motion_tv"]
    v_joint = ci_benchmark["fields"]["joint_motion_tv"]
    kt = MotionCompensatedDifference(v_joint, x_joint.shape)
    dt = TemporalDifference(x_joint.shape)
    l1_k = l1_norm(kt.apply(x_joint))
    l1_d = l1_norm(dt.apply(x_joint))
    assert l1_k < l1_d
    _report(6, f"separate EPE {epe:.2f} px < 0.5; joint l1 {l1_k:.2f} < {l1_d:.2f}")


def test_criterion_7_convergence_diagnostics(ci_benchmark):
    eps = ci_benchmark["epsilon"]
    for name, records in ci_benchmark["logs"].items():
        r10, r100 = records[9], records[99]
        assert r100["r_pm"] <= r10["r_pm"] / 10.0, name
        assert r100["r_mx"] <= r10["r_mx"] / 10.0, name
        assert r100["data_residual_sq"] <= 1.05 * eps, name
    # The fixed-prior runs decay two orders of magnitude from iteration 1.
    for name in ("dft", "tv"):
        records = ci_benchmark["logs"][name]
        assert records[99]["r_pm"] <= records[0]["r_pm"] / 100.0, name
        assert records[99]["r_mx"] <= records[0]["r_mx"] / 100.0, name
    _report(7, "pm/mx residuals decayed >=10x by iter 100; final data residual <= 1.05 eps")


def test_criterion_8_determinism_and_round_trips(tmp_path, rng):
    # Full pipeline determinism through the CLI.
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert main(["phantom", "--out", str(out)]) == 0
        assert main(["sample", "--out", str(out), "--rate", "8", "--seed", "7"]) == 0
        assert main(["reconstruct", "--out", str(out), "--solver", "tv", "--iters", "10"]) == 0
        outs.append(out)
    for name in ("x_true.csq", "coils.csq", "y.csq", "mask.json", "x_hat.csq", "iters.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name

    # Format round trips are exact at float32 resolution.
    x = random_complex(rng, (3, 5, 4))
    io.write_sequence(tmp_path / "t.csq", x)
    assert np.array_equal(
        io.read_image_sequence(tmp_path / "t.csq"),
        x.astype(np.complex64).astype(np.complex128),
    )
    field = rng.standard_normal((2, 5, 4, 2))
    io.write_motion(tmp_path / "t.cmv", field)
    assert np.array_equal(
        io.read_motion(tmp_path / "t.cmv"), field.astype(np.float32).astype(np.float64)
    )

    # Mask statistics against the exact row pdf in the single-free-draw
    # regime (the exhaustive checks live in tests/test_datagen.py).
    n_y, n_frames = 32, 4000
    mask = generate_mask(MaskSpec(rate=n_y / 2, seed=77), n_y, n_frames)
    dc = n_y // 2
    counts = np.zeros(n_y)
    for rows in mask.lines:
        counts[rows[rows != dc]] += 1
    grid = np.arange(n_y)
    weights = np.exp(-((grid - dc) ** 2) / (2.0 * (0.45 * n_y) ** 2))
    weights[dc] = 0.0
    p = weights / weights.sum()
    bound = 3.0 * np.sqrt(n_frames * p * (1 - p))
    assert (np.abs(counts - n_frames * p) <= np.maximum(bound, 1e-9)).all()
    _report(8, "byte-identical reruns, exact float32 round trips, Gaussian mask statistics")


needs_full = pytest.mark.skipif(
    os.environ.get("MOTIONCS_ACCEPT_FULL") != "1",
    reason="multi-hour full-scale sweep; set MOTIONCS_ACCEPT_FULL=1 to run",
)


@needs_full
@pytest.mark.full_scale
def test_criterion_5_full_scale_sweep():
    spec = full_profile()
    x_true, v_true, roi = generate_phantom(spec)
    support = moving_support(spec)
    coils = generate_coils(spec.n_y, spec.n_x, spec.n_coils)
    t0 = time.monotonic()
    history = {}
    for rate in (8.0, 10.0, 12.0, 14.0):
        mask = generate_mask(
            MaskSpec(rate=rate, seed=BENCH_SEED + int(rate)), spec.n_y, spec.n_t
        )
        y = simulate_acquisition(
            x_true, coils, mask, noise_sigma=BENCH_NOISE, seed=7000 + int(rate)
        )
        epsilon = suggest_epsilon(y, mask, BENCH_NOISE)
        h = MeasurementOperator(mask, coils, x_true.shape)
        params = AdmmParams(epsilon=epsilon)
        rmse = {}
        rmse["dft"] = rmse_roi(
            reconstruct_admm(y, h, temporal_prior("dft", x_true.shape), params), x_true, roi
        )[1]
        rmse["tv"] = rmse_roi(
            reconstruct_admm(y, h, temporal_prior("tv", x_true.shape), params), x_true, roi
        )[1]
        x_sep, v_sep = reconstruct_separate(y, h, params)
        rmse["motion_tv"] = rmse_roi(x_sep, x_true, roi)[1]
        x_joint, _ = reconstruct_joint(y, h, params)
        rmse["joint_motion_tv"] = rmse_roi(x_joint, x_true, roi)[1]

        assert rmse["motion_tv"] < rmse["tv"] < rmse["dft"], (rate, rmse)
        assert rmse["joint_motion_tv"] <= 1.15 * rmse["motion_tv"], (rate, rmse)
        if rate == 8.0:
            epe = motion_endpoint_error(v_sep, v_true, support)
            assert epe < 0.5
        history[rate] = rmse
        print(f"full scale R={rate:g}: {rmse}")

    # Quality degrades (within a 5% slack) as the rate climbs.
    rates = sorted(history)
    for solver in ("dft", "tv", "motion_tv", "joint_motion_tv"):
        for lo, hi in zip(rates, rates[1:]):
            assert history[hi][solver] >= 0.95 * history[lo][solver], solver
    _report("5 (full scale)", f"orderings hold at all rates in {time.monotonic() - t0:.0f}s")
