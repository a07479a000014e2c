"""Command-line surface: generate -> sample -> reconstruct -> evaluate,
plus a sweep runner emitting a solver-by-rate RMSE table.

Commands exchange files through an output directory with canonical names
(``x_true.csq``, ``coils.csq``, ``v_true.cmv``, ``roi.json``, ``y.csq``,
``mask.json``, ``x_hat.csq``, ``v_hat.cmv``, ``iters.csv``, ``report.csv``,
``traces.csv``, ``table.csv``).  Options may come from an INI config file
(``--config``); command-line flags win.

Exit codes: 0 success, 1 usage/config error, 2 solver divergence, 3 I/O or
file-format error.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import datagen, io, metrics, solvers
from .motion import RegistrationConfig
from .operators import MeasurementOperator, MotionCompensatedDifference
from .solvers import AdmmParams, DivergenceError, JointParams

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGED = 2
EXIT_IO = 3

SOLVER_NAMES = ("dft", "tv", "motion_tv", "joint_motion_tv")
SWEEP_RATES = (8.0, 10.0, 12.0, 14.0)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise UsageError(message)


def _load_config(path: str | None) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    if path is not None:
        if not Path(path).exists():
            raise UsageError(f"config file not found: {path}")
        cfg.read(path)
    return cfg


def _cfg(cfg: configparser.ConfigParser, section: str, key: str, cast, default):
    if cfg.has_option(section, key):
        try:
            return cast(cfg.get(section, key))
        except ValueError as exc:
            raise UsageError(f"config [{section}] {key}: {exc}") from exc
    return default


def _pick(flag, cfg_value):
    return flag if flag is not None else cfg_value


def _admm_params(args, cfg) -> AdmmParams:
    return AdmmParams(
        mu1=_pick(args.mu1, _cfg(cfg, "solver", "mu1", float, 16.0)),
        mu2=_pick(args.mu2, _cfg(cfg, "solver", "mu2", float, 8.0)),
        mu3=_pick(args.mu3, _cfg(cfg, "solver", "mu3", float, 24.0)),
        epsilon=0.0,
        max_iters=_pick(args.iters, _cfg(cfg, "solver", "iters", int, 100)),
        cg_iters=_cfg(cfg, "solver", "cg_iters", int, 10),
        cg_tol=_cfg(cfg, "solver", "cg_tol", float, 1e-6),
    )


def _registration_config(cfg) -> RegistrationConfig:
    return RegistrationConfig(
        step_scale=_cfg(cfg, "registration", "step_scale", float, 1.0),
        smoothing_sigma=_cfg(cfg, "registration", "smoothing_sigma", float, 1.5),
        max_iters=_cfg(cfg, "registration", "max_iters", int, 50),
        force_epsilon=_cfg(cfg, "registration", "force_epsilon", float, 1e-6),
    )


def _joint_params(args, cfg, reg_cfg: RegistrationConfig) -> JointParams:
    return JointParams(
        beta0=_pick(args.beta0, _cfg(cfg, "joint", "beta0", float, 2.0)),
        alpha=_pick(args.alpha, _cfg(cfg, "joint", "alpha", float, 1.09)),
        registration=reg_cfg,
        temporal_transform=_cfg(cfg, "joint", "temporal_transform", str, "dft"),
    )


def _phantom_spec(args, cfg) -> datagen.PhantomSpec:
    profile = _pick(getattr(args, "profile", None), _cfg(cfg, "phantom", "profile", str, "ci"))
    if profile == "ci":
        base = datagen.ci_profile()
    elif profile == "full":
        base = datagen.full_profile()
    else:
        raise UsageError(f"unknown profile {profile!r}")
    dims = {
        "n_x": _cfg(cfg, "phantom", "nx", int, base.n_x),
        "n_y": _cfg(cfg, "phantom", "ny", int, base.n_y),
        "n_t": _cfg(cfg, "phantom", "nt", int, base.n_t),
        "n_coils": _cfg(cfg, "phantom", "coils", int, base.n_coils),
    }
    for name, value in dims.items():
        if value <= 0:
            raise ValueError(f"{name} must be positive")
    if tuple(dims.values()) == (base.n_x, base.n_y, base.n_t, base.n_coils):
        return base
    return datagen.scaled_profile(dims["n_x"], dims["n_y"], dims["n_t"], dims["n_coils"])


def _run_solver(
    name: str,
    y: np.ndarray,
    h: MeasurementOperator,
    params: AdmmParams,
    reg_cfg: RegistrationConfig,
    joint: JointParams,
    motion_field: np.ndarray | None = None,
    initial_prior: str = "tv",
    callback=None,
) -> tuple[np.ndarray, np.ndarray | None]:
    if name in ("dft", "tv"):
        prior = solvers.temporal_prior(name, h.domain_shape)
        return solvers.reconstruct_admm(y, h, prior, params, callback=callback), None
    if name == "motion_tv":
        if motion_field is not None:
            k_op = MotionCompensatedDifference(motion_field, h.domain_shape)
            x = solvers.reconstruct_admm(y, h, k_op, params, callback=callback)
            return x, motion_field
        return solvers.reconstruct_separate(
            y, h, params, reg_cfg, initial_prior=initial_prior, callback=callback
        )
    if name == "joint_motion_tv":
        return solvers.reconstruct_joint(y, h, params, joint, callback=callback)
    raise UsageError(f"unknown solver {name!r}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_phantom(args) -> int:
    cfg = _load_config(args.config)
    spec = _phantom_spec(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    x_true, v_true, roi = datagen.generate_phantom(spec)
    coils = datagen.generate_coils(spec.n_y, spec.n_x, spec.n_coils)
    io.write_sequence(out / "x_true.csq", x_true)
    io.write_motion(out / "v_true.cmv", v_true)
    io.write_coils(out / "coils.csq", coils, spec.n_t)
    io.write_roi_json(out / "roi.json", roi)
    print(f"phantom: wrote {spec.n_x}x{spec.n_y}x{spec.n_t} sequence, {spec.n_coils} coils -> {out}")
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = _load_config(args.config)
    out = Path(args.out)
    x_true = io.read_image_sequence(out / "x_true.csq")
    coils = io.read_coils(out / "coils.csq")
    rate = _pick(args.rate, _cfg(cfg, "mask", "rate", float, 8.0))
    seed = _pick(args.seed, _cfg(cfg, "mask", "seed", int, 0))
    sigma_fraction = _pick(args.sigma_fraction, _cfg(cfg, "mask", "sigma_fraction", float, 0.25))
    noise_sigma = _pick(args.noise_sigma, _cfg(cfg, "noise", "sigma", float, 0.005))

    mask_spec = datagen.MaskSpec(rate=rate, sigma_fraction=sigma_fraction, seed=seed)
    mask = datagen.generate_mask(mask_spec, x_true.shape[1], x_true.shape[0])
    y = datagen.simulate_acquisition(x_true, coils, mask, noise_sigma=noise_sigma, seed=seed + 7919)
    io.write_sequence(out / "y.csq", np.transpose(y, (1, 0, 2, 3)))
    io.write_mask_json(out / "mask.json", mask, seed)
    print(f"sample: R={rate:g}, {mask.lines[0].size} lines/frame, noise sigma={noise_sigma:g} -> {out}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = _load_config(args.config)
    out = Path(args.out)
    y4 = io.read_sequence(out / "y.csq")  # (n_c, n_t, n_y, n_x)
    y = np.transpose(y4, (1, 0, 2, 3))
    coils = io.read_coils(out / "coils.csq")
    mask, _ = io.read_mask_json(out / "mask.json", y.shape[2])
    shape = (y.shape[0], y.shape[2], y.shape[3])
    h = MeasurementOperator(mask, coils, shape)

    solver = _pick(args.solver, _cfg(cfg, "solver", "name", str, "tv"))
    if solver not in SOLVER_NAMES:
        raise UsageError(f"unknown solver {solver!r} (choose from {', '.join(SOLVER_NAMES)})")

    params = _admm_params(args, cfg)
    epsilon = _pick(args.epsilon, _cfg(cfg, "solver", "epsilon", float, None))
    if epsilon is None:
        noise_sigma = _cfg(cfg, "noise", "sigma", float, 0.005)
        epsilon = datagen.suggest_epsilon(y, mask, noise_sigma)
    params.epsilon = float(epsilon)

    reg_cfg = _registration_config(cfg)
    joint = _joint_params(args, cfg, reg_cfg)
    motion_field = io.read_motion(args.motion) if args.motion else None
    initial_prior = _cfg(cfg, "solver", "initial_prior", str, "tv")

    records: list[dict[str, float]] = []
    x_hat, v_hat = _run_solver(
        solver, y, h, params, reg_cfg, joint,
        motion_field=motion_field, initial_prior=initial_prior, callback=records.append,
    )
    io.write_sequence(out / "x_hat.csq", x_hat)
    if v_hat is not None:
        io.write_motion(out / "v_hat.cmv", v_hat)
    io.write_iters_csv(out / "iters.csv", records, joint=solver == "joint_motion_tv")
    print(f"reconstruct: solver={solver}, iters={params.max_iters}, epsilon={params.epsilon:.4g} -> {out}")
    return EXIT_OK


def _parse_pixels(text: str) -> list[tuple[int, int]]:
    pixels = []
    for chunk in text.split(";"):
        y_str, x_str = chunk.split(",")
        pixels.append((int(y_str), int(x_str)))
    return pixels


def cmd_evaluate(args) -> int:
    out = Path(args.out)
    x_hat = io.read_image_sequence(out / "x_hat.csq")
    ref_path = args.reference if args.reference else out / "x_true.csq"
    ref = io.read_image_sequence(ref_path)
    roi = io.read_roi_json(out / "roi.json")

    per_frame, overall = metrics.rmse_roi(x_hat, ref, roi)
    if args.pixels:
        pixels = _parse_pixels(args.pixels)
    else:
        cy, cx = (roi.y0 + roi.y1) // 2, (roi.x0 + roi.x1) // 2
        pixels = [(cy, cx), ((roi.y0 + cy) // 2, (roi.x0 + cx) // 2)]
    traces = metrics.pixel_traces(x_hat, pixels)
    io.write_report_csv(out / "report.csv", per_frame, overall)
    io.write_traces_csv(out / "traces.csv", pixels, traces)
    print(f"evaluate: overall rmse {overall:.6g} -> {out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _load_config(args.config)
    spec = _phantom_spec(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = _pick(args.seed, _cfg(cfg, "mask", "seed", int, 0))
    noise_sigma = _pick(args.noise_sigma, _cfg(cfg, "noise", "sigma", float, 0.005))
    rates = tuple(float(r) for r in args.rates.split(",")) if args.rates else SWEEP_RATES

    x_true, _, roi = datagen.generate_phantom(spec)
    coils = datagen.generate_coils(spec.n_y, spec.n_x, spec.n_coils)
    shape = x_true.shape
    params = _admm_params(args, cfg)
    reg_cfg = _registration_config(cfg)
    joint = _joint_params(args, cfg, reg_cfg)

    acquisitions = {}
    for rate in rates:
        mask = datagen.generate_mask(
            datagen.MaskSpec(rate=rate, seed=seed + int(rate)), spec.n_y, spec.n_t
        )
        y = datagen.simulate_acquisition(
            x_true, coils, mask, noise_sigma=noise_sigma, seed=seed + 7919 + int(rate)
        )
        epsilon = datagen.suggest_epsilon(y, mask, noise_sigma)
        acquisitions[rate] = (mask, y, epsilon)

    def run_cell(cell: tuple[str, float]) -> tuple[tuple[str, float], float]:
        solver, rate = cell
        mask, y, epsilon = acquisitions[rate]
        h = MeasurementOperator(mask, coils, shape)
        cell_params = AdmmParams(
            mu1=params.mu1, mu2=params.mu2, mu3=params.mu3, epsilon=epsilon,
            max_iters=params.max_iters, cg_iters=params.cg_iters, cg_tol=params.cg_tol,
        )
        x_hat, _ = _run_solver(solver, y, h, cell_params, reg_cfg, joint)
        _, overall = metrics.rmse_roi(x_hat, x_true, roi)
        return cell, overall

    cells = [(solver, rate) for solver in SOLVER_NAMES for rate in rates]
    threads = int(os.environ.get("MOTIONCS_THREADS", "1"))
    results: dict[tuple[str, float], float] = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for cell, rmse in pool.map(run_cell, cells):
                results[cell] = rmse
    else:
        for cell in cells:
            key, rmse = run_cell(cell)
            results[key] = rmse

    rows = [(solver, rate, results[(solver, rate)]) for solver, rate in cells]
    io.write_table_csv(out / "table.csv", rows)
    print(f"experiment: {len(rows)} cells -> {out / 'table.csv'}")
    return EXIT_OK


def cmd_export_pgm(args) -> int:
    seq = io.read_sequence(args.input)[0]
    if not (0 <= args.frame < seq.shape[0]):
        raise UsageError(f"frame {args.frame} out of range [0, {seq.shape[0]})")
    mag = np.abs(seq)
    io.write_pgm(args.output, mag[args.frame], float(mag.max()))
    print(f"export-pgm: frame {args.frame} -> {args.output}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="motioncs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=True, help="working directory for pipeline files")

    p = sub.add_parser("phantom", help="write x_true.csq, v_true.cmv, coils.csq, roi.json")
    common(p)
    p.add_argument("--profile", choices=("ci", "full"), default=None)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("sample", help="write y.csq and mask.json")
    common(p)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--sigma-fraction", type=float, default=None)
    p.add_argument("--noise-sigma", type=float, default=None)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("reconstruct", help="write x_hat.csq, v_hat.cmv, iters.csv")
    common(p)
    p.add_argument("--solver", choices=SOLVER_NAMES, default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--mu1", type=float, default=None)
    p.add_argument("--mu2", type=float, default=None)
    p.add_argument("--mu3", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--beta0", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--motion", default=None, help="CMV1 file with a known motion field")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="write report.csv and traces.csv")
    common(p)
    p.add_argument("--reference", default=None)
    p.add_argument("--pixels", default=None, help='pixels as "y,x;y,x"')
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="sweep solvers x rates, write table.csv")
    common(p)
    p.add_argument("--profile", choices=("ci", "full"), default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--mu1", type=float, default=None)
    p.add_argument("--mu2", type=float, default=None)
    p.add_argument("--mu3", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--beta0", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--noise-sigma", type=float, default=None)
    p.add_argument("--rates", default=None, help="comma-separated rates, default 8,10,12,14")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("export-pgm", help="export one frame as 16-bit PGM")
    p.add_argument("input", help="CSQ1 file")
    p.add_argument("frame", type=int)
    p.add_argument("output", help="PGM file")
    p.set_defaults(func=cmd_export_pgm)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"error: solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except io.FileFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
