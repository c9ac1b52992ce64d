"""Command-line entry point.

Exit codes: 0 success, 1 failed validation, 2 usage or config error,
3 divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, gnn, plotting, sim
from ._backend import BACKEND
from .config import ConfigError, config_hash, load_config
from .graph import build_graph

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _seed_range(text: str) -> list[int]:
    try:
        if "-" in text:
            lo, hi = text.split("-", 1)
            seeds = list(range(int(lo), int(hi) + 1))
        else:
            seeds = [int(s) for s in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed range {text!r}; use A-B or a,b,c") from None
    if not seeds:
        raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
    return seeds


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _load(path) -> sim.ScenarioConfig:
    if path is None:
        return sim.paper_scenario()
    if not Path(path).is_file():
        raise CliError(f"config file not found: {path}", EXIT_USAGE)
    try:
        return load_config(path)
    except (ConfigError, OSError) as exc:
        raise CliError(f"cannot parse config {path}: {exc}", EXIT_USAGE) from exc


def _apply_overrides(cfg: sim.ScenarioConfig, args) -> sim.ScenarioConfig:
    cfg = sim.with_overrides(cfg, seed=args.seed, dt=args.dt, horizon=args.horizon)
    try:
        cfg.validate()
    except ValueError as exc:
        raise CliError(f"invalid configuration: {exc}", EXIT_USAGE) from exc
    return cfg


def _run_one(cfg: sim.ScenarioConfig, out: Path, plot: bool) -> sim.Metrics:
    start = time.perf_counter()
    try:
        traj, metrics = sim.run(cfg)
    except sim.DivergenceError as exc:
        raise CliError(f"simulation diverged: {exc}", EXIT_DIVERGED) from exc
    wall = time.perf_counter() - start
    report = analysis.check_gain_conditions(sim.analysis_params(cfg))
    header = (
        f"config_hash = {config_hash(cfg)}\n"
        f"seed = {cfg.seed}\n"
        f"dt = {cfg.dt!r}\n"
        f"horizon = {cfg.horizon!r}\n"
        f"backend = {BACKEND}\n"
        f"wall_time_s = {wall:.3f}\n"
        f"gain_conditions = {report.verdict}\n"
        f"lambda3 = {report.lambda3!r}\n"
    )
    try:
        out.mkdir(parents=True, exist_ok=True)
        traj.write_csv(out / "trajectory.csv")
        (out / "metrics.txt").write_text(header + metrics.to_text())
        if plot and traj.t.shape[0]:
            (out / "trajectory.svg").write_text(plotting.trajectory_svg(traj))
            (out / "tracking_error.svg").write_text(plotting.tracking_error_svg(traj))
    except OSError as exc:
        raise CliError(f"cannot write outputs to {out}: {exc}", EXIT_IO) from exc
    print(f"[seed {cfg.seed}] e_rms={metrics.e_rms:.4f} m  u_rms={metrics.u_rms:.3f} m/s  "
          f"phi_tilde_rms={metrics.phi_tilde_rms:.3f} m/s  ({wall:.1f} s) -> {out}")
    return metrics


def _simulate(cfg: sim.ScenarioConfig, args) -> int:
    out = Path(args.out)
    if args.seeds:
        for s in args.seeds:
            _run_one(sim.with_overrides(cfg, seed=s), out / f"seed_{s}", args.plot)
    else:
        _run_one(cfg, out, args.plot)
    return EXIT_OK


def cmd_run(args) -> int:
    return _simulate(_apply_overrides(_load(args.config), args), args)


def cmd_replicate(args) -> int:
    return _simulate(_apply_overrides(sim.paper_scenario(), args), args)


def cmd_check_gains(args) -> int:
    cfg = _load(args.config)
    params = sim.analysis_params(cfg)
    report = analysis.check_gain_conditions(params)
    print(f"sufficient gain conditions (g_bar={params.g_bar:g}, N={params.N}, eps1={params.eps1:g})")
    print(report.format_table())
    lam1, lam2 = analysis.rayleigh_bounds(params.gamma if np.ndim(params.gamma) == 0
                                          else np.asarray(params.gamma))
    bound = analysis.ultimate_bound(params, lam1, lam2, report.lambda3)
    print(f"lambda1 = {lam1:.6g}, lambda2 = {lam2:.6g}, lambda4 = {params.lambda4:g}")
    print(f"upsilon = {bound.upsilon:.6g} (assumed eps_bar = {params.eps_bar:g}), "
          f"ultimate bound radius = {bound.radius:.6g}" + ("  [vacuous]" if bound.vacuous else ""))
    return EXIT_OK


def validate_gnn(cfg: sim.ScenarioConfig, trials: int, seed: int = 0, step: float = 1e-6):
    """Random analytic-vs-central-difference Jacobian comparisons on the
    scenario's graph and GNN shape; returns the list of relative errors."""
    rng = np.random.default_rng(seed)
    g, shape = cfg.graph, cfg.gnn
    reach = g.hop_matrix(shape.depth - 1, augmented=True)
    errors = []
    for _ in range(trials):
        theta = np.concatenate(
            [rng.normal(0.0, 1.0 / np.sqrt(r), size=(g.node_count, r * c)) for r, c in shape.layer_shapes],
            axis=1,
        )
        inputs = rng.uniform(-1.0, 1.0, size=(g.node_count, shape.input_dim))
        i = int(rng.integers(1, g.node_count + 1))
        j = int(rng.choice(np.flatnonzero(reach[i - 1]))) + 1
        ana = gnn.jacobian(g, shape, theta, inputs, i, j)
        fd = gnn.finite_diff_jacobian(g, shape, theta, inputs, i, j, step)
        errors.append(gnn.relative_error(ana, fd))
    return errors


def cmd_validate_gnn(args) -> int:
    cfg = _load(args.config)
    if args.single_node:
        cfg = sim.with_overrides(cfg, graph=build_graph(1, []),
                                 gnn=gnn.GnnConfig(cfg.n * 2, cfg.gnn.hidden_dims, cfg.n,
                                                   cfg.gnn.hidden_activation, cfg.gnn.output_activation))
    errors = validate_gnn(cfg, args.trials, args.seed or 0)
    worst = max(errors)
    print(f"{len(errors)} trials on N={cfg.graph.node_count}, p={cfg.gnn.param_count}, "
          f"depth={cfg.gnn.depth}: max relative error {worst:.3e}")
    if worst > 1e-4:
        print("FAIL: analytic Jacobian disagrees with finite differences")
        return EXIT_FAIL
    print("PASS")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lbgnn",
        description="Adaptive GNN backstepping control of an indirectly influenced target.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def sim_flags(p):
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, help="override the weight-initialization seed")
        p.add_argument("--seeds", type=_seed_range, help="run a seed range, e.g. 0-9 or 1,4,7")
        p.add_argument("--dt", type=_positive_float, help="override the RK4 step (s)")
        p.add_argument("--horizon", type=float, help="override the simulated duration (s)")
        p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True,
                       help="write trajectory.svg and tracking_error.svg")

    p = sub.add_parser("run", help="simulate a scenario file")
    p.add_argument("config", help="scenario TOML file")
    sim_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replicate", help="simulate the built-in replication scenario")
    sim_flags(p)
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("check-gains", help="report the sufficient gain conditions")
    p.add_argument("config", nargs="?", help="scenario TOML file (default: replication scenario)")
    p.set_defaults(func=cmd_check_gains)

    p = sub.add_parser("validate-gnn", help="check analytic GNN Jacobians against finite differences")
    p.add_argument("config", nargs="?", help="scenario TOML file (default: replication scenario)")
    p.add_argument("--trials", type=_positive_int, default=100, help="number of random comparisons")
    p.add_argument("--seed", type=int, default=0, help="RNG seed for the random instances")
    p.add_argument("--single-node", action="store_true", help="use a 1-node graph of the same shape")
    p.set_defaults(func=cmd_validate_gnn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
