"""Closed-loop simulation of the target, the influencers and the GNN weights.

The ODE state stacks ``[x0 (n), y_1..y_N (N n), theta_1..theta_N (N p)]``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import adaptation, controller, dynamics, gnn, kernels
from ._backend import BACKEND
from .controller import Gains
from .gnn import GnnConfig
from .graph import Graph, complete_graph, is_connected, laplacian

log = logging.getLogger(__name__)

RNG_FAMILY = "PCG64"


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    graph: Graph
    gnn: GnnConfig
    gains: Gains
    x0: np.ndarray
    y0: np.ndarray
    n: int = 3
    dynamics: str = "paper"
    trajectory: str = "paper"
    weight_low: float = 0.0
    weight_high: float = 0.3
    seed: int = 0
    dt: float = 0.005
    horizon: float = 360.0
    log_every: int = 10
    eps_bar: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).copy())
        object.__setattr__(self, "y0", np.asarray(self.y0, dtype=float).copy())

    @property
    def node_count(self) -> int:
        return self.graph.node_count

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def validate(self) -> None:
        n, N = self.n, self.node_count
        if self.x0.shape != (n,):
            raise ValueError(f"x0 has shape {self.x0.shape}, expected ({n},)")
        if self.y0.shape != (N, n):
            raise ValueError(f"y0 has shape {self.y0.shape}, expected ({N}, {n})")
        if self.gnn.input_dim != n * (N + 1):
            raise ValueError(f"GNN input_dim {self.gnn.input_dim} != n(N+1) = {n * (N + 1)}")
        if self.gnn.output_dim != n:
            raise ValueError(f"GNN output_dim {self.gnn.output_dim} != n = {n}")
        if not is_connected(self.graph):
            raise ValueError("communication graph must be connected")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if self.horizon > 0 and not self.horizon > self.dt:
            raise ValueError("horizon must exceed dt")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")
        if not self.weight_high > self.weight_low:
            raise ValueError("weight_high must exceed weight_low")

    def initial_state(self) -> np.ndarray:
        rng = np.random.Generator(np.random.PCG64(self.seed))
        theta = gnn.init_weights(self.gnn, self.node_count, rng, self.weight_low, self.weight_high)
        return np.concatenate([self.x0, self.y0.ravel(), theta.ravel()])


def paper_scenario(seed: int = 0, dt: float = 0.005, horizon: float = 360.0) -> ScenarioConfig:
    """Four fully connected influencers herding one target in 3-D."""
    n, N = 3, 4
    return ScenarioConfig(
        graph=complete_graph(N),
        gnn=GnnConfig(n * (N + 1), (8, 8), n, "swish", "tanh"),
        gains=Gains(k1=3.5, k2=12.0, k3=0.001, gamma=2.0, theta_bar=10.0,
                    eps1=0.1, lambda4=0.01, eps_proj=0.1),
        x0=[6.0, -4.0, 2.0],
        y0=[[-6.0, -1.0, 8.0], [6.0, 4.0, -2.0], [4.0, -6.0, 1.0], [-4.0, 6.0, -2.0]],
        n=n,
        seed=seed,
        dt=dt,
        horizon=horizon,
    )


@dataclass
class Signals:
    """Closed-loop quantities at one instant (rows are nodes)."""

    t: float
    x0: np.ndarray
    ys: np.ndarray
    theta: np.ndarray
    xd: np.ndarray
    xd_dot: np.ndarray
    e: np.ndarray
    eta: np.ndarray
    phi: np.ndarray
    u: np.ndarray


class ClosedLoop:
    """Precomputed graph operators plus the right-hand side of the flow."""

    def __init__(self, config: ScenarioConfig, fused: Optional[bool] = None):
        config.validate()
        self.config = config
        self.fns = dynamics.get_dynamics(config.dynamics)
        self.traj = controller.get_trajectory(config.trajectory)
        g = config.graph
        depth = config.gnn.depth
        self.n, self.N, self.p = config.n, g.node_count, config.gnn.param_count
        self.abar = np.ascontiguousarray(g.self_loop_adjacency.astype(np.bool_))
        self.adj = np.ascontiguousarray(g.adjacency.astype(np.int64))
        self.hop = np.ascontiguousarray(g.hop_matrix(depth - 1))
        self.reach = np.ascontiguousarray(g.hop_matrix(depth - 1, augmented=True))
        self.lap = laplacian(g)
        self.dims = config.gnn.dims
        self.acts = config.gnn.act_codes
        gains = config.gains
        self.gamma = float(gains.gamma) if gains.gamma_is_scalar else gains.gamma_matrix(self.p)
        self.radius = adaptation.inflated_radius(gains.theta_bar, gains.eps_proj)
        can_fuse = (BACKEND == "numba" and self.fns.jit is not None
                    and self.traj.jit is not None and gains.gamma_is_scalar)
        self.fused = can_fuse if fused is None else (fused and can_fuse)
        if fused and not can_fuse:
            raise ValueError("fused kernel needs numba, jitted dynamics/trajectory and scalar gamma")
        if self.fused:
            self._rhs = kernels.make_closed_loop_rhs(*self.fns.jit, self.traj.jit)
            self._gain_vec = np.array(
                [gains.k1, gains.k2, gains.k3, gains.theta_bar, gains.eps_proj] + [self.gamma] * self.N
            )

    def unpack(self, state):
        n, N = self.n, self.N
        return state[:n], state[n:n + N * n].reshape(N, n), state[n + N * n:].reshape(N, self.p)

    def signals(self, t: float, state: np.ndarray) -> tuple[Signals, np.ndarray]:
        """All intermediate signals plus the weight Jacobians at ``(t, state)``."""
        cfg, gains = self.config, self.config.gains
        x0, ys, theta = self.unpack(state)
        xd, xd_dot = np.asarray(self.traj.xd(t), float), np.asarray(self.traj.xd_dot(t), float)
        e = controller.tracking_error(x0, xd)
        yd = controller.desired_influencer_trajectory(e, xd, gains.k1)
        eta = controller.backstepping_error(yd[None, :], ys)
        kappa = dynamics.node_inputs(x0, ys, cfg.graph)
        phi, agg, pre = kernels.forward(theta, np.ascontiguousarray(kappa), self.abar, self.dims, self.acts)
        jac = kernels.jacobian(theta, self.abar, self.dims, self.acts, agg, pre)
        u = controller.control_inputs(self.hop, eta, phi, jac, theta, xd_dot, gains)
        return Signals(t, x0, ys, theta, xd, xd_dot, e, eta, phi, u), jac

    def derivative_generic(self, t: float, state: np.ndarray) -> np.ndarray:
        cfg, gains, fns = self.config, self.config.gains, self.fns
        s, jac = self.signals(t, state)
        if dynamics.DEBUG:
            fns.check_bounds(s.x0, s.ys)
        f = np.stack([dynamics.interaction(fns, cfg.graph, i, s.ys) for i in range(1, self.N + 1)])
        y_dot = f + s.u
        x0_dot = dynamics.target_derivative(fns, s.x0, s.ys)
        nu = adaptation.raw_updates(self.reach, self.lap, s.eta, jac, s.theta, self.gamma, gains.k3)
        theta_dot = np.stack([
            adaptation.project(s.theta[i], nu[i], self.gamma, gains.theta_bar, gains.eps_proj, strict=False)
            for i in range(self.N)
        ])
        return np.concatenate([x0_dot, y_dot.ravel(), theta_dot.ravel()])

    def derivative(self, t: float, state: np.ndarray) -> np.ndarray:
        if self.fused:
            return self._rhs(float(t), state, self.n, self.N, self.abar, self.adj, self.hop,
                             self.reach, self.dims, self.acts, self._gain_vec)[0]
        return self.derivative_generic(t, state)

    def true_H(self, s: Signals) -> np.ndarray:
        return dynamics.true_H(self.fns, self.config.gains.k1, self.config.graph, s.x0, s.ys, s.e, s.eta)


def derivative(state: np.ndarray, config: ScenarioConfig, t: float = 0.0) -> np.ndarray:
    return ClosedLoop(config).derivative(t, state)


def rk4_step(fun, t: float, state: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of ``state' = fun(t, state)``."""
    k1 = fun(t, state)
    k2 = fun(t + 0.5 * dt, state + (0.5 * dt) * k1)
    k3 = fun(t + 0.5 * dt, state + (0.5 * dt) * k2)
    k4 = fun(t + dt, state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(loop: ClosedLoop, t: float, state: np.ndarray, dt: float) -> tuple[np.ndarray, int, float]:
    """RK4 step of the closed loop followed by the weight-ball clamp.

    Returns the new state, the number of weight vectors clamped and the
    largest weight norm before clamping.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    new = rk4_step(loop.derivative, t, state, dt)
    if not np.all(np.isfinite(new)):
        x0, ys, theta = loop.unpack(state)
        raise DivergenceError(
            f"non-finite state after step from t={t:.6g} s "
            f"(|x0|={np.linalg.norm(x0):.4g}, max|y|={np.abs(ys).max():.4g}, "
            f"max|theta|={np.linalg.norm(theta, axis=1).max():.4g})"
        )
    off = loop.n + loop.N * loop.n
    raw = new[off:].reshape(loop.N, loop.p)
    raw_max = float(np.sqrt(np.einsum("ip,ip->i", raw, raw).max()))
    theta, clamped = adaptation.clamp_to_ball(raw, loop.radius)
    if clamped:
        new = new.copy()
        new[off:] = theta.ravel()
    return new, clamped, raw_max


@dataclass
class TrajectoryLog:
    t: np.ndarray
    x0: np.ndarray
    xd: np.ndarray
    e: np.ndarray
    y: np.ndarray
    u: np.ndarray
    eta: np.ndarray
    theta_norm: np.ndarray
    phi_tilde: np.ndarray

    @property
    def e_norm(self) -> np.ndarray:
        return np.linalg.norm(self.e, axis=-1)

    def csv_header(self) -> list[str]:
        n = self.x0.shape[1]
        cols = ["t"] + [f"x0_{c}" for c in range(1, n + 1)] + [f"xd_{c}" for c in range(1, n + 1)] + ["e_norm"]
        for i in range(1, self.y.shape[1] + 1):
            cols += [f"y{i}_{c}" for c in range(1, n + 1)]
            cols += [f"u{i}_norm", f"eta{i}_norm", f"theta{i}_norm", f"phi_tilde{i}_norm"]
        return cols

    def csv_rows(self):
        u_n = np.linalg.norm(self.u, axis=-1)
        eta_n = np.linalg.norm(self.eta, axis=-1)
        pt_n = np.linalg.norm(self.phi_tilde, axis=-1)
        e_n = self.e_norm
        for s in range(self.t.shape[0]):
            row = [self.t[s], *self.x0[s], *self.xd[s], e_n[s]]
            for i in range(self.y.shape[1]):
                row += [*self.y[s, i], u_n[s, i], eta_n[s, i], self.theta_norm[s, i], pt_n[s, i]]
            yield row

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(self.csv_header()) + "\n")
            for row in self.csv_rows():
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


@dataclass
class Metrics:
    e_rms: float
    u_rms: float
    phi_tilde_rms: float
    defined: bool = True
    max_theta_norm: float = float("nan")
    clamp_events: int = 0
    min_separation: float = float("nan")
    samples: int = 0
    extra: dict = field(default_factory=dict)

    def to_text(self) -> str:
        items = {
            "e_rms_m": self.e_rms,
            "u_rms_mean_m_per_s": self.u_rms,
            "phi_tilde_rms_mean_m_per_s": self.phi_tilde_rms,
            "metrics_defined": self.defined,
            "max_theta_norm": self.max_theta_norm,
            "projection_clamp_events": self.clamp_events,
            "min_influencer_separation_m": self.min_separation,
            "logged_samples": self.samples,
            **self.extra,
        }
        return "".join(f"{k} = {v}\n" for k, v in items.items())


def rms(norms: np.ndarray, axis: int = 0) -> np.ndarray:
    return np.sqrt(np.mean(np.asarray(norms) ** 2, axis=axis))


def compute_metrics(traj: TrajectoryLog) -> Metrics:
    if traj.t.shape[0] == 0:
        nan = float("nan")
        return Metrics(nan, nan, nan, defined=False)
    u_n = np.linalg.norm(traj.u, axis=-1)
    pt_n = np.linalg.norm(traj.phi_tilde, axis=-1)
    return Metrics(
        e_rms=float(rms(traj.e_norm)),
        u_rms=float(np.mean(rms(u_n))),
        phi_tilde_rms=float(np.mean(rms(pt_n))),
        max_theta_norm=float(traj.theta_norm.max()),
        samples=int(traj.t.shape[0]),
    )


def _min_separation(ys: np.ndarray) -> float:
    d = np.linalg.norm(ys[:, None, :] - ys[None, :, :], axis=-1)
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min()) if ys.shape[0] > 1 else float("inf")


def run(config: ScenarioConfig, fused: Optional[bool] = None) -> tuple[TrajectoryLog, Metrics]:
    """Integrate ``[0, horizon]`` with fixed-step RK4, logging every
    ``log_every`` steps (first and last step included)."""
    n, N = config.n, config.node_count
    if config.horizon == 0:
        empty = TrajectoryLog(np.zeros(0), np.zeros((0, n)), np.zeros((0, n)), np.zeros((0, n)),
                              np.zeros((0, N, n)), np.zeros((0, N, n)), np.zeros((0, N, n)),
                              np.zeros((0, N)), np.zeros((0, N, n)))
        return empty, compute_metrics(empty)

    loop = ClosedLoop(config, fused=fused)
    steps, dt, every = config.steps, config.dt, config.log_every
    log_steps = list(range(0, steps + 1, every))
    if log_steps[-1] != steps:
        log_steps.append(steps)
    S = len(log_steps)
    rec = {
        "t": np.zeros(S), "x0": np.zeros((S, n)), "xd": np.zeros((S, n)), "e": np.zeros((S, n)),
        "y": np.zeros((S, N, n)), "u": np.zeros((S, N, n)), "eta": np.zeros((S, N, n)),
        "theta_norm": np.zeros((S, N)), "phi_tilde": np.zeros((S, N, n)),
    }
    state = config.initial_state()
    clamps = 0
    raw_max = 0.0
    step_max = float(np.linalg.norm(loop.unpack(state)[2], axis=1).max())
    min_sep = np.inf
    start = time.perf_counter()
    slot = 0
    for step in range(steps + 1):
        t = step * dt
        if slot < S and step == log_steps[slot]:
            s, _ = loop.signals(t, state)
            rec["t"][slot] = t
            rec["x0"][slot] = s.x0
            rec["xd"][slot] = s.xd
            rec["e"][slot] = s.e
            rec["y"][slot] = s.ys
            rec["u"][slot] = s.u
            rec["eta"][slot] = s.eta
            rec["theta_norm"][slot] = np.linalg.norm(s.theta, axis=1)
            rec["phi_tilde"][slot] = s.phi - loop.true_H(s)
            min_sep = min(min_sep, _min_separation(s.ys))
            slot += 1
        if step == steps:
            break
        state, c, r = step_rk4(loop, t, state, dt)
        raw_max = max(raw_max, r)
        step_max = max(step_max, r if not c else float(np.linalg.norm(loop.unpack(state)[2], axis=1).max()))
        if c:
            clamps += c
            log.debug("weight clamp at t=%.4f s (%d nodes)", t + dt, c)
    traj = TrajectoryLog(**rec)
    metrics = compute_metrics(traj)
    metrics.clamp_events = clamps
    metrics.max_theta_norm = step_max
    metrics.extra["max_theta_norm_before_clamp"] = raw_max
    metrics.min_separation = min_sep
    metrics.extra["integration_wall_s"] = round(time.perf_counter() - start, 3)
    if min_sep ** 3 < dynamics.EPS_DIST:
        log.warning("influencer separation %.3g m reached the interaction singularity guard", min_sep)
        metrics.extra["singularity_guard_triggered"] = True
    return traj, metrics


def with_overrides(config: ScenarioConfig, **kwargs) -> ScenarioConfig:
    return replace(config, **{k: v for k, v in kwargs.items() if v is not None})


def analysis_params(config: ScenarioConfig):
    """Constants of the stability analysis for this scenario."""
    from .analysis import AnalysisParams

    fns = dynamics.get_dynamics(config.dynamics)
    traj = controller.get_trajectory(config.trajectory)
    g = config.gains
    return AnalysisParams(
        g_bar=fns.g_bar, h_bar=fns.h_bar, xd_bar=traj.xd_bar, xd_dot_bar=traj.xd_dot_bar,
        theta_bar=g.theta_bar, N=config.node_count, k1=g.k1, k2=g.k2, k3=g.k3,
        gamma=g.gamma, eps1=g.eps1, lambda4=g.lambda4, eps_bar=config.eps_bar,
    )
