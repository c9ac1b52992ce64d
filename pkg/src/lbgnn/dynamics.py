"""Ground-truth dynamics of the target and the influencing nodes.

The controller never sees these functions; the simulator integrates them
and the metrics compare the GNN output against the lumped term ``F(R_i)``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._backend import njit
from .graph import Graph

DEBUG = os.environ.get("LBGNN_DEBUG", "") not in ("", "0")

EPS_DIST = 1e-6  # guard on |y_i - y_j|^3, m^3


@dataclass(frozen=True)
class DynamicsFns:
    """Interaction gain ``g(x0, y)`` (1/s), drift ``h(x0)`` (m/s) and
    inter-agent interaction ``f(y_i, neighbor_positions)`` (m/s).

    ``f`` receives the content of ``Q_i``: the node's own position and the
    (|N_i|, n) stack of its neighbors' positions.

    ``jit`` optionally holds numba-compiled ``(g, h, f_all)`` twins used by
    the fused simulation kernel; ``f_all(ys, adjacency) -> (N, n)``.
    """

    g: Callable[[np.ndarray, np.ndarray], float]
    h: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g_bar: float
    h_bar: float
    name: str = "custom"
    jit: Optional[tuple] = None

    def check_bounds(self, x0, ys) -> None:
        hv = np.linalg.norm(self.h(x0))
        if hv > self.h_bar:
            raise AssertionError(f"|h(x0)| = {hv} exceeds h_bar = {self.h_bar}")
        for y in ys:
            gv = abs(self.g(x0, y))
            if gv > self.g_bar:
                raise AssertionError(f"|g(x0, y)| = {gv} exceeds g_bar = {self.g_bar}")


def node_input(x0, ys, g: Graph, i: int) -> np.ndarray:
    """``R_i = [x0; Q_i]``: non-neighbors' blocks of ``Q_i`` are zeroed."""
    mask = g.self_loop_adjacency[i - 1].astype(float)
    return np.concatenate([x0, (ys * mask[:, None]).ravel()])


def node_inputs(x0, ys, g: Graph) -> np.ndarray:
    """Stack of ``R_i`` for all nodes, shape (N, n(N+1))."""
    abar = g.self_loop_adjacency.astype(float)
    n_nodes = ys.shape[0]
    q = abar[:, :, None] * ys[None, :, :]
    return np.concatenate([np.broadcast_to(x0, (n_nodes, x0.shape[0])), q.reshape(n_nodes, -1)], axis=1)


def target_derivative(fns: DynamicsFns, x0, ys) -> np.ndarray:
    out = np.array(fns.h(x0), dtype=float)
    for y in ys:
        out = out + fns.g(x0, y) * (x0 - y)
    return out


def interaction(fns: DynamicsFns, g: Graph, i: int, ys) -> np.ndarray:
    nbrs = [j - 1 for j in g.neighbors(i)]
    return np.asarray(fns.f(ys[i - 1], ys[nbrs]), dtype=float)


def influencer_derivative(fns: DynamicsFns, g: Graph, i: int, ys, u_i) -> np.ndarray:
    return interaction(fns, g, i, ys) + u_i


def true_F(fns: DynamicsFns, k1: float, g: Graph, i: int, x0, ys, e, eta) -> np.ndarray:
    """The unknown lumped dynamics the GNN approximates at node ``i``:
    ``k1 h(x0) - f(Q_i) + sum_{j in N̄_i} k1 g(x0, y_j) (eta_j + (1-k1) e)``."""
    out = k1 * np.asarray(fns.h(x0), dtype=float) - interaction(fns, g, i, ys)
    for j in [i] + g.neighbors(i):
        out = out + k1 * fns.g(x0, ys[j - 1]) * (eta[j - 1] + (1.0 - k1) * e)
    return out


def true_H(fns: DynamicsFns, k1: float, g: Graph, x0, ys, e, eta) -> np.ndarray:
    """Ensemble ``H(R)``: rows are ``F(R_i)``."""
    return np.stack([true_F(fns, k1, g, i, x0, ys, e, eta) for i in range(1, g.node_count + 1)])


# -- the instance used in the replication scenario ---------------------------


@njit
def _paper_g(x0, y):
    s = 0.0
    for c in range(x0.shape[0]):
        d = x0[c] - y[c]
        s += d * d
    return 0.1 * np.exp(-s / 1.0e6)


@njit
def _paper_h(x0):
    out = np.empty(3)
    out[0] = -0.057 * np.cos(x0[0])
    out[1] = 0.03 * np.sin(x0[1])
    out[2] = -0.008 * np.cos(x0[2])
    return out


@njit
def _paper_f_all(ys, adjacency):
    n_nodes, n = ys.shape
    out = np.zeros((n_nodes, n))
    diff = np.empty(n)
    for i in range(n_nodes):
        for j in range(n_nodes):
            if adjacency[i, j] == 0:
                continue
            s = 0.0
            for c in range(n):
                diff[c] = ys[i, c] - ys[j, c]
                s += diff[c] * diff[c]
            den = max(s * np.sqrt(s), EPS_DIST)
            for c in range(n):
                out[i, c] += 50.0 * diff[c] / den
    return out


def _paper_f(y_i, nbrs):
    out = np.zeros_like(y_i, dtype=float)
    for y_j in nbrs:
        d = y_i - y_j
        r = float(np.linalg.norm(d))
        out = out + 50.0 * d / max(r * r * r, EPS_DIST)
    return out


def paper_dynamics() -> DynamicsFns:
    """``g = 0.1 exp(-|x0-y|^2 / 1e6)``, repulsive ``f`` with gain 50 and the
    bounded periodic drift ``h``.

    ``h_bar = 0.065`` rounds up ``sqrt(0.057^2 + 0.03^2 + 0.008^2) = 0.0649``.
    """
    return DynamicsFns(
        g=lambda x0, y: float(_paper_g(np.asarray(x0, float), np.asarray(y, float))),
        h=lambda x0: _paper_h(np.asarray(x0, float)),
        f=_paper_f,
        g_bar=0.1,
        h_bar=0.065,
        name="paper",
        jit=(_paper_g, _paper_h, _paper_f_all),
    )


def zero_dynamics(g_bar: float = 1e-12, h_bar: float = 1e-12) -> DynamicsFns:
    return DynamicsFns(
        g=lambda x0, y: 0.0,
        h=lambda x0: np.zeros_like(np.asarray(x0, float)),
        f=lambda y_i, nbrs: np.zeros_like(np.asarray(y_i, float)),
        g_bar=g_bar,
        h_bar=h_bar,
        name="zero",
    )


_REGISTRY: dict[str, Callable[[], DynamicsFns]] = {
    "paper": paper_dynamics,
    "zero": zero_dynamics,
}


def register_dynamics(name: str, factory: Callable[[], DynamicsFns]) -> None:
    _REGISTRY[name] = factory


def get_dynamics(name: str) -> DynamicsFns:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown dynamics {name!r}; registered: {sorted(_REGISTRY)}") from None
