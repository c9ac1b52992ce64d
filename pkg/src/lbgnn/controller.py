"""Tracking and backstepping errors, the virtual command shared by all
influencers, and the per-node backstepping control law."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Union

import numpy as np

from ._backend import njit
from .graph import Graph


@dataclass(frozen=True)
class Gains:
    k1: float = 3.5
    k2: float = 12.0
    k3: float = 0.001
    gamma: Union[float, np.ndarray] = 2.0
    theta_bar: float = 10.0
    eps1: float = 0.1
    lambda4: float = 0.01
    eps_proj: float = 0.1

    def __post_init__(self):
        for name in ("k1", "k2", "k3", "theta_bar", "eps_proj"):
            if not getattr(self, name) > 0:
                raise ValueError(f"gain {name} must be positive, got {getattr(self, name)}")
        gamma = self.gamma
        if np.ndim(gamma) == 0:
            if not float(gamma) > 0:
                raise ValueError("scalar gamma must be positive")
        else:
            gm = np.asarray(gamma, dtype=float)
            if gm.ndim != 2 or gm.shape[0] != gm.shape[1] or not np.allclose(gm, gm.T):
                raise ValueError("gamma must be a symmetric square matrix")
            if np.linalg.eigvalsh(gm).min() <= 0:
                raise ValueError("gamma must be positive definite")

    @property
    def gamma_is_scalar(self) -> bool:
        return np.ndim(self.gamma) == 0

    def gamma_matrix(self, p: int) -> np.ndarray:
        if self.gamma_is_scalar:
            return float(self.gamma) * np.eye(p)
        gm = np.asarray(self.gamma, dtype=float)
        if gm.shape != (p, p):
            raise ValueError(f"gamma has shape {gm.shape}, expected ({p}, {p})")
        return gm


@dataclass(frozen=True)
class DesiredTrajectory:
    """``x_d(t)`` (m) with analytic ``xd_dot(t)`` (m/s) and their norm bounds.

    ``jit`` optionally holds a numba function ``t -> (x_d, xd_dot)``.
    """

    xd: Callable[[float], np.ndarray]
    xd_dot: Callable[[float], np.ndarray]
    xd_bar: float
    xd_dot_bar: float
    name: str = "custom"
    jit: Optional[Callable] = field(default=None, compare=False)


@njit
def _paper_xd(t):
    xd = np.empty(3)
    xd_dot = np.empty(3)
    xd[0] = 10.0 * np.sin(0.01 * t)
    xd[1] = 10.0 * np.sin(0.025 * t) * np.cos(0.025 * t)
    xd[2] = 5.0 * np.sin(0.075 * t)
    xd_dot[0] = 0.1 * np.cos(0.01 * t)
    xd_dot[1] = 0.25 * np.cos(0.05 * t)
    xd_dot[2] = 0.375 * np.cos(0.075 * t)
    return xd, xd_dot


def paper_desired_trajectory() -> DesiredTrajectory:
    """Lissajous-type reference; the middle component uses
    ``10 sin(a) cos(a) = 5 sin(2a)`` for its derivative."""
    return DesiredTrajectory(
        xd=lambda t: _paper_xd(float(t))[0],
        xd_dot=lambda t: _paper_xd(float(t))[1],
        xd_bar=float(np.sqrt(10.0**2 + 5.0**2 + 5.0**2)),
        xd_dot_bar=float(np.sqrt(0.1**2 + 0.25**2 + 0.375**2)),
        name="paper",
        jit=_paper_xd,
    )


@njit
def _zero_xd(t):
    return np.zeros(3), np.zeros(3)


def zero_trajectory() -> DesiredTrajectory:
    return DesiredTrajectory(
        xd=lambda t: np.zeros(3),
        xd_dot=lambda t: np.zeros(3),
        xd_bar=0.0,
        xd_dot_bar=0.0,
        name="zero",
        jit=_zero_xd,
    )


_TRAJECTORIES = {"paper": paper_desired_trajectory, "zero": zero_trajectory}


def register_trajectory(name: str, factory: Callable[[], DesiredTrajectory]) -> None:
    _TRAJECTORIES[name] = factory


def get_trajectory(name: str) -> DesiredTrajectory:
    try:
        return _TRAJECTORIES[name]()
    except KeyError:
        raise KeyError(f"unknown trajectory {name!r}; registered: {sorted(_TRAJECTORIES)}") from None


def tracking_error(x0, xd) -> np.ndarray:
    return np.asarray(x0, float) - np.asarray(xd, float)


def desired_influencer_trajectory(e, xd, k1: float) -> np.ndarray:
    return k1 * np.asarray(e, float) + np.asarray(xd, float)


def backstepping_error(yd_i, y_i) -> np.ndarray:
    return np.asarray(yd_i, float) - np.asarray(y_i, float)


def control_input(
    g: Graph,
    depth: int,
    i: int,
    eta_i,
    phi_i,
    jacobians: Mapping[int, np.ndarray],
    thetas: Mapping[int, np.ndarray],
    xd_dot,
    gains: Gains,
) -> np.ndarray:
    """``u_i = k2 eta_i + phi_i + sum_{j in N_i^{k-1}} dphi_i/dtheta_j (theta_i - theta_j)
    + (1 - k1) xd_dot``.

    ``jacobians`` and ``thetas`` are keyed by 1-based node label and must
    cover every node of the ``(k-1)``-hop neighborhood (``thetas`` also ``i``).
    """
    hop = g.hop_matrix(depth - 1)[i - 1]
    if i not in thetas:
        raise KeyError(f"missing weight vector for node {i}")
    u = gains.k2 * np.asarray(eta_i, float) + np.asarray(phi_i, float)
    for j0 in np.flatnonzero(hop):
        j = int(j0) + 1
        if j not in jacobians:
            raise KeyError(f"missing Jacobian d phi_{i} / d theta_{j}")
        if j not in thetas:
            raise KeyError(f"missing weight vector for node {j}")
        u = u + jacobians[j] @ (thetas[i] - thetas[j])
    return u + (1.0 - gains.k1) * np.asarray(xd_dot, float)


def control_inputs(hop: np.ndarray, eta, phi, jac, theta, xd_dot, gains: Gains) -> np.ndarray:
    """Vectorized control law for all nodes.

    ``hop`` is the boolean (k-1)-hop matrix without self loops and
    ``jac`` the (N, N, d_out, p) Jacobian array.
    """
    diff = theta[:, None, :] - theta[None, :, :]
    corr = np.einsum("ij,ijop,ijp->io", hop.astype(float), jac, diff)
    return gains.k2 * eta + phi + corr + (1.0 - gains.k1) * xd_dot
