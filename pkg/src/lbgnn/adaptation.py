"""Distributed weight update law with a smooth projection onto the ball
``|theta| <= theta_bar``.

The projection uses the convex boundary function
``P(theta) = (|theta|^2 - theta_bar^2) / (eps * theta_bar^2)``; the
inflated ball ``P <= 1`` (radius ``theta_bar * sqrt(1 + eps)``) is forward
invariant under the projected flow.
"""

from __future__ import annotations

from typing import Mapping, Union

import numpy as np

from .graph import Graph


class ProjectionError(ValueError):
    """Estimate found outside the inflated ball (integrator overshoot)."""


def inflated_radius(theta_bar: float, eps_proj: float) -> float:
    return theta_bar * np.sqrt(1.0 + eps_proj)


def _apply(gamma, v):
    return gamma * v if np.ndim(gamma) == 0 else np.asarray(gamma) @ v


def raw_update(
    g: Graph,
    depth: int,
    i: int,
    eta_i,
    jacobians: Mapping[int, np.ndarray],
    thetas: Mapping[int, np.ndarray],
    gamma: Union[float, np.ndarray],
    k3: float,
) -> np.ndarray:
    """Unprojected update direction at node ``i`` (1-based):
    ``Gamma_i [(sum_{j in N̄_i^{k-1}} J_ij)^T eta_i - k3 (sum_{j in N_i} (theta_i - theta_j) + theta_i)]``.
    """
    reach = g.hop_matrix(depth - 1, augmented=True)[i - 1]
    theta_i = np.asarray(thetas[i], float)
    jsum = None
    for j0 in np.flatnonzero(reach):
        j = int(j0) + 1
        if j not in jacobians:
            raise KeyError(f"missing Jacobian d phi_{i} / d theta_{j}")
        jsum = jacobians[j] if jsum is None else jsum + jacobians[j]
    eta_i = np.asarray(eta_i, float)
    if jsum.shape != (eta_i.shape[0], theta_i.shape[0]):
        raise ValueError(f"Jacobian shape {jsum.shape} does not match eta/theta dimensions")
    consensus = np.zeros_like(theta_i)
    for j in g.neighbors(i):
        consensus = consensus + (theta_i - np.asarray(thetas[j], float))
    return _apply(gamma, jsum.T @ eta_i - k3 * (consensus + theta_i))


def raw_updates(reach: np.ndarray, lap: np.ndarray, eta, jac, theta, gamma, k3: float) -> np.ndarray:
    """Vectorized ``raw_update`` for all nodes.

    ``reach`` is the augmented (k-1)-hop boolean matrix, ``lap`` the graph
    Laplacian and ``gamma`` a scalar, a (p, p) matrix shared by all nodes or
    an (N, p, p) stack.
    """
    jsum = np.einsum("ij,ijop->iop", reach.astype(float), jac)
    v = np.einsum("iop,io->ip", jsum, eta) - k3 * (lap @ theta + theta)
    if np.ndim(gamma) == 0:
        return gamma * v
    gamma = np.asarray(gamma)
    if gamma.ndim == 2:
        return v @ gamma.T
    return np.einsum("ipq,iq->ip", gamma, v)


def project(theta, nu, gamma, theta_bar: float, eps_proj: float = 0.1, strict: bool = True) -> np.ndarray:
    """Projected derivative.

    ``nu`` passes unchanged in the interior of the ``theta_bar`` ball or when
    it points inward; otherwise the ``Gamma``-weighted radial part is removed
    in proportion ``min(1, P(theta))``. With ``strict`` an estimate outside
    the inflated ball raises ``ProjectionError``.
    """
    theta = np.asarray(theta, float)
    nu = np.asarray(nu, float)
    scale = eps_proj * theta_bar * theta_bar
    pval = (theta @ theta - theta_bar * theta_bar) / scale
    if strict and pval > 1.0 + 1e-9:
        raise ProjectionError(
            f"|theta| = {np.linalg.norm(theta):.6g} exceeds {inflated_radius(theta_bar, eps_proj):.6g}"
        )
    if pval <= 0.0:
        return nu
    grad = 2.0 * theta / scale
    gn = grad @ nu
    if gn <= 0.0:
        return nu
    g_grad = _apply(gamma, grad)
    return nu - min(1.0, pval) * g_grad * (gn / (grad @ g_grad))


def update_law(
    g: Graph,
    depth: int,
    i: int,
    eta_i,
    jacobians,
    thetas,
    gamma,
    k3: float,
    theta_bar: float,
    eps_proj: float = 0.1,
    strict: bool = True,
) -> np.ndarray:
    nu = raw_update(g, depth, i, eta_i, jacobians, thetas, gamma, k3)
    return project(thetas[i], nu, gamma, theta_bar, eps_proj, strict=strict)


def clamp_to_ball(theta: np.ndarray, radius: float) -> tuple[np.ndarray, int]:
    """Radially pull rows of ``theta`` back into the ball; returns the number
    of rows clamped."""
    norms = np.linalg.norm(theta, axis=1)
    over = norms > radius
    if not over.any():
        return theta, 0
    theta = theta.copy()
    theta[over] *= (radius * (1.0 - 1e-12) / norms[over])[:, None]
    return theta, int(over.sum())
