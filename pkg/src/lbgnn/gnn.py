"""Deep message-passing GNN with per-node weights.

Layer ``j < k`` at node ``i`` sums the augmented neighborhood's previous
embeddings (inputs carry an appended 1), applies ``W_i^(j)^T`` and the
hidden activation, and appends a bias entry of 1. The output layer ``k``
applies ``W_i^(k)^T`` to the node's own last hidden embedding, with no
aggregation, followed by the output activation.

Per-node weight vectors stack ``vec(W^(0)), ..., vec(W^(k))`` where
``vec`` concatenates columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import kernels
from .graph import Graph


@dataclass(frozen=True)
class GnnConfig:
    input_dim: int
    hidden_dims: tuple[int, ...]
    output_dim: int
    hidden_activation: Union[str, tuple[str, ...]] = "swish"
    output_activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        if not self.hidden_dims:
            raise ValueError("at least one hidden layer is required (depth k >= 1)")
        if min((self.input_dim, self.output_dim) + self.hidden_dims) < 1:
            raise ValueError("layer widths must be positive")
        acts = self.hidden_activations
        if len(acts) != self.depth:
            raise ValueError(f"{len(acts)} hidden activations for {self.depth} hidden layers")
        for name in acts:
            if name not in ("swish", "tanh"):
                raise ValueError(f"unknown hidden activation {name!r}")
        if self.output_activation not in ("identity", "tanh"):
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    @property
    def depth(self) -> int:
        return len(self.hidden_dims)

    @property
    def hidden_activations(self) -> tuple[str, ...]:
        if isinstance(self.hidden_activation, str):
            return (self.hidden_activation,) * self.depth
        return tuple(self.hidden_activation)

    @property
    def dims(self) -> np.ndarray:
        return np.array((self.input_dim,) + self.hidden_dims + (self.output_dim,), dtype=np.int64)

    @property
    def act_codes(self) -> np.ndarray:
        names = self.hidden_activations + (self.output_activation,)
        return np.array([kernels.ACTIVATIONS[a] for a in names], dtype=np.int64)

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        d = self.dims
        return [(int(d[j]) + 1, int(d[j + 1])) for j in range(len(d) - 1)]

    @property
    def param_count(self) -> int:
        return sum(r * c for r, c in self.layer_shapes)


@dataclass
class LayerOutputs:
    """Per-layer embeddings; ``embeddings[j]`` is (N, d^(j)+1) for hidden
    layers and (N, d_out) for the output layer."""

    embeddings: list[np.ndarray]
    agg: np.ndarray
    pre: np.ndarray


def vec_weights(weights: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.asarray(w, dtype=float).ravel(order="F") for w in weights])


def unvec_weights(theta: np.ndarray, config: GnnConfig) -> list[np.ndarray]:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (config.param_count,):
        raise ValueError(f"weight vector has shape {theta.shape}, expected ({config.param_count},)")
    out, start = [], 0
    for rows, cols in config.layer_shapes:
        out.append(theta[start:start + rows * cols].reshape((rows, cols), order="F").copy())
        start += rows * cols
    return out


def init_weights(config: GnnConfig, node_count: int, rng: np.random.Generator,
                 low: float = 0.0, high: float = 0.3) -> np.ndarray:
    """Draw every weight i.i.d. uniform on [low, high); rows are nodes."""
    return rng.uniform(low, high, size=(node_count, config.param_count))


def _as_theta(weights, config: GnnConfig, node_count: int) -> np.ndarray:
    if isinstance(weights, np.ndarray) and weights.ndim == 2:
        theta = np.ascontiguousarray(weights, dtype=float)
    else:
        theta = np.stack([w if np.ndim(w) == 1 else vec_weights(w) for w in weights]).astype(float)
    if theta.shape != (node_count, config.param_count):
        raise ValueError(
            f"weights have shape {theta.shape}, expected ({node_count}, {config.param_count})"
        )
    return theta


def _as_inputs(inputs, config: GnnConfig, node_count: int) -> np.ndarray:
    kappa = np.ascontiguousarray(inputs, dtype=float)
    if kappa.shape != (node_count, config.input_dim):
        raise ValueError(f"inputs have shape {kappa.shape}, expected ({node_count}, {config.input_dim})")
    return kappa


def _abar(g: Graph) -> np.ndarray:
    return np.ascontiguousarray(g.self_loop_adjacency.astype(np.bool_))


def forward(g: Graph, config: GnnConfig, weights, inputs) -> tuple[np.ndarray, LayerOutputs]:
    """Outputs ``phi`` (N, d_out) for every node, plus the layer caches."""
    theta = _as_theta(weights, config, g.node_count)
    kappa = _as_inputs(inputs, config, g.node_count)
    phi, agg, pre = kernels.forward(theta, kappa, _abar(g), config.dims, config.act_codes)
    embeddings = []
    acts = config.act_codes
    for j, (_, cols) in enumerate(config.layer_shapes[:-1]):
        act = kernels.act_np(pre[j, :, :cols], acts[j])
        embeddings.append(np.concatenate([act, np.ones((g.node_count, 1))], axis=1))
    embeddings.append(phi)
    return phi, LayerOutputs(embeddings, agg, pre)


def jacobians(g: Graph, config: GnnConfig, weights, inputs) -> tuple[np.ndarray, np.ndarray]:
    """``(phi, J)`` with ``J[i-1, j-1] = d phi_i / d theta_j`` for all node pairs."""
    theta = _as_theta(weights, config, g.node_count)
    kappa = _as_inputs(inputs, config, g.node_count)
    abar = _abar(g)
    phi, agg, pre = kernels.forward(theta, kappa, abar, config.dims, config.act_codes)
    return phi, kernels.jacobian(theta, abar, config.dims, config.act_codes, agg, pre)


def jacobian(g: Graph, config: GnnConfig, weights, inputs, i: int, j: int,
             strict: bool = True) -> np.ndarray:
    """``d phi_i / d theta_j`` as a (d_out, p) matrix; ``i``, ``j`` 1-based.

    Only nodes within ``k-1`` hops of ``i`` (``i`` included) influence
    ``phi_i``. Other ``j`` raise unless ``strict=False``, in which case the
    exact zero matrix is returned.
    """
    reach = g.hop_matrix(config.depth - 1, augmented=True)
    if not reach[i - 1, j - 1]:
        if strict:
            raise ValueError(f"node {j} is outside the {config.depth - 1}-hop neighborhood of node {i}")
        return np.zeros((config.output_dim, config.param_count))
    return jacobians(g, config, weights, inputs)[1][i - 1, j - 1]


def finite_diff_jacobian(g: Graph, config: GnnConfig, weights, inputs, i: int, j: int,
                         step: float = 1e-6) -> np.ndarray:
    """Central-difference estimate of ``d phi_i / d theta_j``."""
    if not step > 0:
        raise ValueError("step must be positive")
    theta = _as_theta(weights, config, g.node_count).copy()
    kappa = _as_inputs(inputs, config, g.node_count)
    abar = _abar(g)
    dims, acts = config.dims, config.act_codes
    out = np.empty((config.output_dim, config.param_count))
    for q in range(config.param_count):
        orig = theta[j - 1, q]
        theta[j - 1, q] = orig + step
        up = kernels.forward(theta, kappa, abar, dims, acts)[0][i - 1]
        theta[j - 1, q] = orig - step
        down = kernels.forward(theta, kappa, abar, dims, acts)[0][i - 1]
        theta[j - 1, q] = orig
        out[:, q] = (up - down) / (2.0 * step)
    return out


def relative_error(analytic: np.ndarray, reference: np.ndarray) -> float:
    """Frobenius-norm relative disagreement; 0 when both are exactly zero."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(reference))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - reference) / scale)
