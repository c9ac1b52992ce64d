"""Static undirected communication graphs.

Node labels are 1-based at the public boundary (edge lists, neighborhood
queries) and 0-based for every array the graph exposes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected, unweighted graph on nodes ``1..N``.

    ``adjacency`` has a zero diagonal; ``self_loop_adjacency`` is
    ``adjacency + I`` and selects the augmented neighborhoods used by the
    GNN aggregation.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    adjacency: np.ndarray
    _hops: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def self_loop_adjacency(self) -> np.ndarray:
        return self.adjacency + np.eye(self.node_count, dtype=self.adjacency.dtype)

    @property
    def degree(self) -> np.ndarray:
        return np.diag(self.adjacency.sum(axis=1))

    @property
    def laplacian(self) -> np.ndarray:
        return laplacian(self)

    def neighbors(self, i: int) -> list[int]:
        """1-based neighbors of 1-based node ``i`` (ascending)."""
        _check_node(self, i)
        return [int(j) + 1 for j in np.flatnonzero(self.adjacency[i - 1])]

    def hop_matrix(self, k: int, augmented: bool = False) -> np.ndarray:
        """Boolean (N, N) matrix; row ``i`` marks the k-hop set of node ``i+1``."""
        if k < 0:
            raise GraphError(f"hop count must be nonnegative, got {k}")
        if k not in self._hops:
            self._hops[k] = _hop_matrix(self.adjacency, k)
        m = self._hops[k].copy()
        if augmented:
            np.fill_diagonal(m, True)
        return m


def _check_node(g: Graph, i: int) -> None:
    if not 1 <= i <= g.node_count:
        raise GraphError(f"node index {i} outside [1, {g.node_count}]")


def _hop_matrix(adjacency: np.ndarray, k: int) -> np.ndarray:
    n = adjacency.shape[0]
    reach = np.eye(n, dtype=bool)
    frontier = np.eye(n, dtype=bool)
    a = adjacency.astype(bool)
    for _ in range(k):
        frontier = (frontier.astype(np.int64) @ a.astype(np.int64)) > 0
        frontier &= ~reach
        if not frontier.any():
            break
        reach |= frontier
    np.fill_diagonal(reach, False)
    return reach


def build_graph(node_count: int, edges: Iterable[Sequence[int]], cache_depth: int = 4) -> Graph:
    """Build a graph from 1-based index pairs.

    Duplicate and reversed pairs collapse to one edge. Self-loop pairs are
    rejected: the self-loop adjacency adds them explicitly.
    """
    if int(node_count) != node_count or node_count < 1:
        raise GraphError(f"node_count must be a positive integer, got {node_count!r}")
    node_count = int(node_count)
    adjacency = np.zeros((node_count, node_count), dtype=np.int64)
    unique = set()
    for pair in edges:
        if len(pair) != 2:
            raise GraphError(f"edge {pair!r} is not a pair")
        i, j = (int(v) for v in pair)
        for v in (i, j):
            if not 1 <= v <= node_count:
                raise GraphError(f"edge {pair!r}: node index {v} outside [1, {node_count}]")
        if i == j:
            raise GraphError(f"edge {pair!r} is a self-loop")
        unique.add((min(i, j), max(i, j)))
        adjacency[i - 1, j - 1] = 1
        adjacency[j - 1, i - 1] = 1
    adjacency.setflags(write=False)
    g = Graph(node_count, tuple(sorted(unique)), adjacency)
    for k in range(cache_depth + 1):
        g.hop_matrix(k)
    return g


def complete_graph(node_count: int) -> Graph:
    return build_graph(
        node_count,
        [(i, j) for i in range(1, node_count + 1) for j in range(i + 1, node_count + 1)],
    )


def k_hop_neighborhood(g: Graph, i: int, k: int, augmented: bool = False) -> set[int]:
    """Nodes reachable from ``i`` in at most ``k`` edges, excluding ``i``
    unless ``augmented``. All labels 1-based."""
    _check_node(g, i)
    row = g.hop_matrix(k, augmented=augmented)[i - 1]
    return {int(j) + 1 for j in np.flatnonzero(row)}


def is_connected(g: Graph) -> bool:
    seen = {0}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for w in np.flatnonzero(g.adjacency[v]):
            if int(w) not in seen:
                seen.add(int(w))
                queue.append(int(w))
    return len(seen) == g.node_count


def laplacian(g: Graph) -> np.ndarray:
    return (g.degree - g.adjacency).astype(float)


def permute_graph(g: Graph, perm: Sequence[int]) -> Graph:
    """Relabel nodes: old node ``v`` (1-based) becomes ``perm[v-1]``.

    The resulting adjacency is ``P A P^T`` with ``P[perm[v]-1, v-1] = 1``.
    """
    perm = list(perm)
    if sorted(perm) != list(range(1, g.node_count + 1)):
        raise GraphError(f"{perm!r} is not a permutation of 1..{g.node_count}")
    return build_graph(g.node_count, [(perm[i - 1], perm[j - 1]) for i, j in g.edges])


def permutation_matrix(perm: Sequence[int]) -> np.ndarray:
    n = len(perm)
    p = np.zeros((n, n))
    for v, pv in enumerate(perm):
        p[pv - 1, v] = 1.0
    return p
