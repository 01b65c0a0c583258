"""Connectivity graphs, dynamic topology policies and Metropolis-Hastings weights.

The Metropolis-Hastings (constant edge weight) matrix sets
``w_ij = 1 / (1 + max(deg_i, deg_j))`` on every edge and puts the remainder
on the diagonal. It is symmetric with unit row sums, hence doubly
stochastic, so a consensus update with it preserves the network average.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable

import numpy as np

from .errors import ContractViolation


@dataclass(frozen=True)
class TopologyGraph:
    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        canon = set()
        for e in self.edges:
            i, j = int(e[0]), int(e[1])
            if i == j:
                raise ContractViolation(f"self-loop on node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ContractViolation(f"edge {e} outside 0..{self.n - 1}")
            canon.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(canon))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Iterable[int]]) -> "TopologyGraph":
        return cls(n, frozenset(tuple(e) for e in edges))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=int)
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1
        return a

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def is_connected(self) -> bool:
        seen = {0}
        frontier = [0]
        adj = self.adjacency()
        while frontier:
            v = frontier.pop()
            for u in np.flatnonzero(adj[v]):
                if u not in seen:
                    seen.add(int(u))
                    frontier.append(int(u))
        return len(seen) == self.n


def max_edges(n: int) -> int:
    return n * (n - 1) // 2


def complete_graph(n: int) -> TopologyGraph:
    if n < 2:
        raise ContractViolation("complete graph needs n >= 2")
    return TopologyGraph(n, frozenset(combinations(range(n), 2)))


def random_subgraph(n: int, C: int, rng: np.random.Generator) -> TopologyGraph:
    """Uniformly random ``C``-edge subset of the complete graph on ``n`` nodes."""
    if n < 2:
        raise ContractViolation("need n >= 2")
    if not 1 <= C <= max_edges(n):
        raise ContractViolation(f"edge count C={C} outside [1, {max_edges(n)}]")
    all_edges = list(combinations(range(n), 2))
    pick = rng.choice(len(all_edges), size=C, replace=False)
    return TopologyGraph(n, frozenset(all_edges[k] for k in pick))


def mh_mixing_matrix(g: TopologyGraph) -> np.ndarray:
    """Metropolis-Hastings weight matrix; isolated nodes get w_ii = 1."""
    deg = g.degrees()
    w = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    w[np.diag_indices(g.n)] = 1.0 - w.sum(axis=1)
    return w


def second_largest_eigenvalue_modulus(w: np.ndarray) -> float:
    mods = np.sort(np.abs(np.linalg.eigvalsh(w)))[::-1]
    return float(mods[1]) if mods.size > 1 else 0.0


# Dynamic topology policies: callables iteration -> TopologyGraph.
TopologyPolicy = Callable[[int], TopologyGraph]


def static_policy(graph: TopologyGraph) -> TopologyPolicy:
    return lambda k: graph


def random_c_policy(n: int, C: int, rng: np.random.Generator) -> TopologyPolicy:
    """Fresh uniformly random C-edge graph at every iteration."""
    if not 1 <= C <= max_edges(n):
        raise ContractViolation(f"edge count C={C} outside [1, {max_edges(n)}]")
    if C == max_edges(n):
        full = complete_graph(n)
        return lambda k: full
    return lambda k: random_subgraph(n, C, rng)


def drop_k_policy(n: int, k: int, rng: np.random.Generator) -> TopologyPolicy:
    """Complete graph with ``k`` randomly chosen links dropped each iteration."""
    return random_c_policy(n, max_edges(n) - k, rng)
