"""Planted-hierarchy generator for experiments without external data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EmbeddingSet, PowerAssignment, RelationSet, validate_embedding
from .power import zipf_power


@dataclass
class PlantedHierarchy:
    embedding: EmbeddingSet
    power: PowerAssignment
    truth: RelationSet
    parent: np.ndarray  # planted parent row of each row, -1 for the top node
    depth: np.ndarray

    def lca(self, a: int, b: int) -> int:
        """Lowest common planted ancestor of rows ``a`` and ``b``."""
        seen = set()
        while a >= 0:
            seen.add(a)
            a = self.parent[a]
        while b not in seen:
            b = self.parent[b]
        return int(b)


def planted_hierarchy(n: int = 1000, branching: int = 3, d: int = 16, sigma: float = 1.0,
                      ratio: float = 0.7, rank_noise: float = 0.05,
                      seed: int | None = 0) -> PlantedHierarchy:
    """Random tree embedded by Gaussian steps whose scale shrinks with depth.

    Node ``i > 0`` attaches to a uniformly chosen earlier node that still has
    fewer than ``branching`` children, and sits at its parent's position plus
    ``N(0, (sigma * ratio**(depth - 1))**2)`` noise per coordinate.  Power
    falls with depth: nodes are ranked by depth, the ranks are jittered by
    Gaussian noise of ``rank_noise * n`` positions, and the result is mapped
    through Zipf's law.  Rows come out sorted by that power (row 0 strongest).
    """
    rng = np.random.default_rng(seed)
    parent = np.full(n, -1, dtype=np.int64)
    depth = np.zeros(n, dtype=np.int64)
    kids = np.zeros(n, dtype=np.int64)
    open_nodes = [0]
    for i in range(1, n):
        slot = int(rng.integers(len(open_nodes)))
        par = open_nodes[slot]
        parent[i] = par
        depth[i] = depth[par] + 1
        kids[par] += 1
        if kids[par] == branching:
            open_nodes[slot] = open_nodes[-1]
            open_nodes.pop()
        open_nodes.append(i)

    X = np.empty((n, d))
    X[0] = rng.normal(0.0, sigma, d)
    for i in range(1, n):
        X[i] = X[parent[i]] + rng.normal(0.0, sigma * ratio ** (depth[i] - 1), d)

    base = np.lexsort((rng.random(n), depth)).argsort().astype(np.float64)
    noisy = base + rng.normal(0.0, rank_noise * n, n)
    by_power = np.argsort(noisy, kind="stable")  # row r holds planted node by_power[r]
    row_of = np.empty(n, dtype=np.int64)
    row_of[by_power] = np.arange(n)

    labels = [f"e{node}" for node in by_power]
    E = validate_embedding(labels, X[by_power])
    new_parent = np.where(parent[by_power] >= 0, row_of[np.maximum(parent[by_power], 0)], -1)
    truth = RelationSet.from_pairs(
        ((f"e{c}", f"e{parent[c]}") for c in range(1, n)), kind="planted")
    return PlantedHierarchy(E, zipf_power(n), truth, new_parent, depth[by_power])
