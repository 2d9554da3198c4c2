"""Constant-time lowest common ancestors and the LCA hit-rate evaluation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import Arborescence, EmbeddingSet, RelationSet
from .exceptions import KTooLarge, NoScorablePairs, UnknownNode


@dataclass(frozen=True, eq=False)
class LcaIndex:
    euler_tour: np.ndarray
    first_occurrence: np.ndarray
    depth: np.ndarray  # depth of each tour entry
    sparse_table: np.ndarray  # level j holds argmin positions over windows of 2**j
    log2: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.first_occurrence.shape[0]


def _euler_tour(parent: np.ndarray, level: np.ndarray, children) -> np.ndarray:
    """Iterative DFS from node 0, recording a node on entry and after each child returns."""
    tour = np.empty(2 * parent.shape[0] - 1, dtype=np.int64)
    pos = 0
    stack = [(0, 0)]
    while stack:
        node, k = stack.pop()
        tour[pos] = node
        pos += 1
        kids = children[node]
        if k < len(kids):
            stack.append((node, k + 1))
            stack.append((kids[k], 0))
    return tour[:pos]


def preprocess(T: Arborescence) -> LcaIndex:
    """Euler tour plus a sparse table for O(1) range-minimum queries (O(n log n) build)."""
    tour = _euler_tour(T.parent, T.node_level, T.children)
    depth = T.node_level[tour]
    m = tour.shape[0]
    first = np.full(T.n_nodes, -1, dtype=np.int64)
    # reversed assignment leaves the earliest position for repeated nodes
    first[tour[::-1]] = np.arange(m - 1, -1, -1)
    levels = [np.arange(m, dtype=np.int64)]
    span = 1
    while 2 * span <= m:
        prev = levels[-1]
        a, b = prev[: m - 2 * span + 1], prev[span: m - span + 1]
        levels.append(np.where(depth[a] <= depth[b], a, b))
        span *= 2
    table = np.zeros((len(levels), m), dtype=np.int64)
    for j, row in enumerate(levels):
        table[j, : row.shape[0]] = row
    log2 = np.zeros(m + 1, dtype=np.int64)
    log2[2:] = np.floor(np.log2(np.arange(2, m + 1))).astype(np.int64)
    return LcaIndex(tour, first, depth, table, log2)


def _check(I: LcaIndex, node) -> None:
    if not 0 <= node < I.n_nodes:
        raise UnknownNode(f"node {node} is not in the tree")


def lca(I: LcaIndex, u: int, v: int) -> int:
    _check(I, u)
    _check(I, v)
    lo, hi = I.first_occurrence[u], I.first_occurrence[v]
    if lo > hi:
        lo, hi = hi, lo
    j = I.log2[hi - lo + 1]
    a = I.sparse_table[j, lo]
    b = I.sparse_table[j, hi - (1 << j) + 1]
    return int(I.euler_tour[a] if I.depth[a] <= I.depth[b] else I.euler_tour[b])


def lca_many(I: LcaIndex, u, v) -> np.ndarray:
    """Vectorised :func:`lca` over aligned node arrays."""
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    if u.size and (min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= I.n_nodes):
        raise UnknownNode("node id out of range")
    fu, fv = I.first_occurrence[u], I.first_occurrence[v]
    lo, hi = np.minimum(fu, fv), np.maximum(fu, fv)
    j = I.log2[hi - lo + 1]
    a = I.sparse_table[j, lo]
    b = I.sparse_table[j, hi - (1 << j) + 1]
    return np.where(I.depth[a] <= I.depth[b], I.euler_tour[a], I.euler_tour[b])


def lca_closure(I: LcaIndex, T: Arborescence, u: int, v: int, c: int = 2) -> set[int]:
    """The LCA of ``u`` and ``v`` and its ancestors up to ``c`` edges above, minus the root."""
    if c < 0:
        raise ValueError("closure radius must be nonnegative")
    node = lca(I, u, v)
    out = set()
    for _ in range(c + 1):
        if node <= 0:
            break
        out.add(node)
        node = int(T.parent[node])
    return out


def sample_pairs(E: EmbeddingSet, idx, n_pairs: int, k: int = 20, seed=0,
                 kind: str = "euclidean") -> list[tuple[int, int]]:
    """Random entity ``w1`` paired with a uniform pick among its ``k`` nearest neighbours.

    Sampling is with replacement; ``idx`` is a :class:`~orient.nnindex.BallTree`.
    """
    if E.n < k + 1:
        raise KTooLarge(f"need more than k={k} entities, have {E.n}")
    rng = np.random.default_rng(seed)
    first = rng.integers(E.n, size=n_pairs)
    picks = rng.integers(k, size=n_pairs)
    cache: dict[int, np.ndarray] = {}
    out = []
    for w1, j in zip(first.tolist(), picks.tolist()):
        if w1 not in cache:
            cache[w1] = idx.knn(E.vectors[w1], k, kind, exclude=w1)[0]
        out.append((w1, int(cache[w1][j])))
    return out


def lch_closure(G: RelationSet, base: Iterable[str], c: int = 2) -> set[str]:
    """``base`` plus everything reachable by at most ``c`` child-to-parent hops in ``G``."""
    up = G.parents_of()
    seen = set(base)
    frontier = set(seen)
    for _ in range(c):
        frontier = {par for node in frontier for par in up.get(node, ())} - seen
        if not frontier:
            break
        seen |= frontier
    return seen


def hit_rate(lca_sets: Sequence[set], lch_sets: Sequence[set]) -> float:
    """Share of scorable pairs whose tree-side set meets the ground-truth set.

    Pairs with an empty ground-truth set are left out of both counts.
    """
    if len(lca_sets) != len(lch_sets):
        raise ValueError("lca_sets and lch_sets must be aligned")
    scorable = hits = 0
    for tree_side, truth in zip(lca_sets, lch_sets):
        if not truth:
            continue
        scorable += 1
        if not truth.isdisjoint(tree_side):
            hits += 1
    if scorable == 0:
        raise NoScorablePairs("every pair has an empty ground-truth set")
    return hits / scorable


@dataclass
class HitRateResult:
    hit_rate: float
    n_pairs: int
    n_scorable: int
    pairs: list[tuple[int, int]]


def lca_hit_rate(T: Arborescence, pairs: Sequence[tuple[int, int]],
                 lch_of: Mapping[tuple[str, str], set] | callable,
                 closure: int = 2, hypernyms: RelationSet | None = None,
                 index: LcaIndex | None = None) -> HitRateResult:
    """Hit-rate of tree LCAs against ground-truth lowest common hypernyms.

    ``pairs`` hold entity indices.  ``lch_of`` maps an unordered label pair
    to its ground-truth set (a mapping looked up in both orders, or a
    callable).  With ``hypernyms`` given, the ground-truth side is widened by
    ``closure`` hypernym hops as well.
    """
    I = index or preprocess(T)
    lca_sets, lch_sets = [], []
    for w1, w2 in pairs:
        nodes = lca_closure(I, T, w1 + 1, w2 + 1, closure)
        lca_sets.append({T.labels[x - 1] for x in nodes})
        a, b = T.labels[w1], T.labels[w2]
        if callable(lch_of):
            truth = set(lch_of(a, b))
        else:
            truth = set(lch_of.get((a, b), lch_of.get((b, a), ())))
        if truth and hypernyms is not None:
            truth = lch_closure(hypernyms, truth, closure)
        lch_sets.append(truth)
    n_scorable = sum(1 for s in lch_sets if s)
    return HitRateResult(hit_rate(lca_sets, lch_sets), len(pairs), n_scorable, list(pairs))
