"""Static ball tree with per-ball activation counters.

The point set is fixed at construction; entities are switched on one at a
time with :meth:`BallTree.activate`, and every ball tracks how many active
entities it holds and the largest log-power among them.  Those two counters
let a single tree answer "nearest inserted entity" and "best-scoring
inserted entity" queries exactly while the arborescence grows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import EmbeddingSet, PowerAssignment, normalize_distance
from .exceptions import AlreadyActive, DimensionMismatch, KTooLarge, NoActiveEntities, ZeroVector


@dataclass(frozen=True, eq=False)
class Geometry:
    """Ball hierarchy over one set of points.

    Children of node ``j`` are ``left[j]`` and ``left[j] + 1``; leaves have
    ``left == -1``.  Entities of node ``j`` are ``idx[start[j]:end[j]]``.
    """

    points: np.ndarray
    idx: np.ndarray
    start: np.ndarray
    end: np.ndarray
    left: np.ndarray
    parent: np.ndarray
    leaf_of: np.ndarray
    centers: np.ndarray
    radius: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.start.shape[0]

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for j in range(1, self.n_nodes):
            depth[j] = depth[self.parent[j]] + 1
        return int(depth.max())


def build_geometry(points: np.ndarray, leaf_size: int = 32) -> Geometry:
    """Median split along the widest coordinate until leaves hold ``leaf_size`` points."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    idx = np.arange(n, dtype=np.int64)
    start, end, left, parent = [0], [n], [-1], [-1]
    frontier = [0]
    while frontier:
        nxt = []
        for node in frontier:
            s, e = start[node], end[node]
            if e - s <= leaf_size:
                continue
            sub = idx[s:e]
            pts = points[sub]
            dim = int(np.argmax(np.ptp(pts, axis=0)))
            half = (e - s) // 2
            idx[s:e] = sub[np.argpartition(pts[:, dim], half, kind="introselect")]
            mid = s + half
            left[node] = len(start)
            for cs, ce in ((s, mid), (mid, e)):
                start.append(cs)
                end.append(ce)
                left.append(-1)
                parent.append(node)
                nxt.append(len(start) - 1)
        frontier = nxt
    start_a = np.array(start, dtype=np.int64)
    end_a = np.array(end, dtype=np.int64)
    left_a = np.array(left, dtype=np.int64)
    m = start_a.shape[0]
    centers = np.empty((m, points.shape[1]))
    radius = np.empty(m)
    leaf_of = np.empty(n, dtype=np.int64)
    for j in range(m):
        pts = points[idx[start_a[j]:end_a[j]]]
        c = pts.mean(axis=0)
        centers[j] = c
        radius[j] = np.sqrt(((pts - c) ** 2).sum(axis=1)).max()
        if left_a[j] < 0:
            leaf_of[idx[start_a[j]:end_a[j]]] = j
    return Geometry(points, idx, start_a, end_a, left_a, np.array(parent, dtype=np.int64),
                    leaf_of, centers, radius)


def _unit_rows(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.sqrt(np.einsum("ij,ij->i", X, X))
    if (norms == 0).any():
        raise ZeroVector(f"row {int(np.argmin(norms))} is a zero vector; cosine distance undefined")
    return X / norms[:, None], norms


class BallTree:
    """Ball tree over all entities, initially with none of them active.

    Euclidean queries search the raw vectors; cosine queries search a second
    hierarchy over unit-normalised vectors (built on first use), since cosine
    distance is a monotone function of chord length on the unit sphere.
    """

    def __init__(self, X, powers=None, leaf_size: int = 32):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError("need a non-empty 2-d matrix")
        self.X = X
        self.n, self.d = X.shape
        self.leaf_size = leaf_size
        pw = np.ones(self.n) if powers is None else np.asarray(powers, dtype=np.float64)
        if pw.shape != (self.n,):
            raise ValueError("powers must have one entry per row")
        self.powers = pw
        self.logpow = np.log(pw)
        self.norms = np.sqrt(np.einsum("ij,ij->i", X, X))
        self.active = np.zeros(self.n, dtype=np.bool_)
        self.rank = np.full(self.n, np.iinfo(np.int64).max, dtype=np.int64)
        self.n_active = 0
        self._geo = {}
        self._counts = {}
        self._layout = {}
        self._geometry("euclidean")

    def _geometry(self, kind: str) -> Geometry:
        kind = normalize_distance(kind)
        if kind not in self._geo:
            pts = self.X if kind == "euclidean" else _unit_rows(self.X)[0]
            geo = build_geometry(pts, self.leaf_size)
            count = np.zeros(geo.n_nodes, dtype=np.int64)
            maxlp = np.full(geo.n_nodes, -np.inf)
            for ent in np.flatnonzero(self.active)[np.argsort(self.rank[self.active], kind="stable")]:
                K.activate(geo.parent, geo.leaf_of, count, maxlp, ent, self.logpow[ent])
            # leaf scans read position-ordered copies
            self._layout[kind] = (
                np.ascontiguousarray(self.X[geo.idx]), self.norms[geo.idx],
                self.active[geo.idx], self.rank[geo.idx], self.logpow[geo.idx],
                np.argsort(geo.idx),
            )
            self._geo[kind] = geo
            self._counts[kind] = (count, maxlp)
        return self._geo[kind]

    @property
    def geometry(self) -> Geometry:
        return self._geo["euclidean"]

    def active_count(self, kind: str = "euclidean") -> np.ndarray:
        self._geometry(kind)
        return self._counts[normalize_distance(kind)][0]

    def max_active_power(self, kind: str = "euclidean") -> np.ndarray:
        self._geometry(kind)
        return np.exp(self._counts[normalize_distance(kind)][1])

    def activate(self, entity: int) -> None:
        entity = int(entity)
        if not 0 <= entity < self.n:
            raise IndexError(f"entity {entity} out of range")
        if self.active[entity]:
            raise AlreadyActive(f"entity {entity} is already active")
        for kind, geo in self._geo.items():
            count, maxlp = self._counts[kind]
            K.activate(geo.parent, geo.leaf_of, count, maxlp, entity, self.logpow[entity])
            _, _, activep, rankp, _, pos_of = self._layout[kind]
            activep[pos_of[entity]] = True
            rankp[pos_of[entity]] = self.n_active
        self.active[entity] = True
        self.rank[entity] = self.n_active
        self.n_active += 1

    def _query(self, q, kind):
        kind = normalize_distance(kind)
        q = np.ascontiguousarray(q, dtype=np.float64)
        if q.shape != (self.d,):
            raise DimensionMismatch(f"query has shape {q.shape}, expected ({self.d},)")
        qnorm = float(np.sqrt(q @ q))
        cosine = kind == "cosine"
        if cosine:
            if qnorm == 0.0:
                raise ZeroVector("cosine query is a zero vector")
            g = q / qnorm
        else:
            g = q
        geo = self._geometry(kind)
        stack = np.empty(geo.n_nodes + 2, dtype=np.int64)
        stack_f = np.empty(geo.n_nodes + 2)
        return kind, q, qnorm, g, cosine, geo, stack, stack_f

    def nearest_active(self, q, kind: str = "euclidean") -> tuple[int, float]:
        if self.n_active == 0:
            raise NoActiveEntities("no entity has been activated")
        kind, q, qnorm, g, cosine, geo, stack, stack_f = self._query(q, kind)
        count, _ = self._counts[kind]
        Xp, normsp, activep, _, _, _ = self._layout[kind]
        i, d = K.nearest_active(Xp, normsp, q, qnorm, g, cosine,
                                geo.idx, geo.start, geo.end, geo.left, geo.centers, geo.radius,
                                count, activep, stack, stack_f)
        return int(i), float(d)

    def best_scoring_active(self, q, p: float, M_d: float, M_p: float,
                            kind: str = "euclidean", eps: float = 1e-12) -> tuple[int, float]:
        """Active entity maximising the normalised distance/power score."""
        if self.n_active == 0:
            raise NoActiveEntities("no entity has been activated")
        kind, q, qnorm, g, cosine, geo, stack, stack_f = self._query(q, kind)
        count, maxlp = self._counts[kind]
        Xp, normsp, activep, rankp, logpowp, _ = self._layout[kind]
        i, s = K.best_scoring_active(
            Xp, normsp, q, qnorm, g, cosine,
            geo.idx, geo.start, geo.end, geo.left, geo.centers, geo.radius,
            count, maxlp, activep, rankp, logpowp,
            float(p), float(M_d), float(M_p), float(eps),
            -np.inf, np.iinfo(np.int64).max, np.iinfo(np.int64).max, stack, stack_f)
        return int(i), float(s)

    def knn(self, q, k: int, kind: str = "euclidean", exclude: int | None = None):
        """The ``k`` nearest entities, active or not, as ``(indices, distances)``."""
        limit = self.n - (1 if exclude is not None else 0)
        if not 1 <= k <= limit:
            raise KTooLarge(f"k={k} must lie in [1, {limit}]")
        kind, q, qnorm, g, cosine, geo, stack, stack_f = self._query(q, kind)
        ex = -1 if exclude is None else int(exclude)
        Xp, normsp = self._layout[kind][:2]
        i, d = K.knn(Xp, normsp, q, qnorm, g, cosine, int(k), ex,
                     geo.idx, geo.start, geo.end, geo.left, geo.centers, geo.radius,
                     stack, stack_f)
        return i, d


def build_index(E: EmbeddingSet | np.ndarray, P: PowerAssignment | None = None,
                leaf_size: int = 32) -> BallTree:
    X = E.vectors if isinstance(E, EmbeddingSet) else E
    powers = None if P is None else P.powers
    return BallTree(X, powers, leaf_size)
