"""Arborescence construction by power-ordered insertion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import _kernels as K
from .core import (
    Arborescence,
    BuildConfig,
    EmbeddingSet,
    PowerAssignment,
    normalize_order,
    validate_embedding,
)
from .exceptions import SizeMismatch, ZeroVector
from .nnindex import build_geometry, _unit_rows


@dataclass(frozen=True, eq=False)
class InsertionPlan:
    sequence: np.ndarray
    order_kind: str
    seed: int | None = None


def _seed_streams(seed):
    """Independent generators for the insertion shuffle and random parent choice."""
    order_ss, select_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(order_ss), np.random.default_rng(select_ss)


def make_plan(P: PowerAssignment | np.ndarray, order_kind: str = "descending", seed=0) -> InsertionPlan:
    """Insertion sequence; power ties keep entity index order (reversed for ascending)."""
    order_kind = normalize_order(order_kind)
    powers = np.asarray(P.powers if isinstance(P, PowerAssignment) else P, dtype=np.float64)
    n = powers.shape[0]
    if order_kind == "descending":
        seq = np.lexsort((np.arange(n), -powers))
    elif order_kind == "ascending":
        seq = np.lexsort((np.arange(n), -powers))[::-1].copy()
    else:
        seq = _seed_streams(seed)[0].permutation(n)
    return InsertionPlan(seq.astype(np.int64), order_kind, seed)


def root_power_at_step(inserted_powers, all_powers=None) -> float:
    """Mean power of the inserted entities; before any insertion, the global maximum."""
    inserted = np.asarray(inserted_powers, dtype=np.float64)
    if inserted.size:
        return float(inserted.mean())
    if all_powers is None or len(all_powers) == 0:
        raise ValueError("need the global powers before the first insertion")
    return float(np.max(all_powers))


def score_candidate(q, cand_vector, cand_power: float, p: float, M_d: float, M_p: float,
                    kind: str = "euclidean", eps: float = 1e-12) -> float:
    """Parent score of one candidate, normalised by the given per-term maxima."""
    from .core import distance

    d = distance(q, cand_vector, kind)
    return float(K.score(d, np.log(cand_power), p, M_d, M_p, eps))


def _prepare(E: EmbeddingSet, P: PowerAssignment, cfg: BuildConfig):
    if len(P) != E.n:
        raise SizeMismatch(f"{len(P)} powers for {E.n} entities")
    X = np.ascontiguousarray(E.vectors, dtype=np.float64)
    root = X.mean(axis=0)
    root_norm = float(np.sqrt(root @ root))
    cosine = cfg.distance == "cosine"
    if cosine:
        G, norms = _unit_rows(X)
        if root_norm == 0.0:
            raise ZeroVector("embedding centroid is the zero vector; cosine distance to the root is undefined")
    else:
        G, norms = X, np.sqrt(np.einsum("ij,ij->i", X, X))
    powers = np.ascontiguousarray(P.powers, dtype=np.float64)
    return X, G, norms, root, root_norm, cosine, powers, np.log(powers)


def pairwise_distances(E: EmbeddingSet, distance: str = "euclidean"):
    """Entity-entity and root-entity distances, evaluated exactly as the builder does.

    Returns ``(D, R)`` with ``D[i, j]`` the distance between rows ``i`` and
    ``j`` and ``R[j]`` the distance from the centroid root to row ``j``.
    Memory is quadratic in ``n``; meant for diagnostics and small inputs.
    """
    flat = PowerAssignment.from_raw(np.ones(E.n), "external")
    X, _, norms, root, root_norm, cosine, _, _ = _prepare(E, flat, BuildConfig(distance=distance))
    D = K.dist_matrix(X, norms, X, norms, cosine)
    R = K.dist_matrix(root[None, :], np.array([root_norm]), X, norms, cosine)[0]
    return D, R


def _random_parents(X, norms, order, root, root_norm, cosine, rng):
    n = X.shape[0]
    parent = np.empty(n, dtype=np.int64)
    length = np.empty(n)
    for step, e in enumerate(order):
        # candidate 0 is the root, candidate s + 1 the s-th inserted entity
        pick = int(rng.integers(step + 1))
        if pick == 0:
            parent[e] = -1
            length[e] = K.vec_dist(root, root_norm, X[e], norms[e], cosine)
        else:
            j = order[pick - 1]
            parent[e] = j
            length[e] = K.vec_dist(X[j], norms[j], X[e], norms[e], cosine)
    return parent, length


def _assemble(E, P, cfg, order, ent_parent, ent_length, root) -> Arborescence:
    n = E.n
    parent = np.empty(n + 1, dtype=np.int64)
    parent[0] = -1
    parent[1:] = ent_parent + 1
    rank = np.empty(n + 1, dtype=np.int64)
    rank[0] = -1
    rank[order + 1] = np.arange(n)
    level = np.zeros(n + 1, dtype=np.int64)
    for e in order:
        level[e + 1] = level[parent[e + 1]] + 1
    length = np.zeros(n + 1)
    length[1:] = ent_length
    for a in (parent, rank, level, length, root):
        a.setflags(write=False)
    return Arborescence(parent, length, rank, level, root, E.labels, P.powers,
                        cfg.distance, cfg.p)


def build_arborescence(E: EmbeddingSet, P: PowerAssignment, cfg: BuildConfig | None = None,
                       plan: InsertionPlan | None = None) -> Arborescence:
    cfg = cfg or BuildConfig()
    X, G, norms, root, root_norm, cosine, powers, logpow = _prepare(E, P, cfg)
    if plan is None:
        plan = make_plan(P, cfg.order, cfg.seed)
    order = np.ascontiguousarray(plan.sequence, dtype=np.int64)
    if order.shape[0] != E.n:
        raise SizeMismatch("insertion plan does not cover every entity")
    if cfg.parent_rule == "random_selection":
        ent_parent, ent_length = _random_parents(X, norms, order, root, root_norm, cosine,
                                                 _seed_streams(cfg.seed)[1])
    elif cfg.accelerated:
        geo = build_geometry(G, cfg.leaf_size)
        ent_parent, ent_length = K.build_accelerated(
            X, norms, geo.points, cosine, order, powers, logpow, root, root_norm,
            float(cfg.p), float(cfg.epsilon_dist),
            geo.idx, geo.start, geo.end, geo.left, geo.parent, geo.leaf_of,
            geo.centers, geo.radius)
    else:
        ent_parent, ent_length = K.build_brute(X, norms, cosine, order, powers, logpow,
                                               root, root_norm, float(cfg.p),
                                               float(cfg.epsilon_dist))
    return _assemble(E, P, cfg, order, ent_parent, ent_length, root)


def extract_subtrees(T: Arborescence, cutoff: float = 90.0) -> list[dict]:
    """Split the tree at edges longer than the ``cutoff`` percentile of edge lengths.

    Root edges are always cut.  Returns one cluster per cut edge, as
    ``{"root": node, "members": [nodes...]}`` with members in insertion order.
    """
    if not 0 < cutoff <= 100:
        raise ValueError("cutoff percentile must lie in (0, 100]")
    child, _ = T.real_edges()
    lengths = T.edge_length[child]
    cut = T.parent == 0
    if lengths.size:
        threshold = np.percentile(lengths, cutoff)
        cut[child[lengths > threshold]] = True
    cut[0] = False
    owner = np.full(T.n_nodes, -1, dtype=np.int64)
    clusters: dict[int, list[int]] = {}
    for node in np.argsort(T.insertion_rank, kind="stable"):
        if node == 0:
            continue
        head = node if cut[node] else owner[T.parent[node]]
        owner[node] = head
        clusters.setdefault(int(head), []).append(int(node))
    return [{"root": h, "members": m} for h, m in sorted(clusters.items(),
                                                          key=lambda kv: T.insertion_rank[kv[0]])]


class PowerArborescence(BaseEstimator):
    """Grow a rooted tree over embedding rows, most powerful entities first.

    Each entity attaches to the already-inserted node (or the artificial
    root at the centroid) maximising
    ``p * dist^-2 / max dist^-2 + (1 - p) * log(power) / max log(power)``.

    Parameters
    ----------
    p : float
        Weight on the distance term, in [0, 1].
    distance : {"euclidean", "cosine"}
    order : {"descending", "random", "ascending"}
        Insertion order by power.
    parent_rule : {"score_argmax", "random_selection"}
        ``random_selection`` picks a uniformly random prior node (baseline).
    random_state : int
        Seed for the random order and the random-selection baseline.
    accelerated : bool
        Use the ball-tree search; ``False`` scans every candidate.

    Attributes
    ----------
    tree_ : Arborescence
    parent_ : ndarray of shape (n_samples,)
        Parent entity of each row, ``-1`` for the root.
    edge_length_ : ndarray of shape (n_samples,)
    """

    def __init__(self, p=0.6, distance="euclidean", order="descending",
                 parent_rule="score_argmax", random_state=0, accelerated=True,
                 eps=1e-12, leaf_size=32):
        self.p = p
        self.distance = distance
        self.order = order
        self.parent_rule = parent_rule
        self.random_state = random_state
        self.accelerated = accelerated
        self.eps = eps
        self.leaf_size = leaf_size

    def _config(self) -> BuildConfig:
        return BuildConfig(p=self.p, distance=self.distance, order=self.order,
                           parent_rule=self.parent_rule, seed=self.random_state,
                           accelerated=self.accelerated, epsilon_dist=self.eps,
                           leaf_size=self.leaf_size)

    def fit(self, X, y=None, power=None, labels=None):
        """Build the tree.

        ``X`` is an ``EmbeddingSet`` or an array; ``power`` a
        ``PowerAssignment`` or raw array (defaults to Zipf power of row order,
        i.e. rows are assumed sorted by frequency).
        """
        cfg = self._config()
        if isinstance(X, EmbeddingSet):
            E = X
        else:
            X = check_array(X, dtype=np.float64)
            if labels is None:
                labels = [str(i) for i in range(X.shape[0])]
            E = validate_embedding(labels, X)
        if power is None:
            from .power import zipf_power

            P = zipf_power(E.n)
        elif isinstance(power, PowerAssignment):
            P = power
        else:
            P = PowerAssignment.from_raw(power, "external")
        self.tree_ = build_arborescence(E, P, cfg)
        self.embedding_ = E
        self.power_ = P
        self.parent_ = self.tree_.parent[1:] - 1
        self.edge_length_ = self.tree_.edge_length[1:]
        self.n_features_in_ = E.d
        return self

    def fit_predict(self, X, y=None, power=None, labels=None):
        return self.fit(X, y, power=power, labels=labels).parent_

    def predict(self, X):
        """Parent each new row would attach to in the finished tree (``-1`` = root).

        Every tree node is a candidate, with the root at its final power
        (the mean power of all entities).
        """
        check_is_fitted(self, "tree_")
        X = check_array(X, dtype=np.float64)
        E, T = self.embedding_, self.tree_
        cfg = self._config()
        V = np.ascontiguousarray(E.vectors)
        norms = np.sqrt(np.einsum("ij,ij->i", V, V))
        root = np.ascontiguousarray(T.root_vector)
        root_norm = float(np.sqrt(root @ root))
        cosine = cfg.distance == "cosine"
        powers = np.asarray(self.power_.powers)
        logpow = np.log(powers)
        lroot = np.log(powers.mean())
        mp = max(lroot, logpow.max())
        order = np.argsort(T.insertion_rank[1:], kind="stable").astype(np.int64)
        out = np.empty(X.shape[0], dtype=np.int64)
        for r, q in enumerate(X):
            q = np.ascontiguousarray(q)
            qn = float(np.sqrt(q @ q))
            droot = K.vec_dist(root, root_norm, q, qn, cosine)
            d = np.array([K.vec_dist(V[j], norms[j], q, qn, cosine) for j in order])
            mm = max(min(droot, d.min()), cfg.epsilon_dist)
            md = 1.0 / (mm * mm)
            s = K.score_all(V, norms, q, qn, cosine, order, logpow, cfg.p, md, mp, cfg.epsilon_dist)
            best = K.score(droot, lroot, cfg.p, md, mp, cfg.epsilon_dist)
            j = int(np.argmax(s))
            out[r] = order[j] if s[j] > best else -1
        return out
