"""Shared domain types: embeddings, powers, build settings, trees, relations."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import (
    DimensionMismatch,
    DuplicateLabel,
    EmptyInput,
    NonFiniteValue,
    RaggedMatrix,
    ReservedLabel,
    SizeMismatch,
    ZeroVector,
)

ROOT_LABEL = "__ROOT__"

DISTANCE_KINDS = ("euclidean", "cosine")
ORDER_KINDS = ("descending", "random", "ascending")
PARENT_RULES = ("score_argmax", "random_selection")
PROVIDERS = ("zipf", "pca", "degree", "pagerank", "external")

_DISTANCE_ALIASES = {"euclidean": "euclidean", "l2": "euclidean", "cosine": "cosine"}
_ORDER_ALIASES = {
    "descending": "descending", "desc": "descending",
    "random": "random", "rand": "random",
    "ascending": "ascending", "asc": "ascending",
}
_RULE_ALIASES = {
    "score_argmax": "score_argmax", "score": "score_argmax",
    "random_selection": "random_selection", "random": "random_selection",
}


def _lookup(aliases, value, what):
    try:
        return aliases[value]
    except (KeyError, TypeError):
        raise ValueError(f"unknown {what} {value!r}; expected one of {sorted(set(aliases))}") from None


def normalize_distance(kind: str) -> str:
    return _lookup(_DISTANCE_ALIASES, kind, "distance")


def normalize_order(kind: str) -> str:
    return _lookup(_ORDER_ALIASES, kind, "insertion order")


def normalize_parent_rule(kind: str) -> str:
    return _lookup(_RULE_ALIASES, kind, "parent rule")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """Ordered, uniquely labelled rows of a dense embedding matrix.

    Row order carries meaning: for word embeddings it is the frequency rank
    (row 0 is the most frequent entity).
    """

    labels: tuple[str, ...]
    vectors: np.ndarray

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.n

    @cached_property
    def index(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}

    def centroid(self) -> np.ndarray:
        return self.vectors.mean(axis=0)

    def subset(self, rows: Sequence[int]) -> "EmbeddingSet":
        rows = list(rows)
        return EmbeddingSet(
            tuple(self.labels[i] for i in rows),
            _frozen(np.array(self.vectors[rows], dtype=np.float64)),
        )

    def with_vectors(self, vectors: np.ndarray) -> "EmbeddingSet":
        return validate_embedding(list(self.labels), vectors)

    def __repr__(self):
        return f"EmbeddingSet(n={self.n}, d={self.d})"


def validate_embedding(raw_labels: Iterable[str], raw_matrix) -> EmbeddingSet:
    """Check labels and matrix and wrap them in an :class:`EmbeddingSet`.

    Duplicated labels are an error, never silently merged.
    """
    labels = tuple(str(lab) for lab in raw_labels)
    if isinstance(raw_matrix, np.ndarray):
        rows = raw_matrix
    else:
        rows = list(raw_matrix)
        widths = {len(r) for r in rows}
        if len(widths) > 1:
            raise RaggedMatrix(f"rows have differing lengths {sorted(widths)}")
    try:
        matrix = np.array(rows, dtype=np.float64)
    except ValueError as exc:
        raise RaggedMatrix(str(exc)) from None
    if matrix.ndim == 1 and matrix.size == 0:
        matrix = matrix.reshape(0, 0)
    if matrix.ndim != 2:
        raise RaggedMatrix(f"expected a 2-d matrix, got shape {matrix.shape}")
    if matrix.shape[0] == 0 or matrix.shape[1] == 0 or not labels:
        raise EmptyInput("embedding needs at least one row and one column")
    if matrix.shape[0] != len(labels):
        raise SizeMismatch(f"{len(labels)} labels for {matrix.shape[0]} rows")
    seen = set()
    for lab in labels:
        if lab in seen:
            raise DuplicateLabel(f"duplicate label {lab!r}")
        seen.add(lab)
    if ROOT_LABEL in seen:
        raise ReservedLabel(f"{ROOT_LABEL!r} is reserved for the artificial root")
    if not np.isfinite(matrix).all():
        bad = np.argwhere(~np.isfinite(matrix))[0]
        raise NonFiniteValue(f"non-finite value at row {bad[0]} ({labels[bad[0]]!r}), column {bad[1]}")
    return EmbeddingSet(labels, _frozen(matrix))


def distance(u, v, kind: str = "euclidean") -> float:
    """Euclidean distance or cosine distance ``1 - cos(u, v)`` clamped to [0, 2]."""
    kind = normalize_distance(kind)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"{u.shape} vs {v.shape}")
    if kind == "euclidean":
        return float(np.sqrt(np.sum((u - v) ** 2)))
    nu = np.sqrt(u @ u)
    nv = np.sqrt(v @ v)
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine distance is undefined for a zero vector")
    return float(min(2.0, max(0.0, 1.0 - (u @ v) / (nu * nv))))


@dataclass(frozen=True, eq=False)
class PowerAssignment:
    """Per-entity power, floor-rescaled so the smallest value is exactly 1.

    ``raw`` keeps the provider's values before rescaling.
    """

    powers: np.ndarray
    provider: str
    raw: np.ndarray

    @classmethod
    def from_raw(cls, raw, provider: str) -> "PowerAssignment":
        if provider not in PROVIDERS:
            raise ValueError(f"unknown power provider {provider!r}")
        raw = np.array(raw, dtype=np.float64).ravel()
        if raw.size == 0:
            raise EmptyInput("no powers given")
        if not np.isfinite(raw).all():
            raise NonFiniteValue("powers must be finite")
        if (raw < 0).any():
            raise ValueError("powers must be nonnegative")
        positive = raw[raw > 0]
        if positive.size == 0:
            # nothing to scale against: every entity is equally (un)powerful
            powers = np.ones_like(raw)
        else:
            floor = positive.min()
            powers = np.maximum(raw, floor) / floor
            powers[raw == floor] = 1.0
        return cls(_frozen(powers), provider, _frozen(raw))

    def __len__(self) -> int:
        return self.powers.shape[0]

    def check_against(self, embedding: EmbeddingSet) -> None:
        if len(self) != embedding.n:
            raise SizeMismatch(f"{len(self)} powers for {embedding.n} entities")


@dataclass(frozen=True)
class BuildConfig:
    p: float = 0.6
    distance: str = "euclidean"
    order: str = "descending"
    parent_rule: str = "score_argmax"
    seed: int = 0
    accelerated: bool = True
    epsilon_dist: float = 1e-12
    leaf_size: int = 32

    def __post_init__(self):
        object.__setattr__(self, "distance", normalize_distance(self.distance))
        object.__setattr__(self, "order", normalize_order(self.order))
        object.__setattr__(self, "parent_rule", normalize_parent_rule(self.parent_rule))
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not self.epsilon_dist > 0:
            raise ValueError("epsilon_dist must be positive")
        if self.leaf_size < 1:
            raise ValueError("leaf_size must be positive")


@dataclass(frozen=True, eq=False)
class Arborescence:
    """Rooted tree over ``n`` entities plus the artificial root at node 0.

    Node ``i + 1`` is entity ``i``.  ``parent[0] == -1``; the root has
    insertion rank -1 and level 0.  ``edge_length`` of a node whose parent is
    the root is the distance to the root vector; those edges are excluded
    from every metric.
    """

    parent: np.ndarray
    edge_length: np.ndarray
    insertion_rank: np.ndarray
    node_level: np.ndarray
    root_vector: np.ndarray
    labels: tuple[str, ...]
    powers: np.ndarray
    distance: str = "euclidean"
    p: float | None = None

    @property
    def n(self) -> int:
        """Number of real entities (excluding the root)."""
        return self.parent.shape[0] - 1

    @property
    def n_nodes(self) -> int:
        return self.parent.shape[0]

    def node_label(self, node: int) -> str:
        return ROOT_LABEL if node == 0 else self.labels[node - 1]

    @cached_property
    def node_of(self) -> dict[str, int]:
        return {lab: i + 1 for i, lab in enumerate(self.labels)}

    def real_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Child and parent node ids of every edge not touching the root."""
        child = np.flatnonzero(self.parent > 0)
        return child, self.parent[child]

    @cached_property
    def children(self) -> list[list[int]]:
        kids: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for node in np.argsort(self.insertion_rank[1:], kind="stable") + 1:
            kids[self.parent[node]].append(int(node))
        return kids

    def check(self) -> None:
        """Verify rank ordering, acyclicity and levels in one pass."""
        parent, rank, level = self.parent, self.insertion_rank, self.node_level
        if parent[0] != -1 or level[0] != 0:
            raise ValueError("node 0 must be the root")
        real = np.arange(1, self.n_nodes)
        par = parent[1:]
        if ((par < 0) | (par >= self.n_nodes)).any():
            raise ValueError("parent index out of range")
        # strictly decreasing rank along every parent pointer rules out cycles
        if (rank[par] >= rank[real]).any():
            raise ValueError("parent inserted after child")
        if (level[real] != level[par] + 1).any():
            raise ValueError("node level inconsistent with parent")

    def __repr__(self):
        return f"Arborescence(n={self.n}, depth={int(self.node_level.max())})"


@dataclass(frozen=True, eq=False)
class RelationSet:
    """Directed ground-truth pairs ``(child, parent)``."""

    pairs: frozenset
    kind: str = "relation"

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]], kind: str = "relation") -> "RelationSet":
        clean = set()
        for child, par in pairs:
            if child == par:
                continue
            clean.add((str(child), str(par)))
        return cls(frozenset(clean), kind)

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair) -> bool:
        return pair in self.pairs

    def __iter__(self):
        return iter(sorted(self.pairs))

    def symmetric(self) -> "RelationSet":
        return RelationSet.from_pairs(self.pairs | {(b, a) for a, b in self.pairs}, self.kind)

    def restrict(self, labels: Iterable[str]) -> "RelationSet":
        keep = set(labels)
        return RelationSet(frozenset(pr for pr in self.pairs if pr[0] in keep and pr[1] in keep), self.kind)

    def resolve(self, index: Mapping[str, int]) -> tuple[np.ndarray, int]:
        """Map pairs to integer ids; returns ``(m x 2 array, n_dropped)``."""
        out = [(index[a], index[b]) for a, b in sorted(self.pairs) if a in index and b in index]
        arr = np.array(out, dtype=np.int64).reshape(-1, 2)
        return arr, len(self.pairs) - len(out)

    def parents_of(self) -> dict[str, set[str]]:
        up: dict[str, set[str]] = {}
        for child, par in self.pairs:
            up.setdefault(child, set()).add(par)
        return up


@dataclass
class Curve:
    """Bucketed diagnostic: one row per bucket."""

    centers: np.ndarray
    sizes: np.ndarray
    directed_hits: np.ndarray
    undirected_hits: np.ndarray
    smoothing: int | None = None

    @property
    def directed(self) -> np.ndarray:
        return self.directed_hits / self.sizes

    @property
    def undirected(self) -> np.ndarray:
        return self.undirected_hits / self.sizes

    def smoothed(self, which: str = "directed") -> np.ndarray:
        values = getattr(self, which)
        if not self.smoothing or self.smoothing <= 1:
            return values
        from .power import moving_average

        return moving_average(values, self.smoothing)


@dataclass
class EvalReport:
    undirected_acc: float
    directed_acc: float
    reversed_acc: float
    n_edges_scored: int
    synonym_acc: float | None = None
    n_truth_dropped: int = 0
    curves: dict[str, Curve] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "undirected_acc": self.undirected_acc,
            "directed_acc": self.directed_acc,
            "reversed_acc": self.reversed_acc,
            "synonym_acc": self.synonym_acc,
            "n_edges_scored": self.n_edges_scored,
        }
