"""Entity-power providers and the frequency diagnostics built on them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.stats import spearmanr
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import EmbeddingSet, PowerAssignment, RelationSet
from .exceptions import (
    DegenerateSpectrum,
    DimensionMismatch,
    KTooLarge,
    NoResolvableEdges,
    SizeMismatch,
)


def zipf_power(n: int, exponent: float = 1.0) -> PowerAssignment:
    """Frequency estimate ``n / (rank + 1) ** exponent`` for rank-ordered entities."""
    if n < 1:
        raise ValueError("n must be positive")
    ranks = np.arange(n, dtype=np.float64)
    return PowerAssignment.from_raw(n / (ranks + 1.0) ** exponent, "zipf")


@dataclass(frozen=True, eq=False)
class PcaModel:
    mu: np.ndarray
    components: np.ndarray  # (k, d), rows orthonormal
    singular_values: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def d(self) -> int:
        return self.components.shape[1]


def _sign_fix(components: np.ndarray) -> np.ndarray:
    out = components.copy()
    for row in out:
        nz = np.flatnonzero(row)
        if nz.size and row[nz[0]] < 0:
            row *= -1.0
    return out


def fit_pca(E: EmbeddingSet | np.ndarray, k: int = 3) -> PcaModel:
    """Top-``k`` principal directions of the mean-centred embedding.

    Each component's first nonzero coordinate is made positive.
    """
    X = E.vectors if isinstance(E, EmbeddingSet) else np.asarray(E, dtype=np.float64)
    n, d = X.shape
    if not 1 <= k <= min(n, d):
        raise KTooLarge(f"k={k} must lie in [1, min(n, d)={min(n, d)}]")
    mu = X.mean(axis=0)
    centred = X - mu
    _, s, vt = np.linalg.svd(centred, full_matrices=False)
    if s[0] <= 0.0 or not np.any(centred):
        raise DegenerateSpectrum("centred embedding is identically zero")
    comps = _sign_fix(vt[:k])
    return PcaModel(mu, comps, s[:k].copy())


def _check_dim(X: np.ndarray, model: PcaModel) -> None:
    if X.shape[-1] != model.d:
        raise DimensionMismatch(f"vectors have {X.shape[-1]} dims, model has {model.d}")


def pca_power_raw(X: np.ndarray, model: PcaModel) -> np.ndarray:
    """Norm of each (uncentred) row projected onto the model's components."""
    X = np.asarray(X, dtype=np.float64)
    _check_dim(X, model)
    # components are orthonormal, so ||sum_i (v.u_i) u_i|| = ||(v.u_i)_i||
    coef = X @ model.components.T
    return np.sqrt(np.einsum("ij,ij->i", coef, coef))


def pca_power(E: EmbeddingSet | np.ndarray, model: PcaModel) -> PowerAssignment:
    X = E.vectors if isinstance(E, EmbeddingSet) else E
    return PowerAssignment.from_raw(pca_power_raw(X, model), "pca")


def debias_vectors(X: np.ndarray, model: PcaModel) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    _check_dim(X, model)
    U = model.components
    # project the centred row: the result is orthogonal to every component,
    # which the uncentred projection would not guarantee when mu is not
    centred = X - model.mu
    return centred - (centred @ U.T) @ U


def debias_embedding(E: EmbeddingSet, model: PcaModel) -> EmbeddingSet:
    return E.with_vectors(debias_vectors(E.vectors, model))


class PCAPower(TransformerMixin, BaseEstimator):
    """Entity power from the leading principal components.

    ``fit`` learns the mean and the top components, ``transform`` returns
    de-biased rows (mean and components removed), and ``power`` returns the
    norm of each row's projection onto the components.

    :param n_components: number of components to project out.
    :param inclusive: project ``n_components + 1`` components, reading the
        component index range ``0..k`` as inclusive.
    """

    def __init__(self, n_components=3, inclusive=False):
        self.n_components = n_components
        self.inclusive = inclusive

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        k = self.n_components + (1 if self.inclusive else 0)
        self.model_ = fit_pca(X, k)
        self.mean_ = self.model_.mu
        self.components_ = self.model_.components
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        return debias_vectors(X, self.model_)

    def power(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        return pca_power_raw(X, self.model_)

    def power_assignment(self, X) -> PowerAssignment:
        return PowerAssignment.from_raw(self.power(X), "pca")


def _resolved_edges(edges: RelationSet, E: EmbeddingSet) -> np.ndarray:
    ids, _ = edges.resolve(E.index)
    if ids.shape[0] == 0:
        raise NoResolvableEdges(f"none of the {len(edges)} relation pairs name known entities")
    return ids


def degree_power(edges: RelationSet, E: EmbeddingSet) -> PowerAssignment:
    """Undirected vertex degree; isolated entities get the smallest positive degree."""
    ids = _resolved_edges(edges, E)
    und = np.unique(np.sort(ids, axis=1), axis=0)
    deg = np.bincount(und.ravel(), minlength=E.n).astype(np.float64)
    deg[deg == 0] = deg[deg > 0].min()
    return PowerAssignment.from_raw(deg, "degree")


def pagerank_scores(
    edges: RelationSet,
    E: EmbeddingSet,
    damping: float = 0.85,
    iters: int = 100,
    tol: float = 1e-10,
) -> tuple[np.ndarray, list[float]]:
    """PageRank by power iteration, returning ranks and per-iteration L1 residuals."""
    ids = np.unique(_resolved_edges(edges, E), axis=0)
    n = E.n
    src, dst = ids[:, 0], ids[:, 1]
    outdeg = np.bincount(src, minlength=n).astype(np.float64)
    dangling = outdeg == 0
    weight = 1.0 / outdeg[src]
    rank = np.full(n, 1.0 / n)
    residuals = []
    for _ in range(iters):
        flow = np.bincount(dst, weights=rank[src] * weight, minlength=n)
        new = damping * (flow + rank[dangling].sum() / n) + (1.0 - damping) / n
        new /= new.sum()
        res = float(np.abs(new - rank).sum())
        residuals.append(res)
        rank = new
        if res < tol:
            break
    return rank, residuals


def pagerank_power(
    edges: RelationSet,
    E: EmbeddingSet,
    damping: float = 0.85,
    iters: int = 100,
    tol: float = 1e-10,
) -> PowerAssignment:
    rank, _ = pagerank_scores(edges, E, damping, iters, tol)
    return PowerAssignment.from_raw(rank, "pagerank")


def external_power(values: Mapping[str, float], E: EmbeddingSet) -> PowerAssignment:
    missing = [lab for lab in E.labels if lab not in values]
    if missing:
        raise SizeMismatch(f"{len(missing)} entities have no power, e.g. {missing[0]!r}")
    return PowerAssignment.from_raw([values[lab] for lab in E.labels], "external")


def moving_average(values, window: int) -> np.ndarray:
    """Centred moving average over ``[i - window//2, i + window//2]``, clipped at the ends."""
    values = np.asarray(values, dtype=np.float64)
    if window <= 1 or values.size == 0:
        return values.copy()
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(values.size)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half, values.size - 1) + 1
    return (csum[hi] - csum[lo]) / (hi - lo)


@dataclass
class RankCurve:
    ranks: np.ndarray
    values: np.ndarray
    smoothed: np.ndarray
    spearman: float | None = None


def norm_rank_curve(E: EmbeddingSet, window: int = 50) -> RankCurve:
    norms = np.linalg.norm(E.vectors, axis=1)
    return RankCurve(np.arange(E.n), norms, moving_average(norms, window))


def power_rank_curve(P: PowerAssignment, window: int = 50) -> RankCurve:
    powers = np.asarray(P.raw, dtype=np.float64)
    ranks = np.arange(powers.size)
    if powers.size > 1 and np.ptp(powers) > 0:
        rho = float(spearmanr(powers, -ranks).statistic)
    else:
        rho = float("nan")
    return RankCurve(ranks, powers, moving_average(powers, window), rho)


def hypernym_rank_scatter(
    edges: RelationSet, rank_of: Mapping[str, int]
) -> tuple[list[tuple[int, int]], float]:
    """One point per hyponym: (its rank, best rank among its hypernyms).

    Returns the points sorted by hyponym rank and the share lying strictly
    below the diagonal, i.e. whose most frequent hypernym outranks them.
    """
    best: dict[str, int] = {}
    for child, par in edges.pairs:
        if child not in rank_of or par not in rank_of:
            continue
        r = rank_of[par]
        if child not in best or r < best[child]:
            best[child] = r
    points = sorted((rank_of[c], r) for c, r in best.items())
    if not points:
        return [], float("nan")
    below = sum(1 for hypo, hyper in points if hyper < hypo)
    return points, below / len(points)
