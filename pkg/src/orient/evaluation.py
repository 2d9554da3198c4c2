"""Edge-accuracy metrics, bucketed diagnostics and the p-sweep harness."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .builder import build_arborescence
from .core import (
    Arborescence,
    BuildConfig,
    Curve,
    EmbeddingSet,
    EvalReport,
    PowerAssignment,
    RelationSet,
    normalize_order,
    normalize_parent_rule,
)
from .exceptions import NoScorableEdges


def _edge_hits(T: Arborescence, G: RelationSet):
    child, par = T.real_edges()
    if child.size == 0:
        raise NoScorableEdges("every edge attaches to the artificial root")
    labels = T.labels
    pairs = G.pairs
    directed = np.fromiter(((labels[c - 1], labels[p - 1]) in pairs for c, p in zip(child, par)),
                           dtype=bool, count=child.size)
    reverse = np.fromiter(((labels[p - 1], labels[c - 1]) in pairs for c, p in zip(child, par)),
                          dtype=bool, count=child.size)
    return child, directed, reverse


def edge_accuracy(T: Arborescence, G: RelationSet) -> EvalReport:
    """Directed, reversed and undirected accuracy over edges between real nodes."""
    child, directed, reverse = _edge_hits(T, G)
    m = child.size
    index = dict(zip(T.labels, range(T.n)))
    _, dropped = G.resolve(index)
    return EvalReport(
        undirected_acc=float((directed | reverse).sum() / m),
        directed_acc=float(directed.sum() / m),
        reversed_acc=float(reverse.sum() / m),
        n_edges_scored=int(m),
        n_truth_dropped=dropped,
    )


def synonym_accuracy(T: Arborescence, S: RelationSet) -> float:
    if len(S) == 0:
        return 0.0
    return edge_accuracy(T, S).undirected_acc


def _bucketed(keys: np.ndarray, directed: np.ndarray, undirected: np.ndarray,
              n_buckets: int, smoothing: int | None) -> Curve:
    # equal-count buckets over edges sorted by key (stable on node order)
    order = np.argsort(keys, kind="stable")
    m = order.size
    chunks = [c for c in np.array_split(np.arange(m), min(n_buckets, m)) if c.size]
    centers = np.array([100.0 * (c[0] + c[-1] + 1) / (2 * m) for c in chunks])
    sizes = np.array([c.size for c in chunks])
    dh = np.array([directed[order[c]].sum() for c in chunks])
    uh = np.array([undirected[order[c]].sum() for c in chunks])
    return Curve(centers, sizes, dh, uh, smoothing)


def accuracy_by_edge_length(T: Arborescence, G: RelationSet, n_buckets: int = 100,
                            smoothing: int | None = None) -> Curve:
    """Accuracy per edge-length percentile bucket (short edges first)."""
    child, directed, reverse = _edge_hits(T, G)
    return _bucketed(T.edge_length[child], directed, directed | reverse, n_buckets, smoothing)


def accuracy_by_node_power(T: Arborescence, G: RelationSet, n_buckets: int = 100,
                           smoothing: int | None = None) -> Curve:
    """Accuracy per child-power percentile bucket (weak children first)."""
    child, directed, reverse = _edge_hits(T, G)
    return _bucketed(np.asarray(T.powers)[child - 1], directed, directed | reverse,
                     n_buckets, smoothing)


def accuracy_by_tree_level(T: Arborescence, G: RelationSet) -> Curve:
    """Accuracy grouped by the child's depth; ``centers`` holds the levels."""
    child, directed, reverse = _edge_hits(T, G)
    level = T.node_level[child]
    levels = np.unique(level)
    undirected = directed | reverse
    return Curve(
        centers=levels.astype(np.float64),
        sizes=np.array([(level == lv).sum() for lv in levels]),
        directed_hits=np.array([directed[level == lv].sum() for lv in levels]),
        undirected_hits=np.array([undirected[level == lv].sum() for lv in levels]),
    )


@dataclass
class SweepRow:
    p: float
    order: str
    parent_rule: str
    report: EvalReport
    hit_rate: float | None = None


@dataclass
class SweepResult:
    rows: list[SweepRow]
    best: dict = field(default_factory=dict)  # (order, rule) -> {metric: best value}

    def best_of(self, order: str, metric: str = "directed_acc", parent_rule: str = "score_argmax"):
        return self.best[(normalize_order(order), normalize_parent_rule(parent_rule))][metric]


DEFAULT_P_GRID = tuple(round(0.1 * i, 1) for i in range(11))
_METRICS = ("undirected_acc", "directed_acc", "reversed_acc", "synonym_acc")


def worker_count() -> int:
    """Worker threads from ``ORIENT_THREADS`` (0 or unset: one per CPU)."""
    try:
        n = int(os.environ.get("ORIENT_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def sweep_p(E: EmbeddingSet, P: PowerAssignment, cfg_template: BuildConfig | None,
            p_values: Sequence[float], G: RelationSet,
            orders: Sequence[str] = ("descending", "random", "ascending"),
            parent_rules: Sequence[str] = ("score_argmax",),
            synonyms: RelationSet | None = None,
            lca_inputs: dict | None = None,
            n_jobs: int | None = None) -> SweepResult:
    """Build and score one tree per (p, order, rule) and keep the per-order best.

    The random-selection rule ignores ``p`` and is evaluated once per order.
    ``lca_inputs`` (keys ``pairs``, ``lch_of`` and optionally ``closure``,
    ``hypernyms``) adds a hit-rate column.
    """
    from .lca import lca_hit_rate

    cfg_template = cfg_template or BuildConfig()
    cells = []
    for rule in map(normalize_parent_rule, parent_rules):
        for order in map(normalize_order, orders):
            grid = p_values if rule == "score_argmax" else [cfg_template.p]
            for p in grid:
                cells.append(replace(cfg_template, p=float(p), order=order, parent_rule=rule))

    def run(cfg: BuildConfig) -> SweepRow:
        T = build_arborescence(E, P, cfg)
        report = edge_accuracy(T, G)
        if synonyms is not None:
            report.synonym_acc = synonym_accuracy(T, synonyms)
        hr = None
        if lca_inputs:
            hr = lca_hit_rate(T, lca_inputs["pairs"], lca_inputs["lch_of"],
                              closure=lca_inputs.get("closure", 2),
                              hypernyms=lca_inputs.get("hypernyms")).hit_rate
        return SweepRow(cfg.p, cfg.order, cfg.parent_rule, report, hr)

    jobs = n_jobs or worker_count()
    if jobs > 1 and len(cells) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            rows = list(pool.map(run, cells))
    else:
        rows = [run(c) for c in cells]

    best: dict = {}
    for row in rows:
        slot = best.setdefault((row.order, row.parent_rule), {})
        values = {m: getattr(row.report, m) for m in _METRICS}
        values["hit_rate"] = row.hit_rate
        for metric, value in values.items():
            if value is None:
                continue
            if metric not in slot or value > slot[metric]:
                slot[metric] = value
    return SweepResult(rows, best)
