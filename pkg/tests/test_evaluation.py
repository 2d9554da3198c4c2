import numpy as np
import pytest

from orient import build_arborescence, zipf_power
from orient.core import BuildConfig, RelationSet, validate_embedding
from orient.evaluation import (
    DEFAULT_P_GRID,
    accuracy_by_edge_length,
    accuracy_by_node_power,
    accuracy_by_tree_level,
    edge_accuracy,
    sweep_p,
    synonym_accuracy,
    worker_count,
)
from orient.exceptions import NoScorableEdges
from orient.synthetic import planted_hierarchy

from conftest import make_tree


def hand_tree():
    return make_tree({"a": None, "b": "a", "c": "a", "d": "c"},
                     {"b": 1.0, "c": 2.0, "d": 3.0}, {"a": 4, "b": 3, "c": 2, "d": 1})


def test_hand_instance():
    G = RelationSet.from_pairs([("b", "a"), ("c", "d")])
    r = edge_accuracy(hand_tree(), G)
    assert r.n_edges_scored == 3
    assert (r.directed_acc, r.reversed_acc, r.undirected_acc) == pytest.approx((1 / 3, 1 / 3, 2 / 3))


def test_exact_and_reversed_truth():
    T = hand_tree()
    exact = RelationSet.from_pairs([("b", "a"), ("c", "a"), ("d", "c")])
    r = edge_accuracy(T, exact)
    assert (r.directed_acc, r.undirected_acc, r.reversed_acc) == (1.0, 1.0, 0.0)
    r = edge_accuracy(T, RelationSet.from_pairs([(p, c) for c, p in exact.pairs]))
    assert (r.directed_acc, r.reversed_acc, r.undirected_acc) == (0.0, 1.0, 1.0)


def test_symmetric_truth_counts_both_directions():
    T = hand_tree()
    G = RelationSet.from_pairs([("b", "a"), ("a", "b")])
    r = edge_accuracy(T, G)
    assert r.directed_acc + r.reversed_acc > r.undirected_acc


def test_root_edges_are_excluded():
    T = make_tree({"a": None, "b": None})
    with pytest.raises(NoScorableEdges):
        edge_accuracy(T, RelationSet.from_pairs([("a", "b")]))


def test_truth_dropped_count():
    G = RelationSet.from_pairs([("b", "a"), ("zz", "a")])
    assert edge_accuracy(hand_tree(), G).n_truth_dropped == 1


def test_synonym_accuracy():
    T = make_tree({"a": None, "b": "a", "c": "a", "d": "c", "e": "d"})
    assert synonym_accuracy(T, RelationSet.from_pairs([])) == 0.0
    every = RelationSet.from_pairs([("b", "a"), ("a", "c"), ("c", "d"), ("e", "d")], "synonym")
    assert synonym_accuracy(T, every) == 1.0
    # 4 edges, synonym pairs cover b-a and d-c only
    mixed = RelationSet.from_pairs([("a", "b"), ("c", "d"), ("a", "e")], "synonym")
    assert synonym_accuracy(T, mixed) == 0.5


def random_scored_tree(rng, n=300):
    H = planted_hierarchy(n=n, seed=int(rng.integers(1000)))
    T = build_arborescence(H.embedding, H.power, BuildConfig(p=0.6))
    return T, H.truth


def test_curve_flat_and_split():
    T = make_tree({"a": None, "b": "a", "c": "a", "d": "a", "e": "a"},
                  {"b": 1.0, "c": 2.0, "d": 3.0, "e": 4.0},
                  {"a": 5, "b": 4, "c": 3, "d": 2, "e": 1})
    good = RelationSet.from_pairs([(x, "a") for x in "bcde"])
    np.testing.assert_array_equal(accuracy_by_edge_length(T, good, 4).directed, 1.0)
    np.testing.assert_array_equal(accuracy_by_node_power(T, good, 4).directed, 1.0)
    short = RelationSet.from_pairs([("b", "a"), ("c", "a")])
    assert accuracy_by_edge_length(T, short, 2).directed.tolist() == [1.0, 0.0]
    # weakest children (d, e) come first
    assert accuracy_by_node_power(T, short, 2).directed.tolist() == [0.0, 1.0]


def test_tree_level_curve():
    T = make_tree({"a": None, "b": "a", "c": "a"})
    curve = accuracy_by_tree_level(T, RelationSet.from_pairs([("b", "a"), ("c", "a")]))
    assert curve.centers.tolist() == [2.0] and curve.directed.tolist() == [1.0]


def _recount(keys, T, G, n_buckets):
    child, par = T.real_edges()
    hits = np.array([(T.labels[c - 1], T.labels[p - 1]) in G.pairs for c, p in zip(child, par)])
    order = np.argsort(keys, kind="stable")
    return [int(hits[b].sum()) for b in np.array_split(order, n_buckets)]


def test_curves_match_recount_and_reaggregate(rng):
    T, G = random_scored_tree(rng)
    report = edge_accuracy(T, G)
    child, _ = T.real_edges()
    for fn, keys in ((accuracy_by_edge_length, T.edge_length[child]),
                     (accuracy_by_node_power, T.powers[child - 1])):
        for nb in (1, 7, 100):
            curve = fn(T, G, nb)
            assert curve.directed_hits.tolist() == _recount(keys, T, G, nb)
            assert curve.sizes.sum() == report.n_edges_scored
            assert curve.directed_hits.sum() / curve.sizes.sum() == report.directed_acc
            assert curve.undirected_hits.sum() / curve.sizes.sum() == report.undirected_acc
    lv = accuracy_by_tree_level(T, G)
    assert lv.directed_hits.sum() / lv.sizes.sum() == report.directed_acc
    levels = T.node_level[child]
    for center, size in zip(lv.centers, lv.sizes):
        assert size == (levels == center).sum()


def test_curve_smoothing(rng):
    T, G = random_scored_tree(rng)
    curve = accuracy_by_edge_length(T, G, 50, smoothing=5)
    assert curve.smoothed().shape == (50,)
    assert accuracy_by_edge_length(T, G, 50).smoothed().tolist() == curve.directed.tolist()


def test_identities_on_asymmetric_truth(rng):
    T, G = random_scored_tree(rng)
    r = edge_accuracy(T, G)
    assert 0 <= r.directed_acc <= r.undirected_acc <= 1
    assert r.reversed_acc <= r.undirected_acc
    assert r.directed_acc + r.reversed_acc == pytest.approx(r.undirected_acc)


def test_sweep_single_row_is_composition(rng):
    H = planted_hierarchy(n=200, seed=5)
    res = sweep_p(H.embedding, H.power, None, [1.0], H.truth, orders=["descending"])
    assert len(res.rows) == 1
    direct = edge_accuracy(build_arborescence(H.embedding, H.power, BuildConfig(p=1.0)), H.truth)
    assert res.rows[0].report.as_dict() == direct.as_dict()


def test_sweep_best_semantics():
    H = planted_hierarchy(n=200, seed=6)
    res = sweep_p(H.embedding, H.power, None, DEFAULT_P_GRID, H.truth,
                  parent_rules=["score", "random"], n_jobs=2)
    assert len(res.rows) == 3 * 11 + 3
    for row in res.rows:
        best = res.best[(row.order, row.parent_rule)]
        assert best["directed_acc"] >= row.report.directed_acc
        assert best["undirected_acc"] >= row.report.undirected_acc
    assert res.best_of("desc") == max(r.report.directed_acc for r in res.rows
                                      if r.order == "descending" and r.parent_rule == "score_argmax")
    assert res.best_of("desc") > res.best_of("asc")


def test_sweep_parallel_equals_serial():
    H = planted_hierarchy(n=150, seed=8)
    a = sweep_p(H.embedding, H.power, None, [0.2, 0.6], H.truth, n_jobs=1)
    b = sweep_p(H.embedding, H.power, None, [0.2, 0.6], H.truth, n_jobs=3)
    assert [r.report.as_dict() for r in a.rows] == [r.report.as_dict() for r in b.rows]


def test_sweep_with_synonyms_and_hit_rate():
    from orient.lca import sample_pairs
    from orient.nnindex import BallTree

    H = planted_hierarchy(n=150, seed=9)
    labels = H.embedding.labels
    pairs = sample_pairs(H.embedding, BallTree(H.embedding.vectors), 100, k=10, seed=0)
    lch = {(labels[a], labels[b]): {labels[H.lca(a, b)]} for a, b in pairs}
    res = sweep_p(H.embedding, H.power, None, [0.6], H.truth, orders=["desc"],
                  synonyms=H.truth.symmetric(), lca_inputs={"pairs": pairs, "lch_of": lch})
    row = res.rows[0]
    assert row.report.synonym_acc == row.report.undirected_acc
    assert 0.0 <= row.hit_rate <= 1.0


def test_worker_count(monkeypatch):
    monkeypatch.setenv("ORIENT_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("ORIENT_THREADS", "0")
    assert worker_count() >= 1


def test_random_selection_near_chance():
    n = 2000
    rng = np.random.default_rng(0)
    E = validate_embedding([str(i) for i in range(n)], rng.normal(size=(n, 4)))
    labels = E.labels
    # uniform random ordered pairs: any one tree edge is in G with probability |G| / (n (n - 1))
    G = RelationSet.from_pairs((labels[a], labels[b]) for a, b in rng.integers(n, size=(20 * n, 2)))
    chance = len(G) / (n * (n - 1))
    T = build_arborescence(E, zipf_power(n), BuildConfig(parent_rule="random", seed=1))
    r = edge_accuracy(T, G)
    assert chance / 5 <= r.directed_acc <= 5 * chance
    assert chance / 5 <= r.reversed_acc <= 5 * chance
