import numpy as np
import pytest

from orient.core import RelationSet, validate_embedding
from orient.exceptions import KTooLarge, NoScorablePairs, UnknownNode
from orient.lca import (
    hit_rate,
    lca,
    lca_closure,
    lca_hit_rate,
    lca_many,
    lch_closure,
    preprocess,
    sample_pairs,
)
from orient.nnindex import BallTree

import oracles
from conftest import make_tree, tree_from_parent


def test_root_only_tree():
    T = make_tree({})
    I = preprocess(T)
    assert I.euler_tour.tolist() == [0]
    assert lca(I, 0, 0) == 0


def test_path_tour():
    T = make_tree({"a": None, "b": "a", "c": "b"})
    I = preprocess(T)
    assert len(I.euler_tour) == 7
    assert I.depth.tolist() == [0, 1, 2, 3, 2, 1, 0]
    assert lca(I, 3, 1) == 1


def test_tour_steps_by_one(random_tree):
    T = random_tree(300)
    I = preprocess(T)
    assert len(I.euler_tour) == 2 * T.n + 1
    assert (np.abs(np.diff(I.depth)) == 1).all()


def test_small_examples():
    T = make_tree({"a": None, "b": None, "c": "a"})
    I = preprocess(T)
    assert lca(I, 3, 3) == 3
    assert lca(I, 1, 2) == 0
    assert lca(I, 3, 1) == 1
    with pytest.raises(UnknownNode):
        lca(I, 0, 9)
    with pytest.raises(UnknownNode):
        lca_many(I, [0], [-1])


def test_matches_naive_on_random_trees(rng):
    for _ in range(30):
        n_nodes = int(rng.integers(1, 120))
        parent = oracles.random_tree_parent(rng, n_nodes)
        I = preprocess(tree_from_parent(parent))
        u, v = np.meshgrid(np.arange(n_nodes), np.arange(n_nodes))
        got = lca_many(I, u.ravel(), v.ravel())
        want = [oracles.naive_lca(parent, a, b) for a, b in zip(u.ravel(), v.ravel())]
        assert got.tolist() == want


def test_large_tree_sample(rng):
    parent = oracles.random_tree_parent(rng, 1001)
    T = tree_from_parent(parent)
    I = preprocess(T)
    for a, b in rng.integers(1001, size=(2000, 2)):
        w = lca(I, a, b)
        assert w == oracles.naive_lca(parent, a, b) == lca(I, b, a)
        assert T.node_level[w] <= min(T.node_level[a], T.node_level[b])


def test_closure_examples():
    T = make_tree({"a": None, "b": "a", "c": "b", "x": None, "y": "x", "z": "x"})
    I = preprocess(T)
    assert lca_closure(I, T, 5, 6, 0) == {4}
    assert lca_closure(I, T, 5, 6, 2) == {4}
    assert lca_closure(I, T, 3, 3, 2) == {3, 2, 1}
    assert lca_closure(I, T, 3, 5, 0) == set()
    with pytest.raises(ValueError):
        lca_closure(I, T, 1, 1, -1)


def test_sample_pairs(rng):
    X = rng.normal(size=(120, 4))
    E = validate_embedding([str(i) for i in range(120)], X)
    idx = BallTree(X)
    pairs = sample_pairs(E, idx, 300, k=20, seed=7)
    assert pairs == sample_pairs(E, idx, 300, k=20, seed=7)
    knn = {}
    for w1, w2 in pairs:
        if w1 not in knn:
            knn[w1] = set(oracles.scan_knn(X, X[w1], 20, exclude=w1))
        assert w2 in knn[w1] and w1 != w2
    nearest = sample_pairs(E, idx, 50, k=1, seed=1)
    assert all(w2 == oracles.scan_knn(X, X[w1], 1, exclude=w1)[0] for w1, w2 in nearest)
    with pytest.raises(KTooLarge):
        sample_pairs(E, idx, 5, k=120)


def test_lch_closure():
    G = RelationSet.from_pairs([("x", "y"), ("y", "z"), ("z", "w")])
    assert lch_closure(G, {"x"}, 0) == {"x"}
    assert lch_closure(G, {"x"}, 2) == {"x", "y", "z"}
    D = RelationSet.from_pairs([("x", "a"), ("x", "b"), ("a", "t"), ("b", "t")])
    assert lch_closure(D, {"x"}, 1) == {"x", "a", "b"}


def test_hit_rate_examples():
    assert hit_rate([{"a"}, {"b"}], [{"a"}, {"b"}]) == 1.0
    assert hit_rate([{"a"}, {"b"}], [{"c"}, {"d"}]) == 0.0
    assert hit_rate([{"a"}, {"b"}, {"c"}], [{"a"}, {"z"}, set()]) == 0.5
    with pytest.raises(NoScorablePairs):
        hit_rate([{"a"}], [set()])


def test_lca_hit_rate_monotone_in_closure(rng):
    from orient import build_arborescence
    from orient.synthetic import planted_hierarchy

    H = planted_hierarchy(n=300, seed=2)
    T = build_arborescence(H.embedding, H.power)
    idx = BallTree(H.embedding.vectors)
    pairs = sample_pairs(H.embedding, idx, 400, k=10, seed=3)
    labels = H.embedding.labels

    def lch(a, b):
        return {labels[H.lca(H.embedding.index[a], H.embedding.index[b])]}

    rates = [lca_hit_rate(T, pairs, lch, closure=c).hit_rate for c in range(4)]
    assert all(a <= b for a, b in zip(rates, rates[1:]))
    widened = [lca_hit_rate(T, pairs, lch, closure=c, hypernyms=H.truth).hit_rate for c in range(4)]
    assert all(a <= b for a, b in zip(widened, widened[1:]))
    assert all(a <= b for a, b in zip(rates, widened))


def test_lca_hit_rate_with_table():
    from orient.io import LchTable

    T = make_tree({"a": None, "b": "a", "c": "a", "d": None})
    table = LchTable({("b", "c"): {"a"}, ("a", "d"): set()})
    res = lca_hit_rate(T, [(2, 1), (0, 3)], table, closure=0)
    assert (res.hit_rate, res.n_scorable, res.n_pairs) == (1.0, 1, 2)
