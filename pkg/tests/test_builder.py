import numpy as np
import pytest
from sklearn.base import clone

from orient import PowerArborescence, build_arborescence, extract_subtrees, make_plan
from orient.builder import root_power_at_step, score_candidate
from orient.core import BuildConfig, PowerAssignment, validate_embedding
from orient.exceptions import SizeMismatch
from orient.power import zipf_power

import oracles
from conftest import make_tree


def emb(X):
    X = np.asarray(X, dtype=float)
    return validate_embedding([f"w{i}" for i in range(len(X))], X)


def entity_parent(T):
    return T.parent[1:] - 1


def test_make_plan_examples():
    assert make_plan(np.array([3.0, 1.0, 2.0])).sequence.tolist() == [0, 2, 1]
    assert make_plan(np.ones(5)).sequence.tolist() == [0, 1, 2, 3, 4]
    assert make_plan(np.array([3.0, 1.0, 2.0]), "asc").sequence.tolist() == [1, 2, 0]
    a = make_plan(np.ones(50), "random", seed=9).sequence
    b = make_plan(np.ones(50), "random", seed=9).sequence
    assert a.tolist() == b.tolist() and sorted(a.tolist()) == list(range(50))
    assert a.tolist() != make_plan(np.ones(50), "random", seed=10).sequence.tolist()


def test_root_power_examples():
    assert root_power_at_step([], [5, 2, 1]) == 5
    assert root_power_at_step([4, 2]) == 3
    assert root_power_at_step([7]) == 7


def test_score_candidate_examples():
    q = np.zeros(2)
    # candidate achieving both maxima
    assert score_candidate(q, np.array([1.0, 0.0]), np.e, 0.6, 1.0, 1.0) == pytest.approx(1.0)
    # distance ratio 0.5 and power ratio 1
    s = score_candidate(q, np.array([np.sqrt(2), 0.0]), np.e, 0.6, 1.0, 1.0)
    assert s == pytest.approx(0.7)
    # power term vanishes when every candidate has log power 0
    assert score_candidate(q, np.array([1.0, 0.0]), 1.0, 0.6, 1.0, 0.0) == pytest.approx(0.6)


def test_single_entity():
    T = build_arborescence(emb([[1.0, 2.0]]), zipf_power(1))
    assert T.parent.tolist() == [-1, 0]
    T.check()


def test_collinear_example():
    E = emb([[0.0], [1.0], [10.0]])
    P = PowerAssignment.from_raw([3.0, 2.0, 1.0], "external")
    for accel in (True, False):
        T = build_arborescence(E, P, BuildConfig(p=1.0, accelerated=accel))
        assert entity_parent(T).tolist() == [-1, 0, -1]
        assert T.edge_length[2] == 1.0
        assert T.edge_length[3] == pytest.approx(10 - 11 / 3)


def test_size_mismatch():
    with pytest.raises(SizeMismatch):
        build_arborescence(emb([[0.0], [1.0]]), zipf_power(3))


def random_instance(rng):
    n = int(rng.integers(2, 500))
    d = int(rng.choice([2, 8, 16]))
    X = rng.normal(size=(n, d)) * rng.uniform(0.5, 3.0, size=d)
    return emb(X), zipf_power(n) if rng.random() < 0.5 else PowerAssignment.from_raw(
        rng.integers(1, 8, n).astype(float), "external")


@pytest.mark.parametrize("seed", range(12))
def test_accelerated_matches_brute_oracle(seed):
    rng = np.random.default_rng(seed)
    E, P = random_instance(rng)
    for p in (0.0, 0.25, 0.6, 1.0):
        for kind in ("euclidean", "cosine"):
            for order in ("descending", "random", "ascending"):
                cfg = BuildConfig(p=p, distance=kind, order=order, seed=seed)
                fast = build_arborescence(E, P, cfg)
                slow = build_arborescence(E, P, BuildConfig(p=p, distance=kind, order=order,
                                                            seed=seed, accelerated=False))
                assert fast.parent.tolist() == slow.parent.tolist()
                np.testing.assert_array_equal(fast.edge_length, slow.edge_length)
                fast.check()


@pytest.mark.parametrize("seed", range(4))
def test_builds_match_numpy_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 60))
    X = rng.normal(size=(n, 3))
    P = PowerAssignment.from_raw(rng.integers(1, 5, n).astype(float), "external")
    for p in (0.0, 0.6, 1.0):
        for kind in ("euclidean", "cosine"):
            cfg = BuildConfig(p=p, distance=kind)
            T = build_arborescence(emb(X), P, cfg)
            order = make_plan(P, "descending").sequence
            want = oracles.brute_build(X, P.powers, order, p, kind)
            assert entity_parent(T).tolist() == want.tolist()


def test_p_one_is_greedy_nearest(rng):
    X = rng.normal(size=(300, 4))
    P = zipf_power(300)
    for order in ("descending", "random"):
        T = build_arborescence(emb(X), P, BuildConfig(p=1.0, order=order, seed=3))
        seq = make_plan(P, order, 3).sequence
        assert entity_parent(T).tolist() == oracles.greedy_nn_tree(X, seq).tolist()


def test_descending_parents_are_stronger(rng):
    P = PowerAssignment.from_raw(rng.uniform(1, 100, 200), "external")
    T = build_arborescence(emb(rng.normal(size=(200, 3))), P)
    child, par = T.real_edges()
    assert (T.insertion_rank[par] < T.insertion_rank[child]).all()
    assert (P.powers[par - 1] >= P.powers[child - 1]).all()


def test_random_selection_baseline(rng):
    E = emb(rng.normal(size=(100, 3)))
    cfg = BuildConfig(parent_rule="random", seed=4)
    a = build_arborescence(E, zipf_power(100), cfg)
    b = build_arborescence(E, zipf_power(100), cfg)
    assert a.parent.tolist() == b.parent.tolist()
    a.check()
    c = build_arborescence(E, zipf_power(100), BuildConfig(parent_rule="random", seed=5))
    assert a.parent.tolist() != c.parent.tolist()


def test_determinism(rng):
    E = emb(rng.normal(size=(150, 5)))
    cfg = BuildConfig(order="random", seed=11)
    a = build_arborescence(E, zipf_power(150), cfg)
    b = build_arborescence(E, zipf_power(150), cfg)
    assert a.parent.tolist() == b.parent.tolist()
    np.testing.assert_array_equal(a.edge_length, b.edge_length)


def test_duplicate_vectors_are_accepted():
    E = emb([[1.0, 1.0]] * 5 + [[2.0, 0.0]])
    for accel in (True, False):
        T = build_arborescence(E, zipf_power(6), BuildConfig(accelerated=accel))
        T.check()
        # coincident later copies attach to the first copy
        assert entity_parent(T)[1:5].tolist() == [0, 0, 0, 0]


def star(lengths):
    edges = {"hub": None}
    edges.update({f"x{i}": "hub" for i in range(len(lengths))})
    return make_tree(edges, {f"x{i}": v for i, v in enumerate(lengths)})


def test_extract_subtrees_long_edge():
    T = star([1.0] * 9 + [10.0])
    clusters = extract_subtrees(T, 90)
    assert len(clusters) == 2
    assert clusters[1] == {"root": 11, "members": [11]}
    assert sorted(clusters[0]["members"]) == list(range(1, 11))


def test_extract_subtrees_only_root_edges():
    T = make_tree({"a": None, "b": "a", "c": None, "d": "c", "e": "d"},
                  {"b": 1.0, "d": 2.0, "e": 3.0})
    clusters = extract_subtrees(T, 100)
    assert [c["root"] for c in clusters] == [1, 3]
    assert [c["members"] for c in clusters] == [[1, 2], [3, 4, 5]]


def test_extract_subtrees_partition(rng):
    X = rng.normal(size=(200, 3))
    T = build_arborescence(emb(X), zipf_power(200))
    for cutoff in (10, 50, 90, 100):
        clusters = extract_subtrees(T, cutoff)
        members = sorted(m for c in clusters for m in c["members"])
        assert members == list(range(1, 201))
        child, _ = T.real_edges()
        lengths = T.edge_length[child]
        n_cut = int((lengths > np.percentile(lengths, cutoff)).sum()) + int((T.parent[1:] == 0).sum())
        assert len(clusters) == n_cut


def test_extract_subtrees_all_cut():
    T = make_tree({"a": None, "b": None, "c": None})
    assert [c["members"] for c in extract_subtrees(T, 50)] == [[1], [2], [3]]
    with pytest.raises(ValueError):
        extract_subtrees(T, 0)


def test_estimator_api(rng):
    X = rng.normal(size=(80, 4))
    est = PowerArborescence(p=0.5, order="descending")
    params = est.get_params()
    assert params["p"] == 0.5 and params["distance"] == "euclidean"
    twin = clone(est).set_params(p=0.7)
    assert twin.p == 0.7 and est.p == 0.5
    parents = est.fit_predict(X)
    assert parents.shape == (80,) and parents[0] == -1
    assert est.n_features_in_ == 4
    T = build_arborescence(emb(X), zipf_power(80), BuildConfig(p=0.5))
    assert est.tree_.parent.tolist() == T.parent.tolist()


def test_estimator_predict(rng):
    X = rng.normal(size=(60, 3))
    est = PowerArborescence(p=1.0).fit(X)
    got = est.predict(X[:5] + 1e-9)
    assert got.tolist() == [0, 1, 2, 3, 4]
    with pytest.raises(ValueError):
        PowerArborescence(p=2.0).fit(X)


def test_estimator_custom_power(rng):
    X = rng.normal(size=(30, 2))
    raw = rng.uniform(1, 10, 30)
    est = PowerArborescence().fit(X, power=raw)
    assert est.tree_.insertion_rank[1 + int(np.argmax(raw))] == 0


@pytest.mark.parametrize("kind", ["euclidean", "cosine"])
def test_pairwise_distances_match_numpy(rng, kind):
    from orient.builder import pairwise_distances

    X = rng.normal(size=(40, 5))
    D, R = pairwise_distances(emb(X), kind)
    oD, oR = oracles.pairwise(X, kind)
    np.testing.assert_allclose(D, oD, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(R, oR, rtol=1e-12, atol=1e-14)
    assert (D == D.T).all()
