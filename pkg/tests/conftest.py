import numpy as np
import pytest

from orient.core import Arborescence

from oracles import random_tree_parent


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_tree(edges, lengths=None, powers=None):
    """Arborescence from ``{child: parent_or_None}`` given in insertion order."""
    labels = list(edges)
    node_of = {lab: i + 1 for i, lab in enumerate(labels)}
    n = len(labels)
    parent = np.empty(n + 1, dtype=np.int64)
    parent[0] = -1
    level = np.zeros(n + 1, dtype=np.int64)
    for lab, par in edges.items():
        node = node_of[lab]
        parent[node] = 0 if par is None else node_of[par]
        level[node] = level[parent[node]] + 1
    rank = np.arange(-1, n, dtype=np.int64)
    length = np.zeros(n + 1)
    if lengths is not None:
        for lab, value in lengths.items():
            length[node_of[lab]] = value
    pw = np.ones(n) if powers is None else np.asarray([powers[lab] for lab in labels], float)
    return Arborescence(parent, length, rank, level, np.zeros(1), tuple(labels), pw)


def tree_from_parent(parent):
    """Arborescence over a random parent array (node 0 = root, parents precede children)."""
    n = len(parent) - 1
    level = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        level[i] = level[parent[i]] + 1
    return Arborescence(np.asarray(parent, dtype=np.int64), np.zeros(n + 1),
                        np.arange(-1, n, dtype=np.int64), level, np.zeros(1),
                        tuple(f"n{i}" for i in range(1, n + 1)), np.ones(n))


@pytest.fixture
def tree_factory():
    return make_tree


@pytest.fixture
def random_tree(rng):
    def _make(n_nodes):
        return tree_from_parent(random_tree_parent(rng, n_nodes))
    return _make


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
