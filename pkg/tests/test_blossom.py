import numpy as np
import networkx as nx
import pytest

from swaplru.blossom import (
    matching_weight,
    max_weight_matching,
    min_weight_perfect_matching,
)


def random_graph(rng, n, density, integer):
    eu, ev, ew = [], [], []
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < density:
                if integer:
                    w = float(rng.integers(-8, 20))
                else:
                    w = float(np.round(rng.uniform(-5.0, 15.0), 3))
                eu.append(a)
                ev.append(b)
                ew.append(w)
    return (np.array(eu, dtype=np.int64), np.array(ev, dtype=np.int64),
            np.array(ew, dtype=np.float64))


def nx_of(n, eu, ev, ew):
    G = nx.Graph()
    G.add_nodes_from(range(n))
    for a, b, w in zip(eu, ev, ew):
        G.add_edge(int(a), int(b), weight=float(w))
    return G


def assert_valid(G, mate):
    for v in range(mate.shape[0]):
        if mate[v] >= 0:
            assert mate[mate[v]] == v
            assert G.has_edge(v, int(mate[v]))


def test_docstring_example():
    eu = np.array([1, 1, 2, 2, 3, 4])
    ev = np.array([2, 3, 3, 4, 5, 5])
    ew = np.array([6.0, 2.0, 1.0, 7.0, 9.0, 3.0])
    mate = max_weight_matching(6, eu, ev, ew)
    assert mate[2] == 4 and mate[5] == 3 and mate[1] == -1
    assert matching_weight(mate, eu, ev, ew) == pytest.approx(16.0)


def test_empty_and_single():
    assert max_weight_matching(0, [], [], []).shape == (0,)
    assert (max_weight_matching(3, [], [], []) == -1).all()


def test_validation():
    with pytest.raises(ValueError):
        max_weight_matching(3, [0], [0], [1.0])
    with pytest.raises(ValueError):
        max_weight_matching(3, [0, 1], [1, 0], [1.0, 2.0])
    with pytest.raises(ValueError):
        max_weight_matching(2, [0], [2], [1.0])
    with pytest.raises(ValueError):
        min_weight_perfect_matching(3, [0], [1], [1.0])


def test_no_perfect_matching_raises():
    # star graph: only one of the three leaves can be matched
    with pytest.raises(ValueError):
        min_weight_perfect_matching(
            4, np.array([0, 0, 0]), np.array([1, 2, 3]), np.ones(3))


def test_differential_against_networkx():
    rng = np.random.default_rng(12345)
    for trial in range(800):
        n = int(rng.integers(2, 13))
        eu, ev, ew = random_graph(rng, n, rng.uniform(0.2, 1.0),
                                  integer=trial % 2 == 0)
        if eu.size == 0:
            continue
        G = nx_of(n, eu, ev, ew)
        for mc in (False, True):
            mine = max_weight_matching(n, eu, ev, ew, maxcardinality=mc)
            assert_valid(G, mine)
            theirs = nx.max_weight_matching(G, maxcardinality=mc)
            assert int((mine >= 0).sum()) // 2 == len(theirs)
            w_nx = sum(G[a][b]["weight"] for a, b in theirs)
            assert matching_weight(mine, eu, ev, ew) == pytest.approx(
                w_nx, abs=1e-9)


def test_differential_large_sparse():
    rng = np.random.default_rng(777)
    for trial in range(30):
        n = int(rng.integers(20, 61))
        eu, ev, ew = random_graph(rng, n, rng.uniform(0.1, 0.7),
                                  integer=False)
        G = nx_of(n, eu, ev, ew)
        for mc in (False, True):
            mine = max_weight_matching(n, eu, ev, ew, maxcardinality=mc)
            assert_valid(G, mine)
            theirs = nx.max_weight_matching(G, maxcardinality=mc)
            assert int((mine >= 0).sum()) // 2 == len(theirs)
            w_nx = sum(G[a][b]["weight"] for a, b in theirs)
            assert matching_weight(mine, eu, ev, ew) == pytest.approx(
                w_nx, abs=1e-8)


def all_pairings(vs):
    if not vs:
        yield []
        return
    a = vs[0]
    for i in range(1, len(vs)):
        rest = vs[1:i] + vs[i + 1:]
        for p in all_pairings(rest):
            yield [(a, vs[i])] + p


def test_perfect_matching_against_brute_force():
    rng = np.random.default_rng(4242)
    for trial in range(120):
        n = int(rng.choice([2, 4, 6, 8]))
        wmat = np.round(rng.uniform(0.1, 30.0, size=(n, n)), 4)
        wmat = (wmat + wmat.T) / 2.0
        eu, ev, ew = [], [], []
        for a in range(n):
            for b in range(a + 1, n):
                eu.append(a)
                ev.append(b)
                ew.append(wmat[a, b])
        ew = np.array(ew)
        mate = min_weight_perfect_matching(n, np.array(eu), np.array(ev), ew)
        assert (mate >= 0).all()
        best = min(sum(wmat[a, b] for a, b in p)
                   for p in all_pairings(list(range(n))))
        assert matching_weight(mate, eu, ev, ew) == pytest.approx(
            best, abs=1e-9)


def test_perfect_matching_prefers_cheap_pairs():
    # square with cheap opposite sides and costly diagonals
    eu = np.array([0, 1, 2, 3, 0, 1])
    ev = np.array([1, 2, 3, 0, 2, 3])
    ew = np.array([1.0, 1.0, 1.0, 1.0, 10.0, 10.0])
    mate = min_weight_perfect_matching(4, eu, ev, ew)
    assert matching_weight(mate, eu, ev, ew) == pytest.approx(2.0)


def test_deterministic():
    rng = np.random.default_rng(9)
    eu, ev, ew = random_graph(rng, 30, 0.4, integer=False)
    a = max_weight_matching(30, eu, ev, ew, maxcardinality=True)
    b = max_weight_matching(30, eu, ev, ew, maxcardinality=True)
    assert np.array_equal(a, b)
