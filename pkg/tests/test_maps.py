import math
from fractions import Fraction

import numpy as np
import pytest

from qlekit import maps
from qlekit.errors import InvalidArgument, TerminalState, TooLarge


def test_phi_small_values():
    assert maps.phi(0, 0) == 1
    assert maps.phi(1, 0) == 1
    for m in range(5):
        for n in range(5 - m):
            assert maps.enumerate_triangulations(m, n) == maps.phi(n, m)
    with pytest.raises(InvalidArgument):
        maps.phi(-1, 0)


def test_enumeration_guard():
    with pytest.raises(TooLarge):
        maps.enumerate_triangulations(4, 3)


def test_phi_growth_ratio():
    # 27/2 asymptotically in n
    r = maps.phi(2001, 0) / maps.phi(2000, 0)
    assert r == pytest.approx(13.5, rel=0.01)


def test_kernel_rows_are_probability_vectors():
    for m in range(7):
        for n in range(7):
            row = maps.peeling_kernel(m, n)
            assert sum(t.prob for t in row) == 1
            assert all(t.prob >= 0 for t in row)


def test_terminal_probabilities():
    assert maps.induced_kernel(0, 0) == {None: 1}
    assert maps.induced_kernel(0, 1)[None] == Fraction(1, 4)
    assert maps.edge_count(2, 3) == 14


def test_tutte_split_consistency():
    # splitting probabilities are products of phi weighted by region edge counts
    m, n = 3, 2
    row = maps.peeling_kernel(m, n)
    E = maps.edge_count(m, n)
    for t in row:
        if t.kind == "split":
            (m1, n1), (m2, n2) = t.regions
            mi, ni = t.regions[t.region]
            expect = Fraction(maps.phi(n1, m1) * maps.phi(n2, m2) * maps.edge_count(mi, ni),
                              maps.phi(n, m) * E)
            assert t.prob == expect
            assert t.bubble == t.regions[1 - t.region]


def test_modes_share_table_and_csv():
    assert maps.kernel_rows_csv(4, 4, "percolation") == maps.kernel_rows_csv(4, 4, "eden")
    with pytest.raises(InvalidArgument):
        maps.peeling_kernel(1, 1, "bogus")


def test_peeling_path_and_terminal_state():
    st = maps.explore_until_target(2, 3, seed=1)
    assert st.terminated
    for nk in st.log:
        if nk.kind == "vertex":
            m, n = nk.before
            assert nk.after == (m + 1, n - 1) and nk.offset == nk.side
        if nk.kind == "split":
            assert nk.after == nk.regions[nk.region]
    with pytest.raises(TerminalState):
        maps.peel_step(st)


def test_reshuffle_keeps_events():
    st = maps.explore_until_target(3, 2, seed=2)
    new = maps.reshuffle_necklaces(st.log, seed=3)
    assert [(a.kind, a.before, a.after) for a in new] == [(a.kind, a.before, a.after) for a in st.log]
    for nk in new:
        if nk.after is not None:
            assert 0 <= nk.offset < nk.after[0] + 2
    assert maps.triangles_observed(new) == maps.triangles_observed(st.log)


def test_triangle_counts_on_small_state():
    # (0,1): terminate (0 triangles) w.p. 1/4, else one vertex step to (1,0)
    tri, neck, _ = maps.exploration_stats(0, 1, 20_000, "eden", seed=4)
    assert np.mean(tri == 0) == pytest.approx(0.25, abs=0.015)
    assert set(np.unique(neck)) <= {0, 1, 2, 3}


def test_exploration_pipelines_agree():
    tri_e, neck_e, _ = maps.exploration_stats(2, 3, 20_000, "eden", seed=5)
    tri_r, neck_r, _ = maps.exploration_stats(2, 3, 20_000, "reshuffled", seed=6)
    assert maps.tv_distance(tri_e.tolist(), tri_r.tolist()) < 0.03
    assert maps.tv_distance(neck_e.tolist(), neck_r.tolist()) < 0.03


def test_tv_distance():
    assert maps.tv_distance([1, 1, 2, 2], [1, 2, 2, 2]) == pytest.approx(0.25)


def test_walk_counts_are_catalan_products():
    cat = [math.comb(2 * k, k) // (k + 1) for k in range(6)]
    for n in range(1, 5):
        assert len(maps.enumerate_walks(n)) == cat[n] * cat[n + 1]


def test_mullin_bijection():
    for n in range(1, 5):
        for w in maps.enumerate_walks(n):
            dm = maps.mullin(w)
            dm.validate()
            assert dm.euler() == 2
            assert [tuple(s) for s in maps.mullin_inverse(dm)] == [tuple(s) for s in w]


def test_walk_validation():
    with pytest.raises(InvalidArgument):
        maps.validate_walk([(0, -1), (0, 1)])
    with pytest.raises(InvalidArgument):
        maps.validate_walk([(1, 0)])
    with pytest.raises(InvalidArgument):
        maps.validate_walk([(1, 1), (-1, -1)])


def test_sampled_walks_are_uniform():
    n = 3
    walks = [tuple(map(tuple, w)) for w in maps.enumerate_walks(n)]
    counts = dict.fromkeys(walks, 0)
    u = maps.UniformStream(7)
    for _ in range(14_000):
        counts[tuple(maps.sample_walk(n, u))] += 1
    freq = np.array(list(counts.values())) / 14_000
    assert np.abs(freq - 1 / 70).max() < 0.006


def test_lerw_is_simple_path():
    adj = [[1, 3], [0, 2, 4], [1, 5], [0, 4], [1, 3, 5], [2, 4]]
    p = maps.lerw(adj, 0, 5, seed=8)
    assert p[0] == 0 and p[-1] == 5 and len(set(p)) == len(p)
    for a, b in zip(p, p[1:]):
        assert b in adj[a]


def test_wilson_gives_spanning_tree():
    adj = [[1, 3], [0, 2, 4], [1, 5], [0, 4], [1, 3, 5], [2, 4]]
    tree = maps.wilson_ust(adj, 0, seed=9)
    assert sorted(tree) == [1, 2, 3, 4, 5]
    for v, (p, slot) in tree.items():
        assert adj[v][slot] == p
        seen = {v}
        while v != 0:
            v = tree[v][0]
            assert v not in seen
            seen.add(v)


def test_wilson_uniform_on_square():
    # 4-cycle: four spanning trees, equally likely
    adj = [[1, 3], [0, 2], [1, 3], [2, 0]]
    u = maps.UniformStream(10)
    counts = {}
    for _ in range(8000):
        t = maps.wilson_ust(adj, 0, u)
        key = frozenset(frozenset((v, p)) for v, (p, _) in t.items())
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 4
    assert max(abs(c / 8000 - 0.25) for c in counts.values()) < 0.02


def test_dla_and_lerw_edge_laws_agree():
    r = maps.compare_dla_lerw(6, 8000, seed=11)
    assert r["tv_edges"] < 0.03
    assert (r["lerw_edges"] >= 1).all() and (r["dla_edges"] >= 1).all()
