from fractions import Fraction

import numpy as np
import pytest

from qlekit import field, growth, lqg
from qlekit.errors import DegenerateDomain, InvalidArgument


def absorbing_chain_measure(graph, member, target):
    """Entry law via the fundamental matrix of the absorbed walk (dense)."""
    free = [v for v in range(graph.V) if not member[v]]
    idx = {v: k for k, v in enumerate(free)}
    Q = np.zeros((len(free), len(free)))
    for v in free:
        for y in graph.adj[v]:
            if y in idx:
                Q[idx[v], idx[y]] += 1 / len(graph.adj[v])
    N = np.linalg.inv(np.eye(len(free)) - Q)
    out = {}
    for v in free:
        for y in graph.adj[v]:
            if member[y]:
                out[(v, y)] = out.get((v, y), 0) + N[idx[target], idx[v]] / len(graph.adj[v])
    return out


def test_exact_measure_matches_fundamental_matrix():
    g = growth.grid_graph(6, target=0)
    member = np.zeros(g.V, bool)
    member[[14, 15, 21]] = True
    edges, p = growth.harmonic_measure_exact(g, member, 0)
    ref = absorbing_chain_measure(g, member, 0)
    got = {}
    for e, q in zip(edges, p):
        got[e] = got.get(e, 0) + q
    assert set(got) == set(ref)
    for e in ref:
        assert got[e] == pytest.approx(ref[e], abs=1e-12)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_symmetric_measure_from_infinity():
    g = growth.grid_graph(7, infinity=True)
    member = np.zeros(g.V, bool)
    member[g.seed] = True
    _, p = growth.harmonic_measure_exact(g, member, g.target)
    assert np.allclose(p, 0.25, atol=1e-12)


def test_enclosed_target_raises():
    g = growth.graph_from_edges(3, [(0, 1), (1, 2)], seed=0, target=2)
    with pytest.raises(DegenerateDomain):
        growth.harmonic_measure_exact(g, np.array([False, True, True]), 2)
    g2 = growth.graph_from_edges(4, [(0, 1), (2, 3)], seed=0, target=3)
    with pytest.raises(DegenerateDomain):
        growth.harmonic_measure_exact(g2, np.array([True, False, False, False]), 3)


def test_walk_sampler_matches_exact():
    g = growth.grid_graph(5, target=0)
    member = np.zeros(g.V, bool)
    member[12] = True
    edges, p = growth.harmonic_measure_exact(g, member, 0)
    hits = growth.walk_hits(g, member, 0, 100_000, seed=1)
    freq = {e: 0 for e in edges}
    for x, c in hits:
        freq[(int(x), int(c))] += 1
    emp = np.array([freq[e] for e in edges]) / len(hits)
    assert 0.5 * np.abs(emp - p).sum() < 0.01


def test_eden_equals_race_kernel():
    g = growth.graph_from_edges(5, [(0, 1), (0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)])
    assert growth.kernel_table(g, growth.eden_kernel) == growth.kernel_table(g, growth.race_kernel)
    # double edge counts twice
    assert growth.eden_kernel(g, {0}) == {1: Fraction(2, 3), 4: Fraction(1, 3)}


def test_fpp_ball_with_fixed_weights():
    # path 0 - 1 - 2 plus a slow shortcut 0 - 2
    g = growth.graph_from_edges(3, [(0, 1), (1, 2), (0, 2)], seed=0)
    w = {(0, 1, 0): 1.0, (1, 2, 0): 1.0, (0, 2, 0): 5.0}
    cl = growth.fpp_ball(g, weights=w)
    assert cl.order == [0, 1, 2]
    assert [h[4] for h in cl.history] == [0.0, 1.0, 2.0]
    assert growth.fpp_ball(g, weights=w, t=1.5).order == [0, 1]
    assert growth.fpp_ball(g, weights=w, k=1).order == [0]
    with pytest.raises(InvalidArgument):
        growth.fpp_ball(g, rate=0)


def test_grow_dbm_reproducible_and_connected():
    g = growth.grid_graph(15, infinity=True)
    a = growth.grow_dbm(g, 1.0, 30, seed=3)
    b = growth.grow_dbm(g, 1.0, 30, seed=3)
    assert a.history == b.history
    member = {g.seed}
    for _, x, c, _, _ in a.history:
        assert c in member and x in g.adj[c]
        member.add(x)


def test_eden_reaches_boundary():
    g = growth.grid_graph(5, infinity=True)
    cl = growth.grow_dbm(g, 0.0, 1000, seed=4)
    assert cl.status == "reached-target"
    assert len(cl.history) < 25


def test_capacity_clock_counts_rounds():
    g = growth.grid_graph(9, infinity=True)
    cl = growth.grow_dbm(g, 2.0, 10, clock="capacity", seed=5)
    clocks = [h[4] for h in cl.history]
    assert clocks == sorted(clocks) and clocks[-1] >= 10
    with pytest.raises(InvalidArgument):
        growth.grow_dbm(g, -1.0, 3)


def test_tiling_graph_and_image():
    t = lqg.square_decompose(lqg.lqg_mass(field.sample_dgff(32, seed=6), 1.0), 0.01)
    g = growth.tiling_graph(t)
    assert g.V == len(t.leaves) + 1 and g.target == g.V - 1
    for x, nb in enumerate(g.adj):
        for y in nb:
            assert x in g.adj[y]
    cl = growth.grow_dbm(growth.grid_graph(9, infinity=True), 1.0, 5, seed=7)
    img = growth.growth_image(growth.grid_graph(9, infinity=True), cl, 9)
    assert img.shape == (9, 9, 3)
