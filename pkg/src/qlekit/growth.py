"""Eden, first passage percolation, DLA and eta-DBM growth on graphs.

Graphs are adjacency lists over vertices 0..V-1 (multi-edges allowed, each
listed once per edge).  A cluster-adjacent edge is an ordered pair (x, c)
with c in the cluster and x outside it.
"""
import heapq
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .errors import DegenerateDomain, InvalidArgument
from .rng import make_rng


@dataclass
class GrowthGraph:
    adj: list
    seed: int = 0
    target: int | None = None
    coords: np.ndarray | None = None

    @property
    def V(self):
        return len(self.adj)

    def edges(self):
        out = []
        for x, nb in enumerate(self.adj):
            for y in nb:
                if x < y:
                    out.append((x, y))
        return out


def graph_from_edges(V, edges, seed=0, target=None):
    adj = [[] for _ in range(V)]
    for x, y in edges:
        adj[x].append(y)
        adj[y].append(x)
    return GrowthGraph(adj, seed, target)


def grid_graph(n, seed=None, target=None, infinity=False):
    """n x n grid; vertex i * n + j at (i, j).  ``infinity`` adds an absorbing
    super-vertex (index n*n) joined to every boundary site once per missing
    neighbor and makes it the target."""
    edges = []
    for i in range(n):
        for j in range(n):
            v = i * n + j
            if i + 1 < n:
                edges.append((v, v + n))
            if j + 1 < n:
                edges.append((v, v + 1))
    V = n * n
    if infinity:
        for i in range(n):
            for j in range(n):
                missing = (i == 0) + (i == n - 1) + (j == 0) + (j == n - 1)
                edges.extend([(i * n + j, V)] * missing)
        V += 1
        target = V - 1
    if seed is None:
        seed = (n // 2) * n + n // 2
    g = graph_from_edges(V, edges, seed, target)
    xs, ys = np.divmod(np.arange(n * n), n)
    g.coords = np.column_stack([xs, ys]).astype(float)
    return g


def tiling_graph(tiling, seed_point=None, infinity=True):
    """Adjacency graph of the leaves of a SquareTiling (shared edge segment)."""
    n = tiling.n
    owner = -np.ones((n, n), dtype=int)
    for k, (i, j, s, _, _) in enumerate(tiling.leaves):
        owner[i:i + s, j:j + s] = k
    pairs = set()
    a, b = owner[:-1, :], owner[1:, :]
    for x, y in zip(a[a != b], b[a != b]):
        pairs.add((min(x, y), max(x, y)))
    a, b = owner[:, :-1], owner[:, 1:]
    for x, y in zip(a[a != b], b[a != b]):
        pairs.add((min(x, y), max(x, y)))
    V = len(tiling.leaves)
    edges = sorted(pairs)
    if infinity:
        border = set(owner[0, :]) | set(owner[-1, :]) | set(owner[:, 0]) | set(owner[:, -1])
        edges += [(int(k), V) for k in sorted(border)]
        V += 1
    if seed_point is None:
        seed_point = (n // 2, n // 2)
    g = graph_from_edges(V, [(int(x), int(y)) for x, y in edges],
                         int(owner[seed_point]), V - 1 if infinity else None)
    g.coords = np.array([(i + s / 2, j + s / 2) for i, j, s, _, _ in tiling.leaves]
                        + ([(np.nan, np.nan)] if infinity else []))
    return g


def boundary_edges(graph, member):
    """All cluster-adjacent edges (x, c), one entry per parallel edge."""
    out = []
    for c in np.nonzero(member)[0]:
        for x in graph.adj[c]:
            if not member[x]:
                out.append((x, int(c)))
    return out


def _component(graph, member, start):
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for y in graph.adj[x]:
            if not member[y] and y not in seen:
                seen.add(y)
                stack.append(y)
    return seen


def harmonic_measure_exact(graph, member, target):
    """Probability that a walk from ``target`` first enters the cluster
    through each cluster-adjacent edge.

    With phi(x) = P_x[hit target before cluster], the walk from the target
    crosses (x, c) with probability phi(x) G(target, target) / deg(target)
    by reversibility, and G(target, target) is the inverse escape probability.
    Returns (edges, probabilities).
    """
    member = np.asarray(member, bool)
    if member[target]:
        raise DegenerateDomain("target lies in the cluster")
    comp = _component(graph, member, target)
    edges = [(x, c) for (x, c) in boundary_edges(graph, member) if x in comp]
    if not edges:
        raise DegenerateDomain("the cluster is not reachable from the target")
    free = sorted(comp - {target})
    index = {v: k for k, v in enumerate(free)}
    phi = {target: 1.0}
    if free:
        rows, cols, vals = [], [], []
        rhs = np.zeros(len(free))
        for v in free:
            k = index[v]
            rows.append(k)
            cols.append(k)
            vals.append(float(len(graph.adj[v])))
            for y in graph.adj[v]:
                if y == target:
                    rhs[k] += 1.0
                elif y in index:
                    rows.append(k)
                    cols.append(index[y])
                    vals.append(-1.0)
        A = sparse.csc_matrix((vals, (rows, cols)), shape=(len(free), len(free)))
        sol = np.atleast_1d(spsolve(A, rhs))
        phi.update({v: float(sol[index[v]]) for v in free})
    deg_t = len(graph.adj[target])
    escape = sum(1.0 - phi.get(y, 0.0) if not member[y] else 1.0
                 for y in graph.adj[target]) / deg_t
    g_tt = 1.0 / escape
    p = np.array([phi[x] * g_tt / deg_t for x, _ in edges])
    return edges, p


def walk_hits(graph, member, target, count, seed=None):
    """Endpoints of the first cluster-entering step for ``count`` walks.

    Returns an array of (x, c) pairs.  Vectorized over walkers.
    """
    rng = make_rng(seed)
    member = np.asarray(member, bool)
    V = graph.V
    deg = np.array([len(a) for a in graph.adj])
    dmax = deg.max()
    nb = np.full((V, dmax), -1)
    for v, a in enumerate(graph.adj):
        nb[v, :len(a)] = a
    pos = np.full(count, target)
    out = np.zeros((count, 2), dtype=int)
    live = np.arange(count)
    while len(live):
        cur = pos[live]
        k = (rng.random(len(live)) * deg[cur]).astype(int)
        nxt = nb[cur, k]
        hit = member[nxt]
        done = live[hit]
        out[done, 0] = cur[hit]
        out[done, 1] = nxt[hit]
        pos[live] = nxt
        live = live[~hit]
    return out


def harmonic_measure_walk(graph, member, target, seed=None):
    x, c = walk_hits(graph, member, target, 1, seed)[0]
    return int(x), int(c)


@dataclass
class GrowthCluster:
    """Addition history: rows of (step, x, c, weight, clock)."""
    history: list = dc_field(default_factory=list)
    member: np.ndarray | None = None
    clock: str = "steps"
    status: str = "ok"

    @property
    def order(self):
        return [h[1] for h in self.history]


def dbm_weights(graph, member, eta, target):
    """Selection law over cluster-adjacent edges: b(e)^eta normalized.

    eta = 0 gives the uniform law on all cluster-adjacent edges (Eden).
    Returns (edges, probabilities, harmonic measure or None).
    """
    if eta == 0:
        edges = boundary_edges(graph, member)
        return edges, np.full(len(edges), 1.0 / len(edges)), None
    edges, b = harmonic_measure_exact(graph, member, target)
    w = b ** eta
    return edges, w / w.sum(), b


def grow_dbm(graph, eta, steps, clock="steps", sampler="exact", seed=None):
    """Grow from graph.seed for ``steps`` additions.

    clock='capacity' proposes edges with probability proportional to
    b^{2+eta} and accepts with probability (b_min / b)^2; the clock counts
    proposal rounds.
    """
    if eta < 0:
        raise InvalidArgument("eta must be nonnegative")
    if clock not in ("steps", "capacity"):
        raise InvalidArgument(f"unknown clock {clock!r}")
    rng = make_rng(seed)
    member = np.zeros(graph.V, bool)
    member[graph.seed] = True
    cl = GrowthCluster(member=member, clock=clock)
    rounds = 0
    for step in range(1, steps + 1):
        free = ~member
        if graph.target is not None:
            free[graph.target] = False
        if not free.any():
            cl.status = "exhausted"
            break
        try:
            if clock == "capacity":
                edges, b = harmonic_measure_exact(graph, member, graph.target)
                keep = b > 0
                edges = [e for e, k in zip(edges, keep) if k]
                b = b[keep]
                prop = b ** (2 + eta)
                prop /= prop.sum()
                acc = (b.min() / b) ** 2
                while True:
                    rounds += 1
                    k = rng.choice(len(edges), p=prop)
                    if rng.random() < acc[k]:
                        break
                x, c = edges[k]
                wt, clk = float(b[k]), rounds
            elif sampler == "walk" and eta == 1:
                x, c = harmonic_measure_walk(graph, member, graph.target, rng)
                wt, clk = float("nan"), step
            else:
                edges, p, _ = dbm_weights(graph, member, eta, graph.target)
                k = rng.choice(len(edges), p=p)
                x, c = edges[k]
                wt, clk = float(p[k]), step
        except DegenerateDomain:
            cl.status = "enclosed"
            break
        if graph.target is not None and x == graph.target:
            cl.status = "reached-target"
            break
        member[x] = True
        cl.history.append((step, int(x), int(c), wt, clk))
    return cl


def fpp_ball(graph, rate=1.0, t=None, k=None, seed=None, weights=None):
    """Ball of the first passage metric around graph.seed.

    Edge weights are i.i.d. exponential with the given rate unless
    ``weights`` (dict keyed by (min, max, multiplicity index)) is supplied.
    Returns the vertices with passage time <= t, or the first k vertices.
    Ties are broken by vertex index.
    """
    if rate <= 0:
        raise InvalidArgument("rate must be positive")
    rng = make_rng(seed)
    wts = {}
    for x, nb in enumerate(graph.adj):
        seen = {}
        for y in nb:
            if x < y:
                m = seen.get(y, 0)
                seen[y] = m + 1
                key = (x, y, m)
                wts[key] = weights[key] if weights is not None else rng.exponential(1 / rate)
    inc = [[] for _ in range(graph.V)]
    for (x, y, m), w in wts.items():
        inc[x].append((y, w))
        inc[y].append((x, w))
    dist = {graph.seed: 0.0}
    done = []
    heap = [(0.0, graph.seed)]
    member = np.zeros(graph.V, bool)
    cl = GrowthCluster(member=member, clock="fpp")
    parent = {graph.seed: -1}
    while heap:
        d, v = heapq.heappop(heap)
        if member[v] or d > dist.get(v, math.inf):
            continue
        if t is not None and d > t:
            break
        member[v] = True
        done.append(v)
        cl.history.append((len(done) - 1, int(v), int(parent[v]), float("nan"), d))
        if k is not None and len(done) >= k:
            break
        for y, w in inc[v]:
            nd = d + w
            if nd < dist.get(y, math.inf) and not member[y]:
                dist[y] = nd
                parent[y] = v
                heapq.heappush(heap, (nd, y))
    return cl


def eden_kernel(graph, cluster):
    """Exact law of the next vertex for Eden growth (Fraction weights)."""
    member = np.zeros(graph.V, bool)
    member[list(cluster)] = True
    edges, p, _ = dbm_weights(graph, member, 0, graph.target)
    out = {}
    n = len(edges)
    for x, _ in edges:
        out[x] = out.get(x, 0) + Fraction(1, n)
    return out


def race_kernel(graph, cluster, rate=1):
    """Exact law of the next vertex when every cluster-adjacent edge carries
    an independent exponential clock of the given rate (memoryless FPP)."""
    total = 0
    per = {}
    for c in cluster:
        for x in graph.adj[c]:
            if x not in cluster:
                per[x] = per.get(x, 0) + Fraction(rate)
                total += Fraction(rate)
    return {x: r / total for x, r in per.items()}


def kernel_table(graph, kernel, max_size=None):
    """Transition kernel on every connected vertex set containing the seed."""
    start = frozenset([graph.seed])
    table = {}
    frontier = [start]
    while frontier:
        S = frontier.pop()
        if S in table or (max_size is not None and len(S) >= max_size) or len(S) == graph.V:
            continue
        row = kernel(graph, S)
        table[S] = row
        for x in row:
            frontier.append(S | {x})
    return table


def growth_image(graph, cluster, n):
    """RGB image of a grid-embedded cluster colored by addition time."""
    from .lqg import rainbow

    img = np.full((n, n, 3), 255, dtype=np.uint8)
    steps = len(cluster.history)
    if graph.coords is None:
        raise InvalidArgument("graph has no coordinates")
    sx, sy = graph.coords[graph.seed]
    img[int(sy), int(sx)] = (0, 0, 0)
    for k, (_, x, _, _, _) in enumerate(cluster.history):
        cx, cy = graph.coords[x]
        if np.isfinite(cx):
            img[int(cy), int(cx)] = rainbow(k / max(1, steps - 1))
    return img
