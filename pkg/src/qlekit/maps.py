"""Planar map combinatorics: triangulation counts, peeling, necklaces,
the Mullin walk encoding, Wilson's algorithm and DLA versus LERW.

Conventions.  A triangulation of type (m, n) is a rooted type II
triangulation of an (m + 2)-gon with n interior vertices.  It has m + 2n
triangles and 2m + 3n + 1 edges (the 2-gon with no interior vertex is a
single edge).
"""
import math
from collections import Counter, deque
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import lru_cache
from itertools import count as _count

import numpy as np

from .errors import InvalidArgument, TerminalState, TooLarge
from .rng import make_rng


# ---- counting -------------------------------------------------------------

def phi(n, m):
    """Number of rooted type II triangulations of an (m + 2)-gon with n
    interior vertices (exact integer)."""
    if n < 0 or m < 0:
        raise InvalidArgument("n and m must be nonnegative")
    return _phi(int(n), int(m))


@lru_cache(maxsize=None)
def _phi(n, m):
    f = math.factorial
    num = 2 ** (n + 1) * f(2 * m + 1) * f(2 * m + 3 * n)
    den = f(m) ** 2 * f(n) * f(2 * m + 2 * n + 2)
    q, r = divmod(num, den)
    assert r == 0
    return q


def edge_count(m, n):
    return 2 * m + 3 * n + 1


class _UF:
    def __init__(self):
        self.p = {}

    def find(self, x):
        p = self.p
        while p.get(x, x) != x:
            p[x] = p.get(p[x], p[x])
            x = p[x]
        return x

    def union(self, a, b):
        a, b = self.find(a), self.find(b)
        if a != b:
            self.p[max(a, b)] = min(a, b)


def _triangulations(verts, edges, n, fresh):
    """Yield (triangles, glue pairs) for the polygon with ccw ``verts`` and
    ``edges`` (edge i joins verts[i] and verts[i + 1]); root edge is edges[0]."""
    L = len(verts)
    if L == 2 and n == 0:
        yield [], [(edges[0], edges[1])]
        return
    v0, v1 = verts[0], verts[1]
    if n > 0:
        w, f1, f2 = next(fresh), next(fresh), next(fresh)
        tri = ((v0, edges[0]), (v1, f1), (w, f2))
        sub_v = [v0, w] + verts[1:]
        sub_e = [f2, f1] + edges[1:]
        for ts, gl in _triangulations(sub_v, sub_e, n - 1, fresh):
            yield [tri] + ts, gl
    for j in range(2, L):
        vj = verts[j]
        f1, f2 = next(fresh), next(fresh)
        tri = ((v0, edges[0]), (v1, f1), (vj, f2))
        a_v, a_e = verts[1:j + 1], edges[1:j] + [f1]
        b_v, b_e = [v0] + verts[j:], [f2] + edges[j:]
        for na in range(n + 1):
            for ta, ga in _triangulations(a_v, a_e, na, fresh):
                for tb, gb in _triangulations(b_v, b_e, n - na, fresh):
                    yield [tri] + ta + tb, ga + gb


def _canonical(triangles, glue, outer):
    uf = _UF()
    for a, b in glue:
        uf.union(a, b)
    faces = [outer] + [list(t) for t in triangles]
    faces = [[(v, uf.find(e)) for v, e in f] for f in faces]
    where = {}
    for fi, f in enumerate(faces):
        for di, (_, e) in enumerate(f):
            where.setdefault(e, []).append((fi, di))
    vlab, elab = {}, {}
    code = []
    seen = set()
    queue = deque([(0, 0)])
    seen.add(0)
    while queue:
        fi, start = queue.popleft()
        f = faces[fi]
        k = len(f)
        word = []
        for s in range(k):
            v, e = f[(start + s) % k]
            vlab.setdefault(v, len(vlab))
            elab.setdefault(e, len(elab))
            word.append((vlab[v], elab[e]))
            for gi, gd in where[e]:
                if (gi, gd) != (fi, (start + s) % k) and gi not in seen:
                    seen.add(gi)
                    queue.append((gi, gd))
        code.append(tuple(word))
    return tuple(code)


def enumerate_triangulations(m, n, return_maps=False):
    """Count rooted type II triangulations of type (m, n) by explicit
    construction with duplicate removal (m + n <= 6)."""
    if m < 0 or n < 0:
        raise InvalidArgument("m and n must be nonnegative")
    if m + n > 6:
        raise TooLarge("enumeration is limited to m + n <= 6")
    if m == 0 and n == 0:
        return (1, [((),)]) if return_maps else 1
    fresh = _count(10_000)
    L = m + 2
    verts = list(range(L))
    edges = list(range(1000, 1000 + L))
    # outer face traversed in the opposite orientation
    outer = [(verts[(i + 1) % L], edges[i]) for i in range(L)][::-1]
    outer = outer[-1:] + outer[:-1]
    codes = set()
    for tris, glue in _triangulations(verts, edges, n, fresh):
        codes.add(_canonical(tris, glue, outer))
    return (len(codes), codes) if return_maps else len(codes)


# ---- peeling --------------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    """One peeling event from (m, n).

    kind: 'terminate', 'vertex' (side 0/1) or 'split'.  For a split, j is
    the boundary position of the third vertex and (m1, n1), (m2, n2) the two
    regions, ``region`` the one holding the target.
    """
    kind: str
    prob: Fraction
    next: tuple | None
    side: int = 0
    j: int = 0
    regions: tuple = ()
    region: int = 0

    @property
    def bubble(self):
        if self.kind != "split":
            return None
        return self.regions[1 - self.region]


@lru_cache(maxsize=None)
def _kernel_row(m, n):
    E = edge_count(m, n)
    total = phi(n, m) * E
    row = [Transition("terminate", Fraction(1, E), None)]
    if n > 0:
        w = Fraction(phi(n - 1, m + 1) * (E - 1), 2 * total)
        for side in (0, 1):
            row.append(Transition("vertex", w, (m + 1, n - 1), side=side))
    for m1 in range(m):
        m2 = m - 1 - m1
        for n1 in range(n + 1):
            n2 = n - n1
            base = phi(n1, m1) * phi(n2, m2)
            regs = ((m1, n1), (m2, n2))
            for r in (0, 1):
                mi, ni = regs[r]
                row.append(Transition("split", Fraction(base * edge_count(mi, ni), total),
                                      regs[r], j=m1 + 2, regions=regs, region=r))
    return tuple(row)


MODES = ("percolation", "eden")


def peeling_kernel(m, n, mode="percolation"):
    """Exact transition row from (m, n).  Both modes share one table; they
    differ only in how necklace gluing offsets are recorded."""
    if mode not in MODES:
        raise InvalidArgument(f"unknown mode {mode!r}")
    if m < 0 or n < 0:
        raise InvalidArgument("m and n must be nonnegative")
    return _kernel_row(int(m), int(n))


def induced_kernel(m, n, mode="percolation"):
    """Law of the next (m, n) (None for termination) as exact rationals."""
    out = {}
    for tr in peeling_kernel(m, n, mode):
        out[tr.next] = out.get(tr.next, 0) + tr.prob
    return out


def kernel_rows_csv(mmax, nmax, mode="percolation"):
    rows = []
    for m in range(mmax + 1):
        for n in range(nmax + 1):
            for tr in peeling_kernel(m, n, mode):
                nxt = tr.next or (-1, -1)
                rows.append((m, n, tr.kind, tr.side, tr.j, tr.region, nxt[0], nxt[1],
                             tr.prob.numerator, tr.prob.denominator))
    return rows


@lru_cache(maxsize=None)
def _float_row(m, n):
    row = _kernel_row(m, n)
    cdf = np.cumsum([float(t.prob) for t in row])
    return row, cdf / cdf[-1]


@dataclass
class Necklace:
    kind: str
    before: tuple
    after: tuple | None
    side: int = 0
    j: int = 0
    regions: tuple = ()
    region: int = 0
    offset: int = 0

    @property
    def triangles(self):
        """Triangles revealed: the peeled triangle plus any bubble."""
        if self.kind == "terminate":
            return 0
        if self.kind == "split":
            mb, nb = self.regions[1 - self.region]
            return 1 + mb + 2 * nb
        return 1

    @property
    def outer_length(self):
        return None if self.after is None else self.after[0] + 2


@dataclass
class PeelingState:
    m: int
    n: int
    steps: int = 0
    log: list = dc_field(default_factory=list)
    terminated: bool = False

    @property
    def path(self):
        return [nk.before for nk in self.log] + ([] if self.terminated else [(self.m, self.n)])


class UniformStream:
    """Buffered uniforms from a numpy Generator for scalar-heavy loops."""

    def __init__(self, seed=None, size=65536):
        self.rng = make_rng(seed)
        self.size = size
        self.buf = self.rng.random(size)
        self.i = 0

    def __call__(self):
        if self.i == self.size:
            self.buf = self.rng.random(self.size)
            self.i = 0
        x = self.buf[self.i]
        self.i += 1
        return x

    def integer(self, k):
        return min(int(self() * k), k - 1)


def _stream(seed):
    return seed if isinstance(seed, UniformStream) else UniformStream(seed)


def peel_step(state, mode="percolation", seed=None):
    if state.terminated:
        raise TerminalState("exploration already reached the target")
    if mode not in MODES:
        raise InvalidArgument(f"unknown mode {mode!r}")
    u = _stream(seed)
    row, cdf = _float_row(state.m, state.n)
    k = min(int(np.searchsorted(cdf, u(), side="right")), len(row) - 1)
    tr = row[k]
    nk = Necklace(tr.kind, (state.m, state.n), tr.next, tr.side, tr.j, tr.regions, tr.region)
    if tr.kind != "terminate":
        if mode == "eden":
            # the seed edge is re-randomized along the new boundary
            nk.offset = u.integer(tr.next[0] + 2)
        elif tr.kind == "vertex":
            nk.offset = tr.side
    log = state.log + [nk]
    if tr.kind == "terminate":
        return PeelingState(state.m, state.n, state.steps + 1, log, True)
    return PeelingState(tr.next[0], tr.next[1], state.steps + 1, log, False)


def explore_until_target(m0, n0, mode="percolation", seed=None):
    if m0 < 0 or n0 < 0:
        raise InvalidArgument("m0 and n0 must be nonnegative")
    u = _stream(seed)
    st = PeelingState(m0, n0)
    while not st.terminated:
        st = peel_step(st, mode, u)
    return st


def reshuffle_necklaces(log, seed=None):
    """Re-draw every gluing offset uniformly over the necklace's outer
    boundary length; events and the (m, n) path are unchanged."""
    u = _stream(seed)
    out = []
    for nk in log:
        nk2 = Necklace(nk.kind, nk.before, nk.after, nk.side, nk.j, nk.regions, nk.region)
        if nk.after is not None:
            nk2.offset = u.integer(nk.after[0] + 2)
        out.append(nk2)
    return out


def triangles_observed(log):
    return sum(nk.triangles for nk in log)


def necklace_count(log):
    return sum(nk.kind != "terminate" for nk in log)


def exploration_stats(m0, n0, runs, pipeline="eden", seed=None):
    """(triangle counts, necklace counts, signatures) over many explorations.

    pipeline 'eden' runs Eden mode directly; 'reshuffled' runs percolation
    mode and reshuffles the log.  The signature is the tuple of
    (event, next state, offset) per necklace.
    """
    u = _stream(seed)
    tri = np.zeros(runs, dtype=int)
    neck = np.zeros(runs, dtype=int)
    sig = []
    for r in range(runs):
        if pipeline == "eden":
            log = explore_until_target(m0, n0, "eden", u).log
        elif pipeline == "reshuffled":
            log = reshuffle_necklaces(explore_until_target(m0, n0, "percolation", u).log, u)
        else:
            raise InvalidArgument(f"unknown pipeline {pipeline!r}")
        tri[r] = triangles_observed(log)
        neck[r] = necklace_count(log)
        sig.append(tuple((nk.kind, nk.after, nk.offset) for nk in log))
    return tri, neck, sig


def tv_distance(a, b):
    """Total variation distance between the empirical laws of two samples."""
    ca, cb = Counter(a), Counter(b)
    na, nb = len(a), len(b)
    return 0.5 * sum(abs(ca[k] / na - cb[k] / nb) for k in set(ca) | set(cb))


# ---- Mullin encoding ------------------------------------------------------

STEPS = {(1, 0), (-1, 0), (0, 1), (0, -1)}


@dataclass
class DecoratedMap:
    """Rotation system on half-edges 2e, 2e + 1 of edge e.

    ``vert[h]`` is the vertex of half-edge h, ``rot[v]`` its half-edges in
    counterclockwise order, starting at the root corner for v = 0.
    """
    n_vertices: int
    vert: list
    rot: list
    tree: list

    @property
    def n_edges(self):
        return len(self.tree)

    def _pos(self):
        pos = {}
        for v, hs in enumerate(self.rot):
            for i, h in enumerate(hs):
                pos[h] = (v, i)
        return pos

    def faces(self):
        pos = self._pos()
        seen = set()
        cycles = []
        for h in range(2 * self.n_edges):
            if h in seen:
                continue
            cyc = []
            x = h
            while x not in seen:
                seen.add(x)
                cyc.append(x)
                v, i = pos[x ^ 1]
                x = self.rot[v][(i + 1) % len(self.rot[v])]
            cycles.append(cyc)
        return cycles

    @property
    def n_faces(self):
        return len(self.faces()) if self.n_edges else 1

    def euler(self):
        return self.n_vertices - self.n_edges + self.n_faces

    def neighbors(self):
        """Adjacency lists with one entry per half-edge (loops twice)."""
        return [[self.vert[h ^ 1] for h in hs] for hs in self.rot]

    def edges(self):
        return [(self.vert[2 * e], self.vert[2 * e + 1]) for e in range(self.n_edges)]

    def validate(self):
        V = self.n_vertices
        if sum(self.tree) != V - 1:
            raise InvalidArgument("tree edges do not form a spanning tree")
        uf = _UF()
        for e, t in enumerate(self.tree):
            if t:
                a, b = self.vert[2 * e], self.vert[2 * e + 1]
                if uf.find(a) == uf.find(b):
                    raise InvalidArgument("tree edges contain a cycle")
                uf.union(a, b)
        if self.euler() != 2:
            raise InvalidArgument("rotation system is not planar")

    def rows(self):
        out = []
        for v, hs in enumerate(self.rot):
            for i, h in enumerate(hs):
                out.append((v, i, h // 2, self.vert[h ^ 1], int(self.tree[h // 2])))
        return out


def validate_walk(walk):
    x = y = 0
    for s in walk:
        s = tuple(s)
        if s not in STEPS:
            raise InvalidArgument(f"invalid step {s}")
        x += s[0]
        y += s[1]
        if x < 0 or y < 0:
            raise InvalidArgument("walk leaves the quadrant")
    if x or y:
        raise InvalidArgument("walk does not return to the origin")


def mullin(walk):
    """Tree-decorated map from a quadrant walk: x-steps trace the tree
    contour, y-steps open and close the remaining edges."""
    validate_walk(walk)
    rot = [[]]
    vert, tree = [], []
    parents = []
    chords = []
    cur = 0
    for s in walk:
        s = tuple(s)
        if s == (1, 0):
            e = len(tree)
            w = len(rot)
            tree.append(True)
            vert += [cur, w]
            rot[cur].append(2 * e)
            rot.append([2 * e + 1])
            parents.append(cur)
            cur = w
        elif s == (-1, 0):
            cur = parents.pop()
        elif s == (0, 1):
            e = len(tree)
            tree.append(False)
            vert += [cur, None]
            rot[cur].append(2 * e)
            chords.append(e)
        else:
            e = chords.pop()
            vert[2 * e + 1] = cur
            rot[cur].append(2 * e + 1)
    return DecoratedMap(len(rot), vert, rot, tree)


def mullin_inverse(dmap):
    dmap.validate()
    pos = dmap._pos()
    out = []
    seen = set()

    def visit(v, start, skip_first):
        hs = dmap.rot[v]
        k = len(hs)
        for s in range(1 if skip_first else 0, k):
            h = hs[(start + s) % k]
            e = h // 2
            if dmap.tree[e]:
                out.append((1, 0))
                w, i = pos[h ^ 1]
                visit(w, i, True)
                out.append((-1, 0))
            else:
                out.append((0, -1) if (h ^ 1) in seen else (0, 1))
                seen.add(h)

    visit(0, 0, False)
    return out


def enumerate_walks(n):
    """All quadrant walks of length 2n from the origin to itself."""
    res = []

    def rec(path, x, y, left):
        if x + y > left:
            return
        if left == 0:
            res.append(list(path))
            return
        for s in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nx, ny = x + s[0], y + s[1]
            if nx >= 0 and ny >= 0:
                path.append(s)
                rec(path, nx, ny, left - 1)
                path.pop()

    rec([], 0, 0, 2 * n)
    return res


def _catalan(k):
    return math.comb(2 * k, k) // (k + 1)


def _dyck(k, u):
    """Uniform Dyck word of semilength k (cycle lemma)."""
    if k == 0:
        return []
    seq = [1] * k + [-1] * (k + 1)
    for i in range(len(seq) - 1, 0, -1):
        j = u.integer(i + 1)
        seq[i], seq[j] = seq[j], seq[i]
    s, best, arg = 0, 1, 0
    for i, x in enumerate(seq):
        s += x
        if s < best:
            best, arg = s, i
    rot = seq[arg + 1:] + seq[:arg + 1]
    return rot[:-1]


def sample_walk(n, seed=None):
    """Uniform quadrant walk of length 2n."""
    u = _stream(seed)
    w = [math.comb(2 * n, 2 * m) * _catalan(m) * _catalan(n - m) for m in range(n + 1)]
    tot = sum(w)
    r = u() * tot
    m = 0
    acc = w[0]
    while acc <= r and m < n:
        m += 1
        acc += w[m]
    a = _dyck(m, u)
    b = _dyck(n - m, u)
    # uniform choice of 2m positions out of 2n for the x-steps
    idx = list(range(2 * n))
    for i in range(2 * n - 1, 0, -1):
        j = u.integer(i + 1)
        idx[i], idx[j] = idx[j], idx[i]
    xs = set(idx[:2 * m])
    walk = []
    ia = ib = 0
    for p in range(2 * n):
        if p in xs:
            walk.append((a[ia], 0))
            ia += 1
        else:
            walk.append((0, b[ib]))
            ib += 1
    return walk


# ---- spanning trees and walks ---------------------------------------------

def lerw(adj, a, b, seed=None):
    """Loop-erased random walk from a stopped on hitting b (list of vertices)."""
    u = _stream(seed)
    path = [a]
    where = {a: 0}
    v = a
    while v != b:
        v = adj[v][u.integer(len(adj[v]))]
        if v in where:
            i = where[v]
            for x in path[i + 1:]:
                del where[x]
            del path[i + 1:]
        else:
            where[v] = len(path)
            path.append(v)
    return path


def wilson_ust(adj, root=0, seed=None):
    """Uniform spanning tree by Wilson's algorithm.

    Returns {vertex: (parent, slot)} where slot indexes adj[vertex], which
    distinguishes parallel edges.
    """
    u = _stream(seed)
    V = len(adj)
    in_tree = [False] * V
    in_tree[root] = True
    nxt = [None] * V
    for s in range(V):
        v = s
        while not in_tree[v]:
            k = u.integer(len(adj[v]))
            nxt[v] = k
            v = adj[v][k]
        v = s
        while not in_tree[v]:
            in_tree[v] = True
            v = adj[v][nxt[v]]
    return {v: (adj[v][nxt[v]], nxt[v]) for v in range(V) if v != root}


def dla_on_graph(adj, seed_vertex, target, u, k_stat=None):
    """Edge DLA: walks from the target add the last edge crossed before
    entering the cluster, until the target joins.  Returns (edges added,
    cluster after k_stat steps or None)."""
    member = {seed_vertex}
    steps = 0
    snap = None
    while target not in member:
        v = target
        while True:
            w = adj[v][u.integer(len(adj[v]))]
            if w in member:
                break
            v = w
        member.add(v)
        steps += 1
        if k_stat is not None and steps == k_stat:
            snap = set(member)
    return steps, snap


def compare_dla_lerw(n=8, samples=10_000, seed=None, k=2):
    """Edge counts and k-step boundary statistics of LERW and DLA on the
    same ensemble of Mullin-sampled tree-decorated maps with n edges.

    The k-step statistic is the number of half-edges hanging off the
    unzipped polygon (degree sum of the cluster minus 2k), or -1 if the
    target is reached within k steps.
    """
    u = _stream(seed)
    lerw_len = np.zeros(samples, dtype=int)
    dla_len = np.zeros(samples, dtype=int)
    lerw_k = np.zeros(samples, dtype=int)
    dla_k = np.zeros(samples, dtype=int)
    for s in range(samples):
        while True:
            dm = mullin(sample_walk(n, u))
            if dm.n_vertices >= 2:
                break
        adj = dm.neighbors()
        V = dm.n_vertices
        a = u.integer(V)
        b = u.integer(V - 1)
        b = b + (b >= a)
        deg = [len(x) for x in adj]
        # path from the seed a: reverse of the loop erasure of a walk from b
        path = lerw(adj, b, a, u)[::-1]
        lerw_len[s] = len(path) - 1
        lerw_k[s] = sum(deg[x] for x in path[:k + 1]) - 2 * k if len(path) - 1 > k else -1
        steps, snap = dla_on_graph(adj, a, b, u, k)
        dla_len[s] = steps
        dla_k[s] = sum(deg[x] for x in snap) - 2 * k if steps > k else -1
    return {
        "lerw_edges": lerw_len, "dla_edges": dla_len,
        "lerw_k": lerw_k, "dla_k": dla_k,
        "tv_edges": tv_distance(lerw_len.tolist(), dla_len.tolist()),
        "tv_k": tv_distance(lerw_k.tolist(), dla_k.tolist()),
    }
