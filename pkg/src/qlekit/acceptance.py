"""End-to-end acceptance checks.

Each check takes ``reduced`` (smaller samples for a quick selftest; the
statistical thresholds then widen by the square root of the sample ratio)
and returns a CheckResult.  Full-size runs use the stated thresholds.
"""
import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats
from scipy.sparse.linalg import splu

from . import field, growth, loewner, lqg, maps, qle, scaling, sle
from .lqg import CircleMeasure


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _widen(tol, full, used):
    return tol * math.sqrt(full / used)


def check_combinatorics(reduced=False):
    bad = [(m, n) for m in range(6) for n in range(6 - m)
           if maps.enumerate_triangulations(m, n) != maps.phi(n, m)]
    ratio = maps.phi(2001, 0) / maps.phi(2000, 0)
    ok = not bad and maps.phi(0, 0) == 1 and abs(ratio / 13.5 - 1) < 0.01
    return ok, f"enumeration mismatches={bad}, phi(0,0)={maps.phi(0, 0)}, ratio(2000)={ratio:.4f}"


def check_peeling_kernel(reduced=False):
    sums = {(m, n): sum(t.prob for t in maps.peeling_kernel(m, n)) for m in range(11)
            for n in range(11)}
    bad = [k for k, s in sums.items() if s != 1]
    same = maps.kernel_rows_csv(10, 10, "percolation") == maps.kernel_rows_csv(10, 10, "eden")
    return not bad and same, f"rows not summing to 1: {len(bad)}, tables identical: {same}"


def check_reshuffling(reduced=False):
    runs = 20_000 if reduced else 100_000
    tol = _widen(0.01, 100_000, runs)
    tri_e, neck_e, _ = maps.exploration_stats(2, 3, runs, "eden", seed=301)
    tri_r, neck_r, _ = maps.exploration_stats(2, 3, runs, "reshuffled", seed=302)
    tv_t = maps.tv_distance(tri_e.tolist(), tri_r.tolist())
    tv_n = maps.tv_distance(neck_e.tolist(), neck_r.tolist())
    return max(tv_t, tv_n) < tol, f"TV triangles={tv_t:.4f}, TV necklaces={tv_n:.4f} (< {tol:.4f})"


def check_dla_lerw(reduced=False):
    samples = 20_000 if reduced else 100_000
    tol = _widen(0.02, 100_000, samples)
    r = maps.compare_dla_lerw(8, samples, seed=401)
    return r["tv_edges"] < tol, f"TV edge counts={r['tv_edges']:.4f}, TV k=2 stat={r['tv_k']:.4f} (< {tol:.4f})"


def _random_driving(rng, T, dt):
    slices = []
    for _ in range(int(round(T / dt))):
        if rng.random() < 0.5:
            k = rng.integers(1, 4)
            slices.append(CircleMeasure(atoms=(rng.uniform(0, 2 * np.pi, k), rng.random(k) + 0.1)))
        else:
            M = 256
            th = 2 * np.pi * np.arange(M) / M
            c = rng.normal(size=3)
            w = np.exp(c[0] * np.cos(th) + c[1] * np.sin(2 * th) + c[2] * np.cos(3 * th))
            slices.append(CircleMeasure(weights=w / w.sum()))
    return loewner.DrivingMeasure(dt, [s.normalized() for s in slices])


def check_loewner(reduced=False):
    T = 0.5
    z = np.array([0.3, -0.2 + 0.4j, 0.1j, 0.55 * np.exp(2j)])
    st = loewner.solve_forward(loewner.uniform_driving(T, 0.05), z, T)[-1]
    err_u = float(np.abs(st.images - math.exp(T) * z).max())
    rng = np.random.default_rng(501)
    err_cap = 0.0
    err_rt = 0.0
    probes = np.array([0.2, -0.3j, 0.4 + 0.1j])
    for _ in range(20):
        d = _random_driving(rng, 0.3, 0.05)
        fw = loewner.solve_forward(d, probes, 0.3)[-1]
        err_cap = max(err_cap, abs(fw.deriv0 - math.exp(0.3)))
        live = ~fw.swallowed
        back = loewner.inverse_map(d, 0.3, fw.images[live])
        err_rt = max(err_rt, float(np.abs(back - probes[live]).max()))
    # zipper round trip: trace of a smooth driving, unrolled again
    W = lambda t: 0.7 + math.sin(8 * t)
    dt = 0.01
    curve = loewner.tip_path(W, np.linspace(0, 0.2, 41))
    ext, _ = loewner.extract_driving(curve, dt)
    ref = loewner.atom_driving([W((k + 0.5) * dt) for k in range(len(ext.slices))], dt)
    cara = loewner.caratheodory_distance(ref, ext, 0.5, [ext.T / 2, ext.T], resolution=64)
    ok = err_u < 1e-8 and err_cap < 1e-6 and err_rt < 1e-6 and cara < 1e-2
    return ok, (f"uniform err={err_u:.2e}, capacity err={err_cap:.2e}, "
                f"reverse-forward err={err_rt:.2e}, Caratheodory={cara:.2e}")


def check_ito(reduced=False):
    runs = 2_000 if reduced else 10_000
    vtol = _widen(0.05, 10_000, runs)
    parts, ok = [], True
    for kappa, rho in ((2, None), (6, None), (8, None), (6, 2)):
        s = sle.verify_fh_ito(kappa, rho, 0.3, 0.1, 1e-3, runs, seed=600 + kappa + (rho or 0))
        zs = (s.mean - s.predicted_drift) / s.se_mean
        good = abs(zs) < 3
        txt = f"k={kappa}{'' if rho is None else ' rho=2'} drift z={zs:+.2f}"
        if rho is None:
            rel = s.var / s.predicted_var - 1
            good = good and abs(rel) < vtol
            txt += f" var rel={rel:+.3f}"
        ok = ok and good
        parts.append(txt)
    return ok, "; ".join(parts)


def check_green_flow(reduced=False):
    d1 = sle.verify_green_flow("dirichlet", lambda t: 0.0, 0.3, -0.2j, 0.05)
    d2 = sle.verify_green_flow("dirichlet", lambda t: math.sin(6 * t), 0.3, -0.2j, 0.05)
    zs = ([0.3, 0.1 + 0.2j, -0.4], [1.0, -0.5, -0.5])
    ws = ([0.5j, -0.3 - 0.3j], [1.0, -1.0])
    d3 = sle.verify_green_flow("neumann", lambda t: math.sin(6 * t), zs, ws, 0.05)
    dev = max(d1, d2, d3)
    return dev < 1e-4, f"max deviation={dev:.2e} (dirichlet {d1:.1e}/{d2:.1e}, neumann {d3:.1e})"


def check_gff(reduced=False):
    n = 33
    count = 2_000 if reduced else 10_000
    samples = field.sample_dgff_batch(n, "zero", count, seed=801)
    idx = [(i, j) for i in range(8, 25, 4) for j in range(8, 25, 4)]
    X = np.array([samples[:, i, j] for i, j in idx])
    emp = np.cov(X)
    lu = splu(field.dirichlet_laplacian(n))
    m = n - 2
    cols = []
    for i, j in idx:
        e = np.zeros(m * m)
        e[(i - 1) * m + (j - 1)] = 1.0
        cols.append(lu.solve(e))
    green = field.NORMALIZATION * np.array([[c[(i - 1) * m + (j - 1)] for i, j in idx] for c in cols])
    rel_f = np.linalg.norm(emp - green) / np.linalg.norm(green)
    sd = np.sqrt(np.diag(green))
    rel_e = float((np.abs(emp - green) / np.outer(sd, sd)).max())
    rel_d = float(np.abs(np.diag(emp) / np.diag(green) - 1).max())
    cov_ok = max(rel_e, rel_d) < _widen(0.05, 10_000, count)
    # circle-average variance against log(1/eps)
    S = 50 if reduced else 200
    g = np.linspace(0.35, 0.65, 8)
    zs = (g[:, None] + 1j * g[None, :]).ravel()
    eps = 2.0 ** -np.arange(3, 8)
    acc = np.zeros(len(eps))
    for s in range(S):
        f = field.sample_dgff(1024, seed=8000 + s)
        for k, e in enumerate(eps):
            acc[k] += np.mean(field.circle_averages(f, zs, e) ** 2)
    slope = np.polyfit(np.log(1 / eps), acc / S, 1)[0]
    slope_ok = abs(slope - 1) < _widen(0.1, 200, S)
    # gradient of a harmonic field against central differences
    rng = np.random.default_rng(802)
    hf = field.HarmonicDiskField(rng.normal(size=12), rng.normal(size=12),
                                 [(0.7, np.exp(0.4j)), (-0.3, 1.2 * np.exp(2j) / 1.2)])
    pts = 0.7 * np.sqrt(rng.random(50)) * np.exp(2j * np.pi * rng.random(50))
    h = 1e-6
    fd = np.stack([(field.eval_field(hf, pts + h) - field.eval_field(hf, pts - h)) / (2 * h),
                   (field.eval_field(hf, pts + 1j * h) - field.eval_field(hf, pts - 1j * h)) / (2 * h)],
                  axis=-1)
    gr = field.eval_field(hf, pts, "gradient")
    grad_err = float((np.linalg.norm(gr - fd, axis=-1) / np.linalg.norm(gr, axis=-1)).max())
    ok = cov_ok and slope_ok and grad_err < 1e-5
    return ok, (f"cov max scaled entry err={rel_e:.3f}, max diag rel={rel_d:.3f} (Frobenius {rel_f:.3f}), slope={slope:.3f}, "
                f"gradient rel err={grad_err:.1e}")


def _tiling_ok(tiling, mg):
    n = tiling.n
    cover = np.zeros((n, n), dtype=int)
    for i, j, s, _, _ in tiling.leaves:
        cover[i:i + s, j:j + s] += 1
    if not (cover == 1).all():
        return False, "leaves do not partition the grid"
    nodes = {(i, j, s): m for i, j, s, m, _ in tiling.leaves + tiling.internal}
    for i, j, s, m, _ in tiling.internal:
        h = s // 2
        c = [nodes[(i + a, j + b, h)] for a, b in ((0, 0), (h, 0), (0, h), (h, h))]
        if m != (c[0] + c[1]) + (c[2] + c[3]):
            return False, "parent mass differs from the sum of its children"
        if m < tiling.delta:
            return False, "split square below threshold"
    for i, j, s, m, _ in tiling.leaves:
        if m >= tiling.delta and s > 1:
            return False, "leaf at or above threshold"
        if s < n:
            p = 2 * s
            if nodes[(i - i % p, j - j % p, p)] < tiling.delta:
                return False, "leaf parent below threshold"
    if abs(math.fsum(m for *_, m, _ in tiling.leaves) - mg.total) > 1e-12:
        return False, "leaf masses do not add to the total"
    return True, ""


def check_tiling(reduced=False):
    fields = 20 if reduced else 100
    for s in range(fields):
        f = field.sample_dgff(64, seed=900 + s)
        mg = lqg.lqg_mass(f, 1.0 + (s % 3) * 0.5)
        t = lqg.square_decompose(mg, 2.0 ** -10)
        ok, why = _tiling_ok(t, mg)
        if not ok:
            return False, f"field {s}: {why}"
    mg = lqg.lqg_mass(field.sample_dgff(64, seed=999), 0.0)
    t = lqg.square_decompose(mg, 2.0 ** -6 * 1.000001)
    sizes = {s for _, _, s, _, _ in t.leaves}
    grid_ok = len(t.leaves) == 64 and sizes == {8}
    return grid_ok, f"{fields} random tilings consistent; gamma=0 leaves={len(t.leaves)} sizes={sorted(sizes)}"


def check_qle(reduced=False):
    kappa = 6
    # pinning
    st = qle.qle_init(kappa, 32, seed=1101)
    pins = [field.eval_field(st.field, 0)]
    for b in range(5):
        st = qle.qle_block(st, 0.05, 1e-3, seed=1102 + b)
        pins.append(float(field.eval_field(st.field, 0)))
    pin_ok = all(p == 0 for p in pins)
    # atom law against the closed-form density
    st0 = qle.qle_init(kappa, 8, seed=1110)
    M = 4096
    th = 2 * np.pi * np.arange(M) / M
    logw = qle.atom_log_weights(st0.field, kappa, M)
    p = np.exp(logw - logw.max())
    p /= p.sum()
    c = st0.field.coef
    direct = (np.real(np.polyval(np.concatenate([c[::-1], [0]]), np.exp(1j * th))))
    (g, x), = st0.field.singularities
    direct = -(direct + g * np.log(np.abs(np.exp(1j * th) - x))) / math.sqrt(kappa)
    q = np.exp(direct - direct.max())
    q /= q.sum()
    tv_atom = 0.5 * float(np.abs(p - q).sum())
    # stationarity
    runs = 1_000 if reduced else 10_000
    vals, degraded = qle.qle_batch(kappa, 32, 0.05, 10, runs, 1e-3, seed=1120)
    ks = stats.ks_2samp(vals[0, :, 0], vals[-1, :, 0])
    ks_ok = ks.pvalue > 0.01
    # one block with N = 0 against the coupling function
    dt, delta = 1e-4, 0.05
    probes = np.array([0.5, 0.3j, -0.2 + 0.1j, 0.45 * np.exp(2j), -0.4])
    run = sle.sample_radial_sle(kappa, delta, dt, probes, seed=1130)
    half = np.concatenate([[0.0], np.cumsum(run.increments.ravel() * math.sqrt(kappa))])
    Wd = half[-1]
    fld = field.HarmonicDiskField([], [], [(2 / math.sqrt(kappa), np.exp(1j * Wd))])
    s0 = qle.QleState(fld, Wd, 0.0, kappa, 0, qle.origin_coefficient(kappa))
    s1 = qle.qle_block(s0, delta, dt, atom=Wd, driving=half[::-1] - Wd, noise=False,
                       method="sde", probes=probes)
    c0 = -qle.origin_coefficient(kappa)
    oracle = np.array([sle.coupling_h(run, zz, delta) for zz in probes])
    oracle += c0 * np.log(np.abs(probes)) - delta / math.sqrt(kappa)
    dev = float(np.abs(s1.probe_values - oracle).max())
    ok = pin_ok and tv_atom < 1e-10 and ks_ok and dev < 1e-3
    return ok, (f"pinned={pin_ok}, atom TV={tv_atom:.1e}, KS p={ks.pvalue:.3f} "
                f"(degraded refits {degraded:.3f}), N=0 deviation={dev:.1e}")


def check_scaling(reduced=False):
    d_ok = scaling.watabiki_d(0) == 2 and scaling.watabiki_d(Fraction(8, 3)) == 4
    pts = [scaling.eta_curves(Fraction(2))[0], scaling.eta_curves(Fraction(8, 3))[1],
           scaling.eta_curves(Fraction(4))[1]]
    pts_ok = pts == [1, 0, Fraction(1, 4)]
    worst = 0.0
    for g2 in np.linspace(0.05, 4, 400):
        up, mid = scaling.eta_curves(float(g2))
        for curve, target in (("upper", up), ("middle", mid)):
            r = scaling.exponent_record(g2, curve)
            worst = max(worst, abs(r.eta - target), abs(r.alpha * r.Q - (r.beta - r.eta - 1)))
            g = scaling.relation_solve(alpha=r.alpha, beta=r.beta, eta=r.eta)
            worst = max(worst, abs(g - r.gamma))
    return d_ok and pts_ok and worst < 1e-12, f"d exact={d_ok}, curve points={pts}, sweep err={worst:.1e}"


CHECKS = [
    (1, "exact combinatorics", check_combinatorics),
    (2, "peeling kernel", check_peeling_kernel),
    (3, "reshuffling statistics", check_reshuffling),
    (4, "DLA equals reshuffled LERW", check_dla_lerw),
    (5, "Loewner solver", check_loewner),
    (6, "coupling Ito checks", check_ito),
    (7, "Green-flow identity", check_green_flow),
    (8, "GFF suite", check_gff),
    (9, "LQG tiling", check_tiling),
    (10, "growth kernels", None),
    (11, "QLE chain", check_qle),
    (12, "scaling calculators", check_scaling),
]


def check_growth(reduced=False):
    # Eden and exponential FPP kernels on small graphs
    graphs = [
        growth.graph_from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]),
        growth.graph_from_edges(5, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 1), (1, 3)]),
        growth.graph_from_edges(6, [(0, 1), (0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)]),
        growth.grid_graph(2, seed=0),
    ]
    g8 = growth.grid_graph(3, seed=4)
    g8.adj = [[y for y in nb if y != 8] for nb in g8.adj[:8]]
    graphs.append(g8)
    same = all(growth.kernel_table(g, growth.eden_kernel) == growth.kernel_table(g, growth.race_kernel)
               for g in graphs)
    # walk sampler against the exact harmonic measure
    g = growth.grid_graph(7, target=0)
    member = np.zeros(g.V, bool)
    member[[24, 25, 31]] = True
    edges, p = growth.harmonic_measure_exact(g, member, 0)
    walks = 200_000 if reduced else 1_000_000
    hits = growth.walk_hits(g, member, 0, walks, seed=1001)
    index = {e: k for k, e in enumerate(edges)}
    counts = np.zeros(len(edges))
    np.add.at(counts, [index[(int(x), int(c))] for x, c in hits], 1)
    tv = 0.5 * float(np.abs(counts / walks - p).sum())
    tol = _widen(0.01, 1_000_000, walks)
    return same and tv < tol, f"Eden = FPP kernels: {same}; walk TV={tv:.4f} (< {tol:.4f})"


CHECKS[9] = (10, "growth kernels", check_growth)


def run_check(number, reduced=False):
    num, name, fn = CHECKS[number - 1]
    t = time.time()
    try:
        ok, detail = fn(reduced)
    except Exception as exc:  # report, do not hide
        ok, detail = False, f"raised {type(exc).__name__}: {exc}"
    return CheckResult(num, name, bool(ok), detail, time.time() - t)


def run_all(reduced=False, numbers=None, echo=print):
    out = []
    for num, _, _ in CHECKS:
        if numbers and num not in numbers:
            continue
        r = run_check(num, reduced)
        if echo:
            echo(r.line())
        out.append(r)
    return out
