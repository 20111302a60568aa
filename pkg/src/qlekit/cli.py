"""Command line entry point: ``qlekit <subcommand> [options]``.

Every subcommand writes its table (CSV or JSON), optional image and a
``manifest.json`` into ``--out``.  Exit codes: 0 success, 1 invalid
arguments, 2 numerical failure, 3 failed statistical test (selftest).
"""
import argparse
import configparser
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from . import field, growth, io, loewner, lqg, maps, qle, scaling, sle
from .errors import InvalidArgument, QleError
from .rng import child_seeds

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_STATISTICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _complex(s):
    try:
        return complex(s.replace(" ", ""))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a complex number: {s!r}") from exc


def _fraction(s):
    try:
        return Fraction(s)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from exc


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="qlekit-out", help="output directory")
    p.add_argument("--config", help="file of key = value lines overriding defaults")
    p.add_argument("--format", choices=["csv", "json", "ppm", "png"], default="csv")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")
    return p


def build_parser():
    common = _common()
    parser = _Parser(prog="qlekit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    p = add("gff-sample", help="lattice Gaussian free field sample")
    p.add_argument("--n", type=int, default=129)
    p.add_argument("--bc", choices=["zero", "free"], default="zero")

    p = add("lqg-tile", help="dyadic square decomposition of an LQG mass")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1e-3)

    p = add("grow", help="Eden, DLA or eta-DBM cluster growth")
    p.add_argument("model", choices=["eden", "dla", "dbm"])
    p.add_argument("--graph", choices=["grid", "tiling"], default="grid")
    p.add_argument("--n", type=int, default=33)
    p.add_argument("--gamma", type=float, default=1.0, help="LQG parameter for --graph tiling")
    p.add_argument("--delta", type=float, default=1e-3, help="mass threshold for --graph tiling")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--clock", choices=["steps", "capacity"], default="steps")
    p.add_argument("--sampler", choices=["exact", "walk"], default="exact")
    p.add_argument("--runs", type=int, default=1)

    p = add("fpp", help="first passage percolation ball on a grid")
    p.add_argument("--n", type=int, default=33)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--t", type=float)
    p.add_argument("--k", type=int)

    p = add("loewner", help="radial Loewner flows and the zipper")
    p.add_argument("mode", choices=["forward", "reverse", "extract"])
    g = p.add_mutually_exclusive_group()
    g.add_argument("--uniform", action="store_true", help="uniform driving measure")
    g.add_argument("--theta", type=float, help="constant point-mass driving at this angle")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--probe", type=_complex, action="append", help="point to track (repeatable)")
    p.add_argument("--curve", help="CSV of x,y points for extract (default: a sine-driven trace)")
    p.add_argument("--points", type=int, default=41, help="trace points for the default curve")

    p = add("sle", help="radial SLE paths and coupling checks")
    p.add_argument("mode", choices=["run", "verify-ito", "verify-green"])
    p.add_argument("--kappa", type=float, default=6.0)
    p.add_argument("--rho", type=float)
    p.add_argument("--T", type=float, default=0.1)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--z", type=_complex, action="append", help="tracked point (repeatable)")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--kind", choices=["dirichlet", "neumann"], default="dirichlet")

    p = add("qle", help="quantum Loewner evolution")
    p.add_argument("mode", choices=["init", "run"])
    p.add_argument("--kappa", type=float, default=6.0)
    p.add_argument("--N", type=int, default=32)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--T", type=float, default=0.5)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--runs", type=int, default=1)

    p = add("maps", help="planar map combinatorics and peeling")
    p.add_argument("mode", choices=["phi", "peel", "explore", "reshuffle", "mullin", "wilson",
                                    "compare-dla-lerw"])
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--peel-mode", choices=list(maps.MODES), default="percolation")
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--k", type=int, default=2)

    p = add("scaling", help="exponent tables")
    p.add_argument("mode", choices=["table", "curves"])
    p.add_argument("--gamma2", type=_fraction, action="append",
                   help="gamma^2 value for curves (repeatable; default grid k/12)")
    p.add_argument("--kappa", type=_fraction, action="append",
                   help="kappa value for table (repeatable; default grid k/4 on [0, 10])")

    p = add("selftest", help="acceptance suite (reduced samples unless --full)")
    p.add_argument("--full", action="store_true")
    p.add_argument("--only", type=int, action="append", help="criterion number (repeatable)")
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        cfg = io.read_config(known.config)
    except (OSError, configparser.Error) as exc:
        raise InvalidArgument(f"cannot read config: {exc}") from exc
    cmd = next((a for a in argv if not a.startswith("-")), None)
    sub = parser._subparsers._group_actions[0].choices.get(cmd)
    if sub is None:
        return
    dests = {a.dest: a for a in sub._actions}
    vals = {}
    for key, v in cfg.items():
        dest = key.replace("-", "_")
        if dest not in dests:
            raise InvalidArgument(f"unknown config key {key!r}")
        act = dests[dest]
        try:
            vals[dest] = _convert(act, v)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise InvalidArgument(f"bad value for {key!r}: {v!r}") from exc
    sub.set_defaults(**vals)


def _convert(act, v):
    if isinstance(act, argparse._StoreTrueAction):
        return v.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(act, argparse._AppendAction):
        return [act.type(x) if act.type else x for x in v.split(",")]
    if act.choices is not None and v not in act.choices:
        raise ValueError(v)
    return act.type(v) if act.type is not None else v


# helpers

class Output:
    def __init__(self, args):
        self.dir = args.out
        self.fmt = args.format
        self.files = []
        os.makedirs(self.dir, exist_ok=True)

    def path(self, name):
        p = os.path.join(self.dir, name)
        self.files.append(p)
        return p

    def table(self, name, header, rows):
        if self.fmt == "json":
            io.write_json(self.path(name + ".json"),
                          {"columns": list(header), "rows": [list(r) for r in rows]})
        else:
            io.write_csv(self.path(name + ".csv"), header, rows)

    def record(self, name, obj):
        io.write_json(self.path(name + ".json"), obj)

    def image(self, name, img):
        if self.fmt in ("ppm", "png"):
            self.files.append(io.write_image(os.path.join(self.dir, name), img, self.fmt))


def _map_runs(fn, args_list, jobs):
    if jobs <= 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, *zip(*args_list)))


def _c(z):
    return f"{z.real:.10g}{z.imag:+.10g}j"


# subcommands

def cmd_gff(args, out):
    fld = field.sample_dgff(args.n, args.bc, args.seed)
    n = fld.n
    out.table("gff", ["i", "j", "value"],
              ((i, j, fld.values[i, j]) for i in range(n) for j in range(n)))
    io.save_field(out.path("gff.bin"), fld)
    out.image("gff", io.gray_image(fld.values))
    print(f"sampled {n}x{n} field ({args.bc} boundary), variance {fld.values.var():.4f}")


def cmd_lqg(args, out):
    fld = field.sample_dgff(args.n, "zero", args.seed)
    mg = lqg.lqg_mass(fld, args.gamma)
    t = lqg.square_decompose(mg, args.delta)
    out.table("tiles", ["x", "y", "size", "mass", "depth"], t.as_rows())
    out.image("tiles", lqg.render_tiling(t))
    print(f"{len(t.leaves)} squares, {len(t.floor)} at the single-site floor")


def _grow_one(args, seed):
    if args.graph == "grid":
        g = growth.grid_graph(args.n, infinity=True)
    else:
        fld = field.sample_dgff(args.n, "zero", seed)
        g = growth.tiling_graph(lqg.square_decompose(lqg.lqg_mass(fld, args.gamma), args.delta))
    eta = {"eden": 0.0, "dla": 1.0}.get(args.model, args.eta)
    return g, growth.grow_dbm(g, eta, args.steps, args.clock, args.sampler, seed)


def _grow_rows(args, seed):
    g, cl = _grow_one(args, seed)
    rows = []
    for step, x, c, wt, clk in cl.history:
        cx, cy = g.coords[x]
        rows.append((step, x, c, cx, cy, wt, clk))
    return rows, cl.status


def cmd_grow(args, out):
    if args.graph == "grid" and args.n < 3:
        raise InvalidArgument("n must be at least 3")
    seeds = [args.seed] if args.runs == 1 else child_seeds(args.seed, args.runs)
    res = _map_runs(_grow_rows, [(args, s) for s in seeds], args.jobs)
    rows = [(r, *row) for r, (rr, _) in enumerate(res) for row in rr]
    out.table("growth", ["run", "step", "vertex", "cluster_vertex", "x", "y", "weight", "clock"], rows)
    if args.format in ("ppm", "png") and args.graph == "grid":
        g, cl = _grow_one(args, seeds[0])
        out.image("growth", growth.growth_image(g, cl, args.n))
    for r, (rr, status) in enumerate(res):
        print(f"run {r}: {len(rr)} additions, status {status}")


def cmd_fpp(args, out):
    g = growth.grid_graph(args.n)
    if args.t is None and args.k is None:
        args.k = args.n * args.n // 4
    cl = growth.fpp_ball(g, args.rate, args.t, args.k, args.seed)
    rows = []
    for order, v, parent, _, d in cl.history:
        cx, cy = g.coords[v]
        rows.append((order, v, parent, cx, cy, d))
    out.table("fpp", ["order", "vertex", "parent", "x", "y", "passage_time"], rows)
    out.image("fpp", growth.growth_image(g, cl, args.n))
    print(f"{len(rows)} vertices, radius {rows[-1][-1]:.4f}")


def _driving(args):
    if args.theta is not None:
        return loewner.constant_driving(lqg.point_mass(args.theta), args.T, args.dt)
    return loewner.uniform_driving(args.T, args.dt)


def cmd_loewner(args, out):
    if args.mode == "extract":
        if args.curve:
            _, body = io.read_csv(args.curve)
            curve = np.array([float(x) + 1j * float(y) for x, y, *_ in body])
        else:
            W = lambda t: 0.7 + math.sin(8 * t)  # noqa: E731
            curve = loewner.tip_path(W, np.linspace(0, args.T, args.points))
        d, raw = loewner.extract_driving(curve, args.dt)
        rows = []
        for k, s in enumerate(d.slices):
            ang, mass = s.atoms
            rows.extend((k, k * d.dt, a, w) for a, w in zip(ang, mass))
        out.table("driving", ["slice", "t", "angle", "mass"], rows)
        out.table("increments", ["index", "capacity", "angle"],
                  [(i, c, a) for i, (c, a) in enumerate(raw)])
        print(f"extracted {len(d.slices)} slices, total capacity {float(raw[:, 0].sum()):.6f}")
        return
    probes = np.array(args.probe or [0.5], complex)
    drv = _driving(args)
    solve = loewner.solve_forward if args.mode == "forward" else loewner.solve_reverse
    st = solve(drv, probes, args.T, dt_max=args.dt)[-1]
    rows = []
    for k, z in enumerate(probes):
        w = st.images[k]
        rows.append((z.real, z.imag, w.real, w.imag, st.logderiv[k].real,
                     bool(st.swallowed[k]), st.swallow_time[k]))
        tau = "" if not st.swallowed[k] else f" swallow_time={st.swallow_time[k]:.10f}"
        print(f"g({_c(z)}) = {_c(w)} swallowed={str(bool(st.swallowed[k])).lower()}{tau}")
    out.table("loewner", ["z_re", "z_im", "image_re", "image_im", "log_abs_deriv", "swallowed",
                          "swallow_time"], rows)


def _sle_rows(args, seed, points):
    run = sle.sample_radial_sle(args.kappa, args.T, args.dt, points, seed, rho=args.rho)
    return run.to_rows(), run.status


def cmd_sle(args, out):
    if args.mode == "verify-ito":
        z = (args.z or [0.3])[0]
        s = sle.verify_fh_ito(args.kappa, args.rho, z, args.T, args.dt, args.runs, args.seed)
        d = s.as_dict()
        out.table("ito", ["quantity", "value"], sorted(d.items()))
        print(f"drift {s.mean:.5f} +- {s.se_mean:.5f} (predicted {s.predicted_drift:.5f}); "
              f"variance {s.var:.5f} (predicted {s.predicted_var:.5f})")
        return
    if args.mode == "verify-green":
        if args.kind == "dirichlet":
            dev = sle.verify_green_flow("dirichlet", lambda t: math.sin(6 * t), 0.3, -0.2j, args.T)
        else:
            dev = sle.verify_green_flow("neumann", lambda t: math.sin(6 * t),
                                        ([0.3, 0.1 + 0.2j, -0.4], [1.0, -0.5, -0.5]),
                                        ([0.5j, -0.3 - 0.3j], [1.0, -1.0]), args.T)
        out.table("green", ["kind", "T", "deviation"], [(args.kind, args.T, dev)])
        print(f"{args.kind} Green-flow deviation {dev:.3e}")
        return
    points = np.array(args.z or [0.3, 0.5j, -0.6], complex)
    seeds = [args.seed] if args.runs == 1 else child_seeds(args.seed, args.runs)
    res = _map_runs(_sle_rows, [(args, s, points) for s in seeds], args.jobs)
    rows = [(r, *row) for r, (rr, _) in enumerate(res) for row in rr]
    out.table("sle", ["run", "t", "W", "point", "image_re", "image_im", "log_abs_deriv"], rows)
    for r, (_, status) in enumerate(res):
        print(f"run {r}: {status}")


def _qle_traj(args, seed):
    tr = qle.qle_run(args.kappa, args.delta, args.T, args.N, args.dt, seed)
    hull = [(s.block, s.t, k, z.real, z.imag)
            for s, h in zip(tr.states[1:], tr.hulls) for k, z in enumerate(h)]
    atoms = [(s.block, s.t, s.atom, r, s.residual, s.status)
             for s, r in zip(tr.states, tr.conformal_radius)]
    return hull, atoms, [h for h in tr.hulls]


def cmd_qle(args, out):
    if args.mode == "init":
        st = qle.qle_init(args.kappa, args.N, args.seed)
        f = st.field
        rows = [(k + 1, f.a[k], f.b[k], f.variances[k]) for k in range(f.degree)]
        out.table("coefficients", ["k", "a", "b", "variance"], rows)
        out.record("state", {"kappa": args.kappa, "N": args.N, "atom": st.atom,
                             "origin_coefficient": st.origin_coef,
                             "singularities": [(g, x) for g, x in f.singularities]})
        print(f"atom {st.atom:.6f}, {f.degree} modes")
        return
    seeds = [args.seed] if args.runs == 1 else child_seeds(args.seed, args.runs)
    res = _map_runs(_qle_traj, [(args, s) for s in seeds], args.jobs)
    out.table("hulls", ["run", "block", "t", "index", "x", "y"],
              [(r, *row) for r, (h, _, _) in enumerate(res) for row in h])
    out.table("atoms", ["run", "block", "t", "atom", "conformal_radius", "residual", "status"],
              [(r, *row) for r, (_, a, _) in enumerate(res) for row in a])
    out.image("hulls", io.polyline_image(res[0][2]))
    for r, (_, a, _) in enumerate(res):
        print(f"run {r}: {len(a) - 1} blocks, final status {a[-1][-1]}")


def cmd_maps(args, out):
    mode = args.mode
    if mode == "phi":
        v = maps.phi(args.n, args.m)
        out.table("phi", ["n", "m", "phi"], [(args.n, args.m, v)])
        print(v)
    elif mode == "peel":
        st = maps.explore_until_target(args.m, args.n, args.peel_mode, args.seed)
        rows = [(k, nk.kind, *nk.before, *(nk.after or (None, None)), nk.side, nk.offset,
                 nk.triangles) for k, nk in enumerate(st.log)]
        out.table("peel", ["step", "event", "m_before", "n_before", "m_after", "n_after",
                           "side", "offset", "triangles"], rows)
        print(" -> ".join(f"({m},{n})" for m, n in st.path) + " -> target")
    elif mode in ("explore", "reshuffle"):
        pipe = "eden" if mode == "explore" else "reshuffled"
        tri, neck, _ = maps.exploration_stats(args.m, args.n, args.runs, pipe, args.seed)
        out.table(mode, ["run", "triangles", "necklaces"],
                  [(r, int(a), int(b)) for r, (a, b) in enumerate(zip(tri, neck))])
        print(f"mean triangles {tri.mean():.4f}, mean necklaces {neck.mean():.4f}")
    elif mode == "mullin":
        walk = maps.sample_walk(args.n, args.seed)
        dm = maps.mullin(walk)
        out.table("mullin", ["vertex", "slot", "edge", "neighbor", "in_tree"], dm.rows())
        print("walk " + "".join({(1, 0): "a", (-1, 0): "A", (0, 1): "b", (0, -1): "B"}[s]
                                for s in walk) + f", {dm.n_vertices} vertices, {dm.n_faces} faces")
    elif mode == "wilson":
        dm = maps.mullin(maps.sample_walk(args.n, args.seed))
        tree = maps.wilson_ust(dm.neighbors(), 0, args.seed + 1)
        out.table("wilson", ["vertex", "parent", "slot"],
                  [(v, p, s) for v, (p, s) in sorted(tree.items())])
        print(f"spanning tree with {len(tree)} edges on {dm.n_vertices} vertices")
    else:
        r = maps.compare_dla_lerw(args.n, args.runs, args.seed, args.k)
        out.table("dla_lerw", ["sample", "lerw_edges", "dla_edges", "lerw_k", "dla_k"],
                  [(s, *map(int, v)) for s, v in
                   enumerate(zip(r["lerw_edges"], r["dla_edges"], r["lerw_k"], r["dla_k"]))])
        print(f"TV edge counts {r['tv_edges']:.4f}, TV k-step statistic {r['tv_k']:.4f}")


def cmd_scaling(args, out):
    if args.mode == "curves":
        g2 = args.gamma2 or [Fraction(k, 12) for k in range(1, 49)]
        rows = [(float(a), float(u), float(m), t) for a, u, m, t in scaling.curves_table(g2)]
        out.table("curves", ["gamma2", "upper_eta", "middle_eta", "trivial_eta"], rows)
        xs = [r[0] for r in rows]
        out.image("curves", io.line_plot(xs, [[min(r[1], 6) for r in rows], [r[2] for r in rows],
                                              [r[3] for r in rows]]))
        print(f"{len(rows)} rows")
        return
    ks = [float(k) for k in (args.kappa or [Fraction(k, 4) for k in range(0, 41)])]
    rows = []
    for k in ks:
        g = scaling.gamma_of_kappa(k) if k > 0 else 0.0
        q = scaling.q_of_gamma(g) if g > 0 else math.inf
        rows.append((k, g, q, scaling.watabiki_d(k)))
    out.table("dimension", ["kappa", "gamma", "Q", "d"], rows)
    out.image("dimension", io.line_plot([r[0] for r in rows], [[r[3] for r in rows]]))
    print(f"d(0) = {scaling.watabiki_d(0)}, d(8/3) = {scaling.watabiki_d(Fraction(8, 3))}")


def cmd_selftest(args, out):
    from . import acceptance

    res = acceptance.run_all(reduced=not args.full, numbers=args.only)
    out.table("selftest", ["criterion", "name", "passed", "seconds", "detail"],
              [(r.number, r.name, r.passed, round(r.seconds, 1), r.detail) for r in res])
    return EXIT_OK if all(r.passed for r in res) else EXIT_STATISTICAL


COMMANDS = {
    "gff-sample": cmd_gff, "lqg-tile": cmd_lqg, "grow": cmd_grow, "fpp": cmd_fpp,
    "loewner": cmd_loewner, "sle": cmd_sle, "qle": cmd_qle, "maps": cmd_maps,
    "scaling": cmd_scaling, "selftest": cmd_selftest,
}


def _params(args):
    return {k: v for k, v in vars(args).items() if k not in ("out",)}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if args.jobs < 1:
            raise InvalidArgument("--jobs must be at least 1")
        out = Output(args)
        with io.Timer() as tm:
            code = COMMANDS[args.command](args, out) or EXIT_OK
        man = io.RunManifest(args.command, _params(args), args.seed, outputs=list(out.files),
                             wall_clock=tm.elapsed)
        man.write(out.dir)
        return code
    except (UsageError, InvalidArgument) as exc:
        print(f"qlekit: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except QleError as exc:
        print(f"qlekit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FloatingPointError as exc:
        print(f"qlekit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
