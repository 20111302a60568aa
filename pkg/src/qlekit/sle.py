"""Radial SLE sampling and numerical checks of the reverse SLE/GFF coupling.

Maps are integrated pathwise: the driving W is sampled on a half-step grid
and the Loewner ODE is stepped with RK4 against that path.  The centered
reverse map is f_t = e^{-i W_t} g_t, which carries the Ito terms of its SDE
automatically.
"""
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import InvalidArgument, OutOfDomain, SingularArgument
from .loewner import dphi_dz, phi
from .rng import make_rng
from .scaling import q_of_kappa


def poisson_kernels(z, u):
    """(P, Pbar, d_theta Pbar, P*) at z in the disk and u = e^{i theta}.

    P + i Pbar = (u + z) / (u - z) and P* = P - 1.
    """
    z = np.asarray(z, complex)
    u = np.asarray(u, complex)
    if np.any(np.abs(z) >= 1):
        raise OutOfDomain("z must lie in the open disk")
    k = (u + z) / (u - z)
    dth = np.real(-2 * z * u / (u - z) ** 2)
    return k.real, k.imag, dth, k.real - 1


@dataclass
class SleRun:
    """One SLE path with tracked points.

    ``images`` holds the uncentered map values (K+1, P) and ``logderiv`` the
    complex log of their z-derivatives; the centered reverse map is
    images * exp(-i W).  ``V`` is the uncentered force point, if any.
    """
    kappa: float
    times: np.ndarray
    W: np.ndarray
    points: np.ndarray
    images: np.ndarray
    logderiv: np.ndarray
    direction: str = "reverse"
    rho: float | None = None
    V: np.ndarray | None = None
    status: str = "ok"
    increments: np.ndarray | None = None
    swallowed: np.ndarray = dc_field(default=None)

    @property
    def U(self):
        return np.exp(1j * self.W)

    @property
    def centered(self):
        return self.images * np.exp(-1j * self.W)[:, None]

    @property
    def centered_derivative(self):
        return np.exp(self.logderiv - 1j * self.W[:, None])

    def to_rows(self):
        rows = []
        for k, t in enumerate(self.times):
            for p in range(len(self.points)):
                f = self.images[k, p]
                rows.append((t, self.W[k], p, f.real, f.imag, self.logderiv[k, p].real))
        return rows


def _check_kappa(kappa):
    if not kappa > 0:
        raise InvalidArgument("kappa must be positive")


def _step(u0, uh, u1, z, L, h, sign):
    """RK4 step of dz/dt = sign Phi(u, z), dL/dt = sign Phi_z(u, z)."""
    def f(u, zz):
        return sign * phi(u, zz), sign * dphi_dz(u, zz)

    k1, l1 = f(u0, z)
    k2, l2 = f(uh, z + 0.5 * h * k1)
    k3, l3 = f(uh, z + 0.5 * h * k2)
    k4, l4 = f(u1, z + h * k3)
    return (z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4),
            L + h / 6 * (l1 + 2 * l2 + 2 * l3 + l4))


def _force_drift(rho, W, Vang):
    # -(rho / 2) cot(X / 2) with X the angle from U to V
    X = np.mod(Vang - W, 2 * np.pi)
    return -0.5 * rho / np.tan(X / 2)


def simulate_paths(kappa, T, dt, points, R, rng, direction="reverse", rho=None, v0=None,
                   record=True, stop_tol=1e-6):
    """Vectorized core over R independent runs.

    Returns a dict with W (K+1, R), images and logderiv (K+1, R, P) when
    ``record`` is set (else only the final slice), the increments dB of
    shape (K, 2, R) at half steps, and per-run stop indices.
    """
    _check_kappa(kappa)
    if dt <= 0 or T < 0:
        raise InvalidArgument("need dt > 0 and T >= 0")
    K = int(round(T / dt))
    if K and abs(K * dt - T) > 1e-9 * max(1, T):
        raise InvalidArgument("T must be a multiple of dt")
    sign = -1 if direction == "reverse" else 1
    if direction not in ("reverse", "forward"):
        raise InvalidArgument(f"unknown direction {direction!r}")
    pts = np.atleast_1d(np.asarray(points, complex))
    if np.any(np.abs(pts) >= 1):
        raise OutOfDomain("tracked points must lie in the open disk")
    forced = rho is not None and rho != 0
    if forced:
        if direction != "reverse":
            raise InvalidArgument("the force point variant is reverse only")
        if v0 is None or abs(abs(v0) - 1) > 1e-12 or abs(v0 - 1) < 1e-12:
            raise InvalidArgument("v0 must lie on the circle away from 1")
    P = len(pts)
    z = np.broadcast_to(pts, (R, P)).copy()
    L = np.zeros((R, P), complex)
    W = np.zeros(R)
    Vang = np.full(R, float(np.angle(v0)) if forced else 0.0)
    alive = np.ones(R, bool)
    stop = np.full(R, K)
    gone = np.zeros((R, P), bool)
    dB = rng.standard_normal((K, 2, R)) * math.sqrt(dt / 2)
    sk = math.sqrt(kappa)
    h = dt
    out_W = [W.copy()]
    out_z = [z.copy()]
    out_L = [L.copy()]
    out_V = [Vang.copy()]
    for k in range(K):
        if forced:
            d0 = _force_drift(rho, W, Vang)
            Wh = W + sk * dB[k, 0] + d0 * h / 2
            d1 = _force_drift(rho, Wh, Vang)
            W1 = Wh + sk * dB[k, 1] + d1 * h / 2
        else:
            Wh = W + sk * dB[k, 0]
            W1 = Wh + sk * dB[k, 1]
        u0, uh, u1 = np.exp(1j * W), np.exp(1j * Wh), np.exp(1j * W1)
        zn, Ln = _step(u0[:, None], uh[:, None], u1[:, None], z, L, h, sign)
        if forced:
            v = np.exp(1j * Vang)[:, None]
            vn, _ = _step(u0[:, None], uh[:, None], u1[:, None], v, np.zeros_like(v), h, sign)
            Vn = np.angle(vn[:, 0])
            X = np.mod(Vn - W1, 2 * np.pi)
            hit = alive & ((X < stop_tol) | (X > 2 * np.pi - stop_tol))
            stop[hit] = k + 1
            alive &= ~hit
        if sign > 0:
            bad = ~np.isfinite(zn) | (np.abs(zn) >= 1 - 1e-9)
            gone |= bad
            zn = np.where(gone, z, zn)
            Ln = np.where(gone, L, Ln)
        keep = alive if not forced else (alive | (stop == k + 1))
        z = np.where(keep[:, None], zn, z)
        L = np.where(keep[:, None], Ln, L)
        W = np.where(keep, W1, W)
        if forced:
            Vang = np.where(keep, np.mod(Vn, 2 * np.pi), Vang)
        if record:
            out_W.append(W.copy())
            out_z.append(z.copy())
            out_L.append(L.copy())
            out_V.append(Vang.copy())
    if not record:
        out_W, out_z, out_L, out_V = [W], [z], [L], [Vang]
    return {
        "K": K, "W": np.array(out_W), "images": np.array(out_z), "logderiv": np.array(out_L),
        "V": np.array(out_V) if forced else None, "dB": dB, "stop": stop, "swallowed": gone,
    }


def sample_radial_sle(kappa, T, dt=1e-3, points=(0.0,), seed=None, direction="reverse",
                      rho=None, v0=None):
    """Sample one radial SLE_kappa (or reverse SLE_kappa(rho)) path."""
    rng = make_rng(seed)
    sim = simulate_paths(kappa, T, dt, points, 1, rng, direction, rho, v0)
    K = sim["K"]
    stop = int(sim["stop"][0])
    n = stop + 1
    run = SleRun(
        kappa=kappa,
        times=dt * np.arange(n),
        W=sim["W"][:n, 0],
        points=np.atleast_1d(np.asarray(points, complex)),
        images=sim["images"][:n, 0],
        logderiv=sim["logderiv"][:n, 0],
        direction=direction,
        rho=rho,
        V=None if sim["V"] is None else np.exp(1j * sim["V"][:n, 0]),
        status="ok" if stop == K else "force-point-collision",
        increments=sim["dB"][:, :, 0],
        swallowed=sim["swallowed"][0],
    )
    return run


def coupling_field(kappa, f, logabs_deriv, rho=None, Z=None):
    """The coupling harmonic function from centered map data.

    With rho, Z is the centered force point V / U.
    """
    Q = q_of_kappa(kappa)
    sk = math.sqrt(kappa)
    f = np.asarray(f, complex)
    if np.any(f == 0) or np.any(f == 1):
        raise SingularArgument("map value at 0 or 1")
    rho = rho or 0.0
    val = (2 / sk) * np.log(np.abs(f - 1)) - (kappa + 6 - rho) / (2 * sk) * np.log(np.abs(f))
    val = val + Q * logabs_deriv
    if rho:
        if np.any(f == Z):
            raise SingularArgument("map value at the force point")
        val = val - (rho / sk) * np.log(np.abs(f - Z))
    return val


def coupling_h(run, z, t):
    """Coupling function at a tracked point z and grid time t."""
    if run.direction != "reverse":
        raise InvalidArgument("coupling needs a reverse run")
    p = int(np.argmin(np.abs(run.points - complex(z))))
    if abs(run.points[p] - complex(z)) > 1e-12:
        raise InvalidArgument("z is not a tracked point")
    k = int(round(t / (run.times[1] - run.times[0]))) if len(run.times) > 1 else 0
    if k >= len(run.times) or abs(run.times[k] - t) > 1e-9:
        raise InvalidArgument("t is not on the run's time grid")
    f = run.centered[k, p]
    la = run.logderiv[k, p].real
    Z = None
    if run.rho:
        Z = run.V[k] / run.U[k]
    return float(coupling_field(run.kappa, f, la, run.rho, Z))


@dataclass
class ItoStats:
    kappa: float
    rho: float
    z: complex
    T: float
    n_runs: int
    mean: float
    se_mean: float
    predicted_drift: float
    var: float
    se_var: float
    predicted_var: float
    se_predicted_var: float
    truncated: int

    def as_dict(self):
        d = dict(self.__dict__)
        d["z"] = [self.z.real, self.z.imag]
        return d


def verify_fh_ito(kappa, rho=None, z=0.3, T=0.1, dt=1e-3, n_runs=10_000, seed=None,
                  v0=-1.0, batch=2500):
    """Monte Carlo drift and quadratic variation of the coupling function.

    The predicted drift is (2 - rho) T / (2 sqrt(kappa)); the predicted
    variance is the run average of int_0^T Pbar(1, f_s(z))^2 ds.
    """
    z = complex(z)
    if abs(z) > 0.8:
        raise OutOfDomain("need |z| <= 0.8")
    rng = make_rng(seed)
    rho_v = rho or 0.0
    incs, qvs = [], []
    trunc = 0
    h0 = float(coupling_field(kappa, z, 0.0, rho_v, v0 if rho_v else None))
    done = 0
    while done < n_runs:
        R = min(batch, n_runs - done)
        sim = simulate_paths(kappa, T, dt, [z], R, rng, "reverse", rho, v0 if rho_v else None)
        W = sim["W"]
        f = sim["images"][:, :, 0] * np.exp(-1j * W)
        la = sim["logderiv"][:, :, 0].real
        # quadratic variation integrand along each path, trapezoid rule
        pbar = np.imag((1 + f) / (1 - f))
        K = sim["K"]
        steps = np.arange(K + 1)[:, None]
        live = steps <= sim["stop"][None, :]
        sq = np.where(live, pbar ** 2, 0.0)
        qv = dt * (sq[1:] + sq[:-1]).sum(axis=0) / 2
        Z = None
        if rho_v:
            Z = np.exp(1j * (sim["V"][-1] - W[-1]))
        hT = coupling_field(kappa, f[-1], la[-1], rho_v, Z)
        incs.append(hT - h0)
        qvs.append(qv)
        trunc += int((sim["stop"] < K).sum())
        done += R
    inc = np.concatenate(incs)
    qv = np.concatenate(qvs)
    n = len(inc)
    m = float(inc.mean())
    v = float(inc.var(ddof=1))
    c = inc - m
    se_var = float(np.sqrt(np.var(c * c, ddof=1) / n))
    return ItoStats(kappa, rho_v, z, T, n, m, math.sqrt(v / n),
                    (2 - rho_v) * T / (2 * math.sqrt(kappa)), v, se_var,
                    float(qv.mean()), float(qv.std(ddof=1) / math.sqrt(n)), trunc)


def flow_path(angle, points, T, dt, sign=-1):
    """RK4 path of the Loewner flow for a deterministic angle function.

    Returns (times, images (K+1, P)).
    """
    K = int(round(T / dt))
    z = np.atleast_1d(np.asarray(points, complex)).copy()
    L = np.zeros_like(z)
    out = [z.copy()]
    for k in range(K):
        t = k * dt
        u0, uh, u1 = (np.exp(1j * angle(s)) for s in (t, t + dt / 2, t + dt))
        z, L = _step(u0, uh, u1, z, L, dt, sign)
        out.append(z.copy())
    return dt * np.arange(K + 1), np.array(out)


def _green_pair(kind, x, y):
    d = np.log(np.abs(x - y))
    c = np.log(np.abs(1 - x * np.conj(y)))
    return c - d if kind == "dirichlet" else -c - d


def verify_green_flow(kind, driving, z, w, T, dt=1e-3):
    """Max deviation between d/dt G(psi_t z, psi_t w) and the kernel product.

    ``driving`` is an angle function.  Dirichlet: the derivative equals
    P(psi z, u) P(psi w, u).  Neumann: ``z`` and ``w`` are probe sets paired
    against mean-zero weights (given as (points, weights)), which cancels
    the single-point terms and leaves -sum a_i b_j Pbar(psi z_i) Pbar(psi w_j).
    """
    if kind not in ("dirichlet", "neumann"):
        raise InvalidArgument(f"unknown kind {kind!r}")
    if T == 0:
        return 0.0
    if kind == "dirichlet":
        zs, a = np.array([complex(z)]), np.array([1.0])
        ws, b = np.array([complex(w)]), np.array([1.0])
    else:
        (zs, a), (ws, b) = z, w
        zs, ws = np.asarray(zs, complex), np.asarray(ws, complex)
        a, b = np.asarray(a, float), np.asarray(b, float)
        if abs(a.sum()) > 1e-12 or abs(b.sum()) > 1e-12:
            raise InvalidArgument("pairing weights must have mean zero")
    if np.any(zs[:, None] == ws[None, :]):
        raise SingularArgument("z = w")
    times, path = flow_path(driving, np.concatenate([zs, ws]), T, dt, -1)
    pz, pw = path[:, :len(zs)], path[:, len(zs):]
    G = np.einsum("i,kij,j->k", a, _green_pair(kind, pz[:, :, None], pw[:, None, :]), b)
    u = np.exp(1j * np.array([driving(t) for t in times]))[:, None]
    Pz, Pbz, _, _ = poisson_kernels(pz, u)
    Pw, Pbw, _, _ = poisson_kernels(pw, u)
    if kind == "dirichlet":
        pred = (Pz @ a) * (Pw @ b)
    else:
        pred = -(Pbz @ a) * (Pbw @ b)
    fd = (G[2:] - G[:-2]) / (2 * dt)
    return float(np.abs(fd - pred[1:-1]).max()) if len(times) > 2 else 0.0
