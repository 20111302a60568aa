"""Measure-driven radial Loewner evolution.

Forward flow   d/dt g = int Phi(u, g) dnu_t(u),
reverse flow   d/dt f = -int Phi(u, f) dnu_t(u),
with Phi(u, z) = z (u + z) / (u - z).  Inverse maps g_t^{-1} are computed as
the reverse flow driven by the time-reversed measure.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, InvalidCurve, NumericalFailure, OutOfDomain
from .lqg import CircleMeasure, point_mass, uniform_measure


def psi(u, z):
    return (u + z) / (u - z)


def phi(u, z):
    return z * (u + z) / (u - z)


def dphi_dz(u, z):
    return (u * u + 2 * u * z - z * z) / (u - z) ** 2


@dataclass
class DrivingMeasure:
    """Piecewise-constant family of probability measures on the circle."""
    dt: float
    slices: list

    @property
    def T(self):
        return self.dt * len(self.slices)

    def breakpoints(self, T=None):
        T = self.T if T is None else T
        k = int(math.ceil(T / self.dt - 1e-12))
        b = np.minimum(np.arange(k + 1) * self.dt, T)
        return b

    def at(self, t):
        j = min(int(t / self.dt), len(self.slices) - 1)
        return self.slices[max(j, 0)]

    def to_rows(self):
        rows = []
        for j, s in enumerate(self.slices):
            t = j * self.dt
            if s.is_atomic:
                for a, m in zip(*s.atoms):
                    rows.append((t, float(a), float(m)))
            else:
                M = s.M
                for k, w in enumerate(s.weights):
                    rows.append((t, 2 * math.pi * k / M, float(w)))
        return rows


def constant_driving(measure, T, dt):
    k = int(round(T / dt))
    return DrivingMeasure(dt, [measure] * k)


def atom_driving(angles, dt):
    return DrivingMeasure(dt, [point_mass(a) for a in angles])


def uniform_driving(T, dt, M=4096):
    return constant_driving(uniform_measure(M), T, dt)


class _Field:
    """Velocity int Phi(u, z) dnu(u) and its z-derivative for one measure.

    Density slices are read as piecewise-constant densities on cells centered
    at the grid angles and integrated in closed form.
    """

    def __init__(self, measure):
        if measure.is_atomic:
            ang, m = measure.atoms
            self.u = np.exp(1j * np.asarray(ang, float))
            self.w = np.asarray(m, float)
            self.atomic = True
        else:
            M = measure.M
            h = 2 * np.pi / M
            keep = measure.weights > 0
            edges = h * (np.arange(M) - 0.5)
            self.ua = np.exp(1j * edges[keep])
            self.ub = np.exp(1j * (edges[keep] + h))
            self.w = measure.weights[keep] / h
            self.atomic = False

    def __call__(self, z):
        z = np.asarray(z)
        if self.atomic and len(self.u) == 1:
            u = self.u[0]
            return self.w[0] * phi(u, z), self.w[0] * dphi_dz(u, z)
        zz = z.reshape(-1, 1)
        if self.atomic:
            d = self.u[None, :] - zz
            r = (self.u[None, :] / d) @ self.w
            r2 = (self.u[None, :] / d**2) @ self.w
        else:
            da, db = self.ua[None, :] - zz, self.ub[None, :] - zz
            q = db / da
            # arg(u - z) increases along each arc for z inside the disk
            ang = np.angle(q)
            ang = np.where(ang < 0, ang + 2 * np.pi, ang)
            r = -1j * ((np.log(np.abs(q)) + 1j * ang) @ self.w)
            r2 = -1j * ((1 / da - 1 / db) @ self.w)
        zz = zz[:, 0]
        # Phi = -z + 2 z u / (u - z)
        v = -zz + 2 * zz * r
        dv = -1 + 2 * r + 2 * zz * r2
        return v.reshape(z.shape), dv.reshape(z.shape)


@dataclass
class LoewnerState:
    t: float
    points: np.ndarray
    images: np.ndarray
    logderiv: np.ndarray
    swallowed: np.ndarray
    swallow_time: np.ndarray
    logderiv0: float

    @property
    def derivative(self):
        return np.exp(self.logderiv)

    @property
    def deriv0(self):
        return math.exp(self.logderiv0)


class Driver:
    """Uniform interface over a DrivingMeasure or an angle function W(t)."""

    def __init__(self, driving, T, reverse_time=False):
        self.T = T
        self.reverse_time = reverse_time
        if isinstance(driving, DrivingMeasure):
            self.kind = "measure"
            self.driving = driving
            b = driving.breakpoints(T) if not reverse_time else T - driving.breakpoints(T)[::-1]
            self.breaks = np.unique(np.clip(np.concatenate([b, [0.0, T]]), 0, T))
            self._cache = {}
        elif callable(driving):
            self.kind = "angle"
            self.fn = driving
            self.breaks = np.array([0.0, T])
        else:
            raise InvalidArgument("driving must be a DrivingMeasure or a callable")

    def field(self, t, seg):
        if self.kind == "angle":
            s = self.T - t if self.reverse_time else t
            u = np.exp(1j * self.fn(s))
            return lambda z: (phi(u, z), dphi_dz(u, z))
        if seg not in self._cache:
            mid = 0.5 * (self.breaks[seg] + self.breaks[seg + 1])
            s = self.T - mid if self.reverse_time else mid
            self._cache = {seg: _Field(self.driving.at(s))}
        return self._cache[seg]


def _rk4(fieldfn, t, h, z, L, sign):
    def f(tt, zz):
        v, dv = fieldfn(tt)(zz)
        return sign * v, sign * dv

    k1, l1 = f(t, z)
    k2, l2 = f(t + h / 2, z + h / 2 * k1)
    k3, l3 = f(t + h / 2, z + h / 2 * k2)
    k4, l4 = f(t + h, z + h * k3)
    return (z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4),
            L + h / 6 * (l1 + 2 * l2 + 2 * l3 + l4), k1, k4)


def solve_flow(driving, points, T, sign=1, dt_max=0.01, tol=1e-10, swallow_tol=1e-9,
               record_times=None, reverse_time=False, h_min=1e-18, t0=0.0):
    """Adaptive RK4 for the forward (sign=+1) or reverse (sign=-1) flow.

    Returns the list of states at ``record_times`` (default: t0 and T).
    Integration runs over [t0, T].
    """
    z0 = np.atleast_1d(np.asarray(points, dtype=complex)).copy()
    if np.any(np.abs(z0) >= 1):
        raise OutOfDomain("points must lie in the open unit disk")
    if T < 0:
        raise InvalidArgument("T must be nonnegative")
    drv = Driver(driving, T, reverse_time)
    rec = sorted(set([t0, T] if record_times is None else [float(x) for x in record_times]))
    if rec and (rec[0] < t0 or rec[-1] > T + 1e-12):
        raise InvalidArgument("record times outside [0, T]")
    z = z0.copy()
    L = np.zeros_like(z)
    L0 = 0.0
    alive = np.ones(len(z), bool)
    tau = np.full(len(z), np.inf)
    out = []
    t = 0.0
    ri = 0

    def snapshot(tt):
        out.append(LoewnerState(tt, z0.copy(), z.copy(), L.copy(), ~alive, tau.copy(), L0))

    while ri < len(rec) and rec[ri] <= t0:
        snapshot(t0)
        ri += 1
    h = dt_max
    for seg in range(len(drv.breaks) - 1):
        a, b = drv.breaks[seg], drv.breaks[seg + 1]
        if b <= t0:
            continue
        t = max(a, t0)

        def fieldfn(tt, seg=seg):
            return drv.field(tt, seg)

        while t < b - 1e-15:
            target = b
            if ri < len(rec) and rec[ri] < b:
                target = rec[ri]
            hh = min(h, target - t, dt_max)
            idx = np.nonzero(alive)[0]
            zi, Li = z[idx], L[idx]
            # step doubling on the live points plus the origin derivative
            zf, Lf, k1, k4 = _rk4(fieldfn, t, hh, zi, Li, sign)
            zh, Lh, _, _ = _rk4(fieldfn, t, hh / 2, zi, Li, sign)
            zh, Lh, _, _ = _rk4(fieldfn, t + hh / 2, hh / 2, zh, Lh, sign)
            err_pt = np.abs(zf - zh) + np.abs(Lf - Lh) * np.minimum(1, np.abs(zh))
            # near the circle the natural length scale is the distance to it;
            # the additive floor absorbs rounding in 1 - |z|
            scale = np.clip(10 * (1 - np.abs(zi)), 0, 1)
            err_pt = err_pt / (tol * scale + 1e-14)
            err_pt = np.where(np.isfinite(err_pt), err_pt, np.inf)
            err = err_pt.max() if len(err_pt) else 0.0
            if err > 1 and hh > h_min:
                h = max(hh * max(0.1, 0.9 * err ** -0.2), h_min)
                continue
            if err > 1:
                # step collapse: the offending points are declared swallowed
                bad = err_pt > 1
                if sign < 0 or not np.any(np.abs(zi[bad]) > 0.5):
                    raise NumericalFailure("step collapse")
                alive[idx[bad]] = False
                tau[idx[bad]] = t
                continue
            zn, Ln = zh, Lh
            if sign > 0:
                cross = np.abs(zn) >= 1 - swallow_tol
                if cross.any():
                    # Hermite interpolation to locate the first crossing
                    tc = np.empty(cross.sum())
                    for c, j in enumerate(np.nonzero(cross)[0]):
                        tc[c] = _crossing(zi[j], zn[j], k1[j], k4[j], hh, 1 - swallow_tol)
                    first = tc.min()
                    if first < 0.5 * hh and hh > 1e-12:
                        h = first * 1.001
                        continue
                    gone = idx[cross]
                    alive[gone] = False
                    tau[gone] = t + tc
                    zn = np.where(cross, zn / np.abs(zn), zn)
            z[idx], L[idx] = zn, Ln
            L0 += sign * _origin_rate(fieldfn, t, hh)
            t += hh
            grow = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
            h = min(dt_max, max(hh, h) * grow) if hh < h else min(dt_max, hh * grow)
            while ri < len(rec) and rec[ri] <= t + 1e-14:
                snapshot(rec[ri])
                ri += 1
    while ri < len(rec):
        snapshot(rec[ri])
        ri += 1
    return out


def _origin_rate(fieldfn, t, h):
    """Integral over the step of d/dz v at 0 (Simpson)."""
    vals = [fieldfn(s)(np.zeros(1, complex))[1][0].real for s in (t, t + h / 2, t + h)]
    return h * (vals[0] + 4 * vals[1] + vals[2]) / 6


def _crossing(z0, z1, v0, v1, h, r):
    """Fraction of the step at which |hermite(s)| first reaches r."""
    def herm(s):
        x = s / h
        h00 = 2 * x**3 - 3 * x**2 + 1
        h10 = x**3 - 2 * x**2 + x
        h01 = -2 * x**3 + 3 * x**2
        h11 = x**3 - x**2
        return h00 * z0 + h10 * h * v0 + h01 * z1 + h11 * h * v1

    lo, hi = 0.0, h
    if abs(z1) < r:
        return h
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if abs(herm(mid)) >= r:
            hi = mid
        else:
            lo = mid
    return hi


def solve_forward(driving, points, T, dt_max=0.01, tol=1e-10, record_times=None, **kw):
    return solve_flow(driving, points, T, +1, dt_max, tol, record_times=record_times, **kw)


def solve_reverse(driving, points, T, dt_max=0.01, tol=1e-10, record_times=None, **kw):
    return solve_flow(driving, points, T, -1, dt_max, tol, record_times=record_times, **kw)


def inverse_map(driving, t, w, dt_max=0.01, tol=1e-10):
    """g_t^{-1}(w) via the reverse flow with time-reversed driving."""
    w = np.atleast_1d(np.asarray(w, complex))
    if t == 0:
        return w.copy()
    st = solve_flow(driving, w, t, -1, dt_max, tol, reverse_time=True)[-1]
    return st.images


def hull_boundary(driving, t, resolution=512, probe_eps=1e-3, **kw):
    """Image of the circle of radius 1 - probe_eps under g_t^{-1}."""
    th = 2 * np.pi * np.arange(resolution) / resolution
    w = (1 - probe_eps) * np.exp(1j * th)
    return inverse_map(driving, t, w, **kw)


def tip_path(driving_angle, times, tau0=1e-6, **kw):
    """Approximate trace points g_t^{-1}(e^{i W_t}).

    Over the last tau0 units of time the driving is frozen, so the flow
    starts from the exact slit tip; the reverse flow does the rest.
    """
    x0 = _slit_tip(tau0)
    out = []
    for t in times:
        u = np.exp(1j * driving_angle(t))
        if t <= tau0:
            out.append(u * _slit_tip(t) if t > 0 else u)
            continue
        st = solve_flow(driving_angle, [x0 * u], t, -1, reverse_time=True, t0=tau0, **kw)[-1]
        out.append(st.images[0])
    return np.array(out)


def _slit_tip(s):
    """Radius x of the radial slit with capacity s."""
    c = math.exp(-s) / 4
    # x / (1 + x)^2 = c  ->  x^2 + (2 - 1/c) x + 1 = 0, smaller root
    b = 1 / c - 2
    return 2 / (b + math.sqrt(b * b - 4))


def caratheodory_distance(driving1, driving2, r, times, resolution=256, **kw):
    """max over times of sup_{|w| = r} |g1_t^{-1}(w) - g2_t^{-1}(w)|.

    By the maximum principle the sup over the closed disk of radius r is
    attained on its boundary circle.
    """
    if not 0 < r < 1:
        raise InvalidArgument("r must lie in (0, 1)")
    th = 2 * np.pi * np.arange(resolution) / resolution
    w = r * np.exp(1j * th)
    best = 0.0
    for t in times:
        a = inverse_map(driving1, t, w, **kw)
        b = inverse_map(driving2, t, w, **kw)
        best = max(best, float(np.abs(a - b).max()))
    return best


def _koebe_inv(zeta):
    """Root in the closed disk of zeta (1 - w)^2 = w."""
    zeta = np.asarray(zeta, complex)
    s = np.sqrt(4 * zeta + 1)
    p = 2 * zeta + 1
    with np.errstate(divide="ignore", invalid="ignore"):
        w1 = 2 * zeta / (p + s)
        w2 = 2 * zeta / (p - s)
    w2 = np.where(np.isfinite(w2), w2, np.inf)
    return np.where(np.abs(w1) <= np.abs(w2), w1, w2)


def slit_map(z, theta, s):
    """Loewner map at capacity s for constant driving e^{i theta}.

    Its hull is the radial slit from e^{i theta} to x e^{i theta} with
    x / (1 + x)^2 = e^{-s} / 4.
    """
    rot = -np.exp(1j * theta)
    zz = np.asarray(z, complex) / rot
    k = zz / (1 - zz) ** 2
    return rot * _koebe_inv(math.exp(s) * k)


def slit_capacity(x):
    """Capacity of the radial slit reaching radius x."""
    return math.log((1 + x) ** 2 / (4 * x))


def _segments_cross(p):
    a, b = p[:-1], p[1:]
    n = len(a)
    if n < 3:
        return False
    d = b - a
    for i in range(n - 2):
        j = np.arange(i + 2, n)
        e = d[j]
        den = d[i].real * e.imag - d[i].imag * e.real
        w = a[j] - a[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (w.real * e.imag - w.imag * e.real) / den
            u = (w.real * d[i].imag - w.imag * d[i].real) / den
        hit = (den != 0) & (s > 0) & (s < 1) & (u > 0) & (u < 1)
        if hit.any():
            return True
    return False


def extract_driving(curve, dt):
    """Zipper: unroll a simple curve into atoms per capacity increment dt.

    ``curve[0]`` lies on the unit circle, the rest inside the disk.  Returns
    (DrivingMeasure, raw increments) where raw increments are (capacity,
    angle) pairs from the elementary slit maps.
    """
    p = np.asarray(curve, complex)
    if len(p) < 2:
        raise InvalidCurve("need at least two points")
    if abs(abs(p[0]) - 1) > 1e-9:
        raise InvalidCurve("curve must start on the unit circle")
    if np.any(np.abs(p[1:]) >= 1) or np.any(np.abs(p) < 1e-12):
        raise InvalidCurve("curve must stay inside the disk and avoid 0")
    if _segments_cross(p):
        raise InvalidCurve("curve self-intersects")
    z = p[1:].copy()
    caps, angles = [], []
    for k in range(len(z)):
        w = z[k]
        th = math.atan2(w.imag, w.real)
        x = min(abs(w), 1 - 1e-15)
        s = slit_capacity(x)
        caps.append(s)
        angles.append(th)
        if k + 1 < len(z):
            z[k + 1:] = slit_map(z[k + 1:], th, s)
            r = np.abs(z[k + 1:])
            z[k + 1:] = np.where(r >= 1, z[k + 1:] / r * (1 - 1e-15), z[k + 1:])
    caps = np.array(caps)
    angles = np.unwrap(np.array(angles))
    ends = np.cumsum(caps)
    total = ends[-1]
    nslice = max(1, int(total / dt + 1e-9))
    mids = (np.arange(nslice) + 0.5) * dt
    j = np.minimum(np.searchsorted(ends, mids), len(ends) - 1)
    return atom_driving(angles[j], dt), np.column_stack([caps, angles])
