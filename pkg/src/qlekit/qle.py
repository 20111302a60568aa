"""The delta-approximation chain for QLE and its drift coefficients.

Only the harmonic component is evolved.  It excludes the fixed logarithmic
singularity -(kappa + 6) / (2 sqrt(kappa)) log|z| at the origin, which is
kept as metadata because log|z| cannot be pinned at 0.

One block of capacity delta:
  1. draw the atom angle U from exp(alpha h^N(e^{i theta})) on a grid,
  2. run the reverse flow f_s for s in [0, delta] driven by V_s = U + W_{delta-s}
     with W a Brownian motion of speed kappa,
  3. set h_new(z) = h(f_delta(z)) - c0 log|f_delta(z) / z| + Q log|f_delta'(z)|
     - delta / sqrt(kappa) + sum_s P*(f_s(z), e^{i V_s}) dB_s
     (B a fresh Brownian motion, c0 the origin coefficient),
  4. refit the degree-N expansion from values on a circle and re-pin at 0.
Step 3 is the closed-form integral of the drift; ``method="sde"`` integrates
the drift itself with Euler steps instead.
"""
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import InvalidArgument, OutOfDomain, OutOfRange
from .field import HarmonicDiskField, analytic_derivative, fbgff_variances
from .loewner import dphi_dz, phi
from .lqg import DEFAULT_M, sample_from_log_weights
from .rng import make_rng
from .scaling import alpha_of_kappa, q_of_kappa
from .sle import poisson_kernels

FIT_RADIUS = 0.8
FIT_POINTS = 128
RESIDUAL_TOL = 1e-3


def origin_coefficient(kappa):
    return -(kappa + 6) / (2 * math.sqrt(kappa))


@dataclass
class BlockRecord:
    """Driving data of one block: atom angle and reverse driving V on the
    half-step grid (2K + 1 values)."""
    atom: float
    V: np.ndarray
    dt: float


@dataclass
class QleState:
    field: HarmonicDiskField
    atom: float
    t: float
    kappa: float
    block: int = 0
    origin_coef: float = 0.0
    history: list = dc_field(default_factory=list)
    status: str = "ok"
    residual: float = 0.0
    probe_values: np.ndarray | None = None

    @property
    def N(self):
        return self.field.degree


def _check_kappa(kappa):
    if not kappa > 1:
        raise OutOfRange("kappa must exceed 1")


def qle_init(kappa, N, seed=None):
    """Free boundary harmonic part of degree N plus (2 / sqrt(kappa)) log|z - u|
    at a uniform boundary point u, which is also the first atom."""
    _check_kappa(kappa)
    if N < 0:
        raise InvalidArgument("N must be nonnegative")
    rng = make_rng(seed)
    sd = np.sqrt(fbgff_variances(N))
    a = rng.standard_normal(N) * sd
    b = rng.standard_normal(N) * sd
    theta = float(rng.uniform(0, 2 * np.pi))
    fld = HarmonicDiskField(a, b, [(2 / math.sqrt(kappa), np.exp(1j * theta))], sd ** 2)
    return QleState(fld, theta, 0.0, kappa, 0, origin_coefficient(kappa))


def atom_log_weights(fld, kappa, M=DEFAULT_M):
    """alpha * h^N on the grid 2 pi j / M (unnormalized log-density)."""
    from .lqg import boundary_log_weights

    return boundary_log_weights(fld, alpha_of_kappa(kappa), fld.degree, M)


def qle_drift(fld, z, u, kappa):
    """(D(z, u), sigma(z, u)) for the harmonic component fld at z, u on the circle."""
    z = np.asarray(z, complex)
    u = np.asarray(u, complex)
    if np.any(np.abs(z) >= 1):
        raise OutOfDomain("z must lie in the open disk")
    Q = q_of_kappa(kappa)
    _, _, dth, pstar = poisson_kernels(z, u)
    grad_term = np.real(analytic_derivative(fld, z) * phi(u, z))
    return -grad_term + pstar / math.sqrt(kappa) + Q * dth, pstar


# ---- vectorized core -------------------------------------------------------

class _Batch:
    """R harmonic fields: coefficients (R, N) plus an optional boundary
    log singularity of weight g at angles us (R,)."""

    def __init__(self, coef, g=0.0, us=None):
        self.coef = np.asarray(coef, complex)
        self.g = g
        self.us = us

    @classmethod
    def from_field(cls, fld):
        sing = fld.singularities
        if len(sing) > 1:
            raise InvalidArgument("at most one boundary singularity is supported")
        g, us = 0.0, None
        if sing:
            g, x = sing[0]
            if abs(abs(x) - 1) > 1e-12:
                raise InvalidArgument("the singularity must lie on the circle")
            us = np.array([np.angle(x)])
        return cls(fld.coef[None, :], g, us)

    @property
    def R(self):
        return self.coef.shape[0]

    def value(self, w):
        """Values at w of shape (R, P)."""
        p = np.zeros(w.shape, complex)
        for k in range(self.coef.shape[1] - 1, -1, -1):
            p = (p + self.coef[:, k:k + 1]) * w
        v = p.real
        if self.g:
            u = np.exp(1j * self.us)[:, None]
            # |u| differs from 1 by rounding; subtracting it keeps the pin exact
            v = v + self.g * (np.log(np.abs(w - u)) - np.log(np.abs(u)))
        return v

    def deriv(self, w):
        N = self.coef.shape[1]
        dp = np.zeros(w.shape, complex)
        for k in range(N - 1, -1, -1):
            dp = dp * w + (k + 1) * self.coef[:, k:k + 1]
        if self.g:
            dp = dp + self.g / (w - np.exp(1j * self.us)[:, None])
        return dp

    def boundary_log_weights(self, alpha, M):
        N = self.coef.shape[1]
        c = np.zeros((self.R, M), complex)
        c[:, 1:N + 1] = self.coef
        logw = alpha * np.real(np.fft.ifft(c, axis=1)) * M
        if self.g:
            th = 2 * np.pi * np.arange(M) / M
            d = np.abs(np.exp(1j * th)[None, :] - np.exp(1j * self.us)[:, None])
            p = alpha * self.g
            h = 2 * np.pi / M
            with np.errstate(divide="ignore"):
                term = p * np.log(d)
            hit = d < 1e-12
            if hit.any():
                # cell average of |theta|^p over [-h/2, h/2]
                term[hit] = math.log((h / 2) ** p / (p + 1))
            logw = logw + term
        return logw


def _fit(values, N, r):
    """Degree-N coefficients and RMS of the dropped modes from circle values."""
    M = values.shape[1]
    F = np.fft.fft(values, axis=1) / M
    k = np.arange(1, N + 1)
    coef = 2 * F[:, 1:N + 1] / r ** k
    dropped = F[:, N + 1:M // 2]
    resid = np.sqrt(2 * np.sum(np.abs(dropped) ** 2, axis=1))
    return coef, resid


def _block(batch, kappa, delta, dt, rng, atoms=None, W=None, noise=True, method="exact",
           M=DEFAULT_M, extra=None):
    """Advance a batch by one block.  Returns (new batch, atoms, V paths,
    residuals, values at ``extra`` points or None)."""
    R = batch.R
    N = batch.coef.shape[1]
    K = int(round(delta / dt))
    if K < 1 or abs(K * dt - delta) > 1e-9 * delta:
        raise InvalidArgument("delta must be a positive multiple of dt")
    sk = math.sqrt(kappa)
    Q = q_of_kappa(kappa)
    c0 = -origin_coefficient(kappa)
    if atoms is None:
        atoms = sample_from_log_weights(batch.boundary_log_weights(alpha_of_kappa(kappa), M), rng)
    atoms = np.broadcast_to(np.asarray(atoms, float), (R,))
    if W is None:
        inc = rng.standard_normal((R, 2 * K)) * math.sqrt(kappa * dt / 2)
        W = np.concatenate([np.zeros((R, 1)), np.cumsum(inc, axis=1)], axis=1)
    W = np.broadcast_to(np.asarray(W, float), (R, 2 * K + 1))
    V = atoms[:, None] + W[:, ::-1]
    th = 2 * np.pi * np.arange(FIT_POINTS) / FIT_POINTS
    z0 = FIT_RADIUS * np.exp(1j * th)
    if extra is not None:
        z0 = np.concatenate([z0, np.asarray(extra, complex)])
    z = np.broadcast_to(z0, (R, len(z0))).copy()
    L = np.zeros_like(z)
    acc = np.zeros(z.shape)
    H = batch.value(z) if method == "sde" else None
    dB = rng.standard_normal((R, K)) * math.sqrt(dt) if noise else None
    for k in range(K):
        u0 = np.exp(1j * V[:, 2 * k])[:, None]
        uh = np.exp(1j * V[:, 2 * k + 1])[:, None]
        u1 = np.exp(1j * V[:, 2 * k + 2])[:, None]
        k_ = (u0 + z) / (u0 - z)
        pstar = k_.real - 1
        if noise:
            acc += pstar * dB[:, k:k + 1]
        if method == "sde":
            dth = np.real(-2 * z * u0 / (u0 - z) ** 2)
            drift = np.real(batch.deriv(z) * -phi(u0, z)) + pstar / sk + Q * dth
            H = H + drift * dt
        # RK4 for the reverse flow and its log-derivative
        def f(u, w):
            q = 1 / (u - w)
            s = (u + w) * q
            return -w * s, -(s + 2 * u * w * q * q)
        a1, b1 = f(u0, z)
        a2, b2 = f(uh, z + 0.5 * dt * a1)
        a3, b3 = f(uh, z + 0.5 * dt * a2)
        a4, b4 = f(u1, z + dt * a3)
        z = z + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        L = L + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
    if method == "exact":
        H = (batch.value(z) - c0 * (np.log(np.abs(z)) - np.log(np.abs(z0))[None, :])
             + Q * L.real - delta / sk)
    elif method != "sde":
        raise InvalidArgument(f"unknown method {method!r}")
    H = H + acc
    coef, resid = _fit(H[:, :FIT_POINTS], N, FIT_RADIUS)
    return _Batch(coef), atoms, V, resid, (H[:, FIT_POINTS:] if extra is not None else None)


def _to_field(batch, i, variances):
    c = batch.coef[i]
    return HarmonicDiskField(c.real.copy(), -c.imag.copy(), [], variances.copy())


def qle_block(state, delta, dt=1e-3, seed=None, atom=None, driving=None, noise=True,
              method="exact", M=DEFAULT_M, probes=None):
    """One block of the chain.

    ``atom`` and ``driving`` (W on the half-step grid, 2K + 1 values starting
    at 0) override the random choices; ``noise=False`` drops the
    independent Brownian term.  ``probes`` are points where the updated
    component is evaluated before the refit (stored as probe_values).
    """
    if delta < dt:
        raise InvalidArgument("delta must be at least dt")
    rng = make_rng(seed)
    batch = _Batch.from_field(state.field)
    new, atoms, V, resid, pv = _block(batch, state.kappa, delta, dt, rng, atom, driving, noise,
                                      method, M, probes)
    fld = _to_field(new, 0, state.field.variances)
    rec = BlockRecord(float(atoms[0]), V[0].copy(), dt)
    status = "ok" if resid[0] <= RESIDUAL_TOL else "degraded"
    return QleState(fld, float(atoms[0]), state.t + delta, state.kappa, state.block + 1,
                    state.origin_coef, state.history + [rec], status, float(resid[0]),
                    None if pv is None else pv[0])


def qle_batch(kappa, N, delta, blocks, R, dt=1e-3, seed=None, probes=(0.3,), chunk=1000,
              method="exact", M=DEFAULT_M):
    """Probe values of the harmonic component at every block boundary for R
    independent chains: array (blocks + 1, R, len(probes)), plus the
    fraction of degraded refits."""
    _check_kappa(kappa)
    rng = make_rng(seed)
    probes = np.asarray(probes, complex)
    out = np.zeros((blocks + 1, R, len(probes)))
    degraded = 0
    for s in range(0, R, chunk):
        r = min(chunk, R - s)
        sd = np.sqrt(fbgff_variances(N))
        coef = (rng.standard_normal((r, N)) - 1j * rng.standard_normal((r, N))) * sd
        us = rng.uniform(0, 2 * np.pi, r)
        batch = _Batch(coef, 2 / math.sqrt(kappa), us)
        out[0, s:s + r] = batch.value(np.broadcast_to(probes, (r, len(probes))))
        for b in range(blocks):
            batch, _, _, resid, _ = _block(batch, kappa, delta, dt, rng, method=method, M=M)
            degraded += int((resid > RESIDUAL_TOL).sum())
            out[b + 1, s:s + r] = batch.value(np.broadcast_to(probes, (r, len(probes))))
    return out, degraded / (R * max(blocks, 1))


@dataclass
class QleTrajectory:
    states: list
    hulls: list
    atoms: list
    nu: list
    conformal_radius: list


def compose_inverse(history, w):
    """Apply the block inverse maps, newest first, to points w.

    Returns (images, log-derivative).
    """
    z = np.atleast_1d(np.asarray(w, complex)).copy()
    L = np.zeros_like(z)
    for rec in reversed(history):
        V = rec.V
        dt = rec.dt
        for k in range((len(V) - 1) // 2):
            u0, uh, u1 = (np.exp(1j * V[j]) for j in (2 * k, 2 * k + 1, 2 * k + 2))

            def f(u, x):
                return -phi(u, x), -dphi_dz(u, x)
            a1, b1 = f(u0, z)
            a2, b2 = f(uh, z + 0.5 * dt * a1)
            a3, b3 = f(uh, z + 0.5 * dt * a2)
            a4, b4 = f(u1, z + dt * a3)
            z = z + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
            L = L + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
    return z, L


def qle_run(kappa, delta, T, N, dt=1e-3, seed=None, hull_resolution=256, probe_eps=1e-3,
            nu_M=256):
    """Iterate blocks up to capacity T.

    Emits states, hull polylines (images of a circle of radius 1 - probe_eps
    under the composed inverse map), atoms, truncated boundary measure
    snapshots on nu_M angles, and conformal radii at block boundaries.
    """
    blocks = int(round(T / delta))
    if T and abs(blocks * delta - T) > 1e-9 * max(T, 1):
        raise InvalidArgument("T must be a multiple of delta")
    rng = make_rng(seed)
    state = qle_init(kappa, N, rng)
    traj = QleTrajectory([state], [], [state.atom], [], [1.0])
    th = 2 * np.pi * np.arange(hull_resolution) / hull_resolution
    circle = (1 - probe_eps) * np.exp(1j * th)
    traj.nu.append(_nu_snapshot(state, nu_M))
    for _ in range(blocks):
        state = qle_block(state, delta, dt, rng)
        traj.states.append(state)
        traj.atoms.append(state.atom)
        traj.nu.append(_nu_snapshot(state, nu_M))
        pts, L = compose_inverse(state.history, np.concatenate([[0], circle]))
        traj.hulls.append(pts[1:])
        traj.conformal_radius.append(float(np.exp(L[0].real)))
    return traj


def _nu_snapshot(state, M):
    logw = atom_log_weights(state.field, state.kappa, max(M, 64))
    w = np.exp(logw - logw.max())
    return w / w.sum()
