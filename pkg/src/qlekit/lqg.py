"""Lattice LQG area measures, dyadic square decompositions and circle measures."""
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import InvalidArgument, NonIntegrableAtom
from .field import boundary_values
from .rng import make_rng

DEFAULT_M = 4096


@dataclass
class MassGrid:
    mass: np.ndarray

    @property
    def n(self):
        return self.mass.shape[0]

    @property
    def total(self):
        return math.fsum(self.mass.ravel())


def lqg_mass(fld, gamma):
    """Site masses proportional to exp(gamma h), normalized to total 1."""
    if not 0 <= gamma <= 2:
        raise InvalidArgument("gamma must lie in [0, 2]")
    h = np.asarray(getattr(fld, "values", fld), dtype=float)
    w = np.exp(gamma * (h - h.max()))
    return MassGrid(w / w.sum())


@dataclass
class SquareTiling:
    """Leaves of a quadtree over an n x n site grid.

    Each leaf is (i, j, size, mass, depth) in site units; ``floor`` marks
    single-site leaves that still carry mass >= delta.  ``internal`` lists
    the split squares in the same format.
    """
    n: int
    delta: float
    leaves: list
    floor: list = dc_field(default_factory=list)
    total: float = 0.0
    internal: list = dc_field(default_factory=list)

    def as_rows(self):
        n = self.n
        return [(i / n, j / n, s / n, m, d) for i, j, s, m, d in self.leaves]


def _pyramid(mass):
    levels = [mass]
    while levels[-1].shape[0] > 1:
        a = levels[-1]
        # fixed summation order: (00 + 10) + (01 + 11)
        levels.append((a[0::2, 0::2] + a[1::2, 0::2]) + (a[0::2, 1::2] + a[1::2, 1::2]))
    return levels


def square_decompose(mg, delta):
    """Split squares into four while their mass is at least delta."""
    if delta <= 0:
        raise InvalidArgument("delta must be positive")
    n = mg.n
    if n & (n - 1):
        raise InvalidArgument("grid size must be a power of two")
    levels = _pyramid(mg.mass)
    top = len(levels) - 1
    leaves, floor, internal = [], [], []
    stack = [(top, 0, 0, 0)]
    while stack:
        lev, i, j, depth = stack.pop()
        m = float(levels[lev][i, j])
        size = 1 << lev
        if m < delta:
            leaves.append((i * size, j * size, size, m, depth))
        elif lev == 0:
            leaves.append((i, j, 1, m, depth))
            floor.append(len(leaves) - 1)
        else:
            internal.append((i * size, j * size, size, m, depth))
            for di, dj in ((1, 1), (0, 1), (1, 0), (0, 0)):
                stack.append((lev - 1, 2 * i + di, 2 * j + dj, depth + 1))
    return SquareTiling(n, delta, leaves, floor, float(levels[top][0, 0]), internal)


def render_tiling(tiling, scale=1):
    """RGB image with each leaf colored by its Euclidean size (log scale)."""
    n = tiling.n
    img = np.zeros((n, n, 3), dtype=np.uint8)
    sizes = np.array([s for _, _, s, _, _ in tiling.leaves])
    lmax = max(1.0, math.log2(sizes.max()))
    for i, j, s, _, _ in tiling.leaves:
        t = math.log2(s) / lmax
        img[j:j + s, i:i + s] = rainbow(t)
        img[j, i:i + s] = 0
        img[j:j + s, i] = 0
    if scale > 1:
        img = img.repeat(scale, 0).repeat(scale, 1)
    return img


def rainbow(t):
    """Map t in [0, 1] to an RGB triple (blue -> red)."""
    t = float(np.clip(t, 0, 1))
    r = np.clip(1.5 - abs(4 * t - 3), 0, 1)
    g = np.clip(1.5 - abs(4 * t - 2), 0, 1)
    b = np.clip(1.5 - abs(4 * t - 1), 0, 1)
    return (int(255 * r), int(255 * g), int(255 * b))


@dataclass
class CircleMeasure:
    """Either atoms (angles, masses) or a density on the grid 2 pi j / M."""
    atoms: tuple | None = None
    weights: np.ndarray | None = None

    @property
    def is_atomic(self):
        return self.atoms is not None

    @property
    def total(self):
        if self.is_atomic:
            return float(np.sum(self.atoms[1]))
        return float(np.sum(self.weights))

    @property
    def M(self):
        return len(self.weights)

    def normalized(self):
        if self.is_atomic:
            ang, m = self.atoms
            m = np.asarray(m, float)
            return CircleMeasure(atoms=(np.asarray(ang, float), m / m.sum()))
        return CircleMeasure(weights=self.weights / self.weights.sum())

    def integrate(self, fn):
        """Integral of fn(u) for u on the unit circle (fn vectorized)."""
        if self.is_atomic:
            ang, m = self.atoms
            return np.sum(np.asarray(m) * fn(np.exp(1j * np.asarray(ang))))
        M = self.M
        u = np.exp(2j * np.pi * np.arange(M) / M)
        return np.sum(self.weights * fn(u))


def point_mass(theta):
    return CircleMeasure(atoms=(np.array([float(theta)]), np.array([1.0])))


def uniform_measure(M=DEFAULT_M):
    return CircleMeasure(weights=np.full(M, 1.0 / M))


def density_measure(fn, M=DEFAULT_M):
    th = 2 * np.pi * np.arange(M) / M
    w = np.asarray(fn(th), float)
    return CircleMeasure(weights=w / w.sum())


def boundary_log_weights(fld, a, n=None, M=DEFAULT_M, compensate=False):
    """Unnormalized log-density a * h^n(e^{i theta_j}) on the grid.

    Boundary singularities contribute a * g * log|e^{i theta} - x|; one that
    sits exactly on a grid angle is replaced by its cell average, or raises
    when a * g <= -1 makes it non-integrable.
    """
    N = fld.degree if n is None else n
    if N > fld.degree:
        raise InvalidArgument("truncation degree exceeds the field degree")
    if M < 64:
        raise InvalidArgument("M must be at least 64")
    trunc = fld.copy()
    trunc.a, trunc.b = trunc.a[:N], trunc.b[:N]
    trunc.variances = trunc.variances[:N]
    logw = a * boundary_values(trunc, M, include_singular=False)
    if compensate:
        # var(h^n(e^{i theta})) = sum_k var_k (cos^2 + sin^2): constant in theta
        logw = logw - a * a * float(np.sum(trunc.variances))
    h = 2 * np.pi / M
    th = h * np.arange(M)
    u = np.exp(1j * th)
    for g, x in fld.singularities:
        p = a * g
        dist = np.abs(u - x)
        hit = dist < 1e-12
        if hit.any():
            if p <= -1:
                raise NonIntegrableAtom("singularity on a grid angle is not integrable")
            dist = np.where(hit, 1.0, dist)
            term = p * np.log(dist)
            # cell average of |theta|^p over [-h/2, h/2]
            term[hit] = math.log((h / 2) ** p / (p + 1))
        else:
            term = p * np.log(dist)
        logw = logw + term - p * math.log(abs(x))
    return logw


def boundary_measure_truncated(fld, a, n=None, M=DEFAULT_M, compensate=False):
    logw = boundary_log_weights(fld, a, n, M, compensate)
    w = np.exp(logw - logw.max())
    return CircleMeasure(weights=w / w.sum())


def sample_circle(measure, seed=None, size=None):
    """Inverse-CDF sampling; density cells are centered on the grid angles."""
    rng = make_rng(seed)
    if measure.is_atomic:
        ang, m = measure.atoms
        p = np.asarray(m, float)
        idx = rng.choice(len(p), size=size, p=p / p.sum())
        return np.asarray(ang, float)[idx]
    w = measure.weights
    M = len(w)
    cdf = np.concatenate([[0.0], np.cumsum(w)])
    cdf /= cdf[-1]
    r = rng.random(size)
    j = np.searchsorted(cdf, r, side="right") - 1
    j = np.clip(j, 0, M - 1)
    frac = (r - cdf[j]) / np.where(w[j] > 0, cdf[j + 1] - cdf[j], 1.0)
    h = 2 * np.pi / M
    return np.mod((j - 0.5 + frac) * h, 2 * np.pi)


def sample_from_log_weights(logw, rng):
    """Row-wise inverse-CDF sampling for a stack of log-densities (R, M)."""
    logw = np.atleast_2d(logw)
    w = np.exp(logw - logw.max(axis=1, keepdims=True))
    cdf = np.cumsum(w, axis=1)
    tot = cdf[:, -1:]
    R, M = w.shape
    r = rng.random((R, 1)) * tot
    j = np.minimum((cdf < r).sum(axis=1), M - 1)
    lo = np.where(j > 0, cdf[np.arange(R), j - 1], 0.0)
    frac = (r[:, 0] - lo) / w[np.arange(R), j]
    h = 2 * np.pi / M
    return np.mod((j - 0.5 + frac) * h, 2 * np.pi)
