"""Gaussian free fields on lattices and truncated harmonic fields on the disk.

Conventions.  The Dirichlet inner product carries the factor 1/(2 pi), so a
lattice GFF with graph Laplacian L has covariance ``NORMALIZATION * L^{-1}``.
Lattice site (i, j) sits at (i, j) / (n - 1) in the unit square.
"""
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import fft as sfft
from scipy import signal

from .errors import InvalidArgument, OutOfDomain, SingularArgument
from .rng import make_rng

NORMALIZATION = 2 * math.pi


@dataclass
class LatticeField:
    values: np.ndarray
    bc: str = "zero"
    normalization: float = NORMALIZATION
    seed: int | None = None

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def spacing(self):
        return 1.0 / (self.n - 1)


def _zero_bc_spectrum(n):
    m = n - 2
    c = np.cos(np.pi * np.arange(1, m + 1) / (n - 1))
    return 4 - 2 * c[:, None] - 2 * c[None, :]


def _free_bc_spectrum(n):
    c = np.cos(np.pi * np.arange(n) / n)
    lam = 4 - 2 * c[:, None] - 2 * c[None, :]
    lam[0, 0] = np.inf  # drop the constant mode
    return lam


def sample_dgff_batch(n, bc="zero", count=1, seed=None):
    """Array of shape (count, n, n) of independent lattice GFF samples.

    Zero boundary uses the sine eigenbasis of the interior Dirichlet
    Laplacian; free boundary uses the cosine (Neumann) eigenbasis with the
    constant mode removed, so samples have mean zero.
    """
    if n < 2:
        raise InvalidArgument("n must be at least 2")
    if bc not in ("zero", "free"):
        raise InvalidArgument(f"unknown boundary condition {bc!r}")
    rng = make_rng(seed)
    out = np.zeros((count, n, n))
    if bc == "zero":
        if n <= 2:
            return out
        scale = np.sqrt(NORMALIZATION / _zero_bc_spectrum(n))
        xi = rng.standard_normal((count, n - 2, n - 2)) * scale
        out[:, 1:-1, 1:-1] = sfft.idstn(xi, type=1, norm="ortho", axes=(1, 2))
    else:
        scale = np.sqrt(NORMALIZATION / _free_bc_spectrum(n))
        xi = rng.standard_normal((count, n, n)) * scale
        out[:] = sfft.idctn(xi, type=2, norm="ortho", axes=(1, 2))
    return out


def sample_dgff(n, bc="zero", seed=None):
    vals = sample_dgff_batch(n, bc, 1, seed)[0]
    return LatticeField(vals, bc, NORMALIZATION, seed if isinstance(seed, int) else None)


def dirichlet_laplacian(n):
    """Sparse graph Laplacian on the (n-2)^2 interior sites, zero boundary."""
    from scipy import sparse

    m = n - 2
    t = sparse.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1])
    eye = sparse.identity(m)
    return (sparse.kron(t, eye) + sparse.kron(eye, t)).tocsc()


def _bilinear(values, x, y):
    """Bilinear interpolation of values[i, j] at fractional indices (x, y)."""
    n = values.shape[-1]
    i0 = np.clip(np.floor(x).astype(int), 0, n - 2)
    j0 = np.clip(np.floor(y).astype(int), 0, n - 2)
    fx = x - i0
    fy = y - j0
    v = values
    return ((1 - fx) * (1 - fy) * v[..., i0, j0] + fx * (1 - fy) * v[..., i0 + 1, j0]
            + (1 - fx) * fy * v[..., i0, j0 + 1] + fx * fy * v[..., i0 + 1, j0 + 1])


def circle_angles(eps, spacing):
    k = max(16, math.ceil(2 * math.pi * eps / spacing))
    return 2 * math.pi * np.arange(k) / k


def circle_average(fld, z, eps, values=None):
    """Mean of the bilinearly interpolated field on the circle |w - z| = eps.

    ``z`` is a complex number in unit-square coordinates.  For z on the
    boundary of the square the part of the circle inside the square is used.
    ``values`` may carry a stack of fields with the same geometry.
    """
    vals = fld.values if values is None else values
    h = fld.spacing
    if eps <= 0:
        raise InvalidArgument("eps must be positive")
    th = circle_angles(eps, h)
    x = z.real + eps * np.cos(th)
    y = z.imag + eps * np.sin(th)
    tol = 1e-12
    inside = (x >= -tol) & (x <= 1 + tol) & (y >= -tol) & (y <= 1 + tol)
    if not inside.all():
        on_edge = min(z.real, z.imag, 1 - z.real, 1 - z.imag)
        if abs(on_edge) > tol or not inside.any():
            raise OutOfDomain("circle exits the grid")
        x, y = x[inside], y[inside]
    xi = np.clip(x / h, 0, fld.n - 1)
    yi = np.clip(y / h, 0, fld.n - 1)
    return _bilinear(vals, xi, yi).mean(axis=-1)


def circle_averages(fld, zs, eps, values=None):
    """circle_average at many interior points at once (circles must fit)."""
    vals = fld.values if values is None else values
    h = fld.spacing
    zs = np.asarray(zs, complex)
    if np.any(np.minimum.reduce([zs.real, zs.imag, 1 - zs.real, 1 - zs.imag]) < eps):
        raise OutOfDomain("circle exits the grid")
    th = circle_angles(eps, h)
    x = (zs.real[:, None] + eps * np.cos(th)) / h
    y = (zs.imag[:, None] + eps * np.sin(th)) / h
    return _bilinear(vals, x, y).mean(axis=-1)


def circle_average_map(fld, eps):
    """Circle averages at every lattice site whose circle stays inside.

    Returns (averages, mask); entries outside the mask are meaningless.
    """
    n, h = fld.n, fld.spacing
    th = circle_angles(eps, h)
    r = eps / h
    ox, oy = r * np.cos(th), r * np.sin(th)
    half = int(math.ceil(r)) + 1
    ker = np.zeros((2 * half + 1, 2 * half + 1))
    i0, j0 = np.floor(ox).astype(int), np.floor(oy).astype(int)
    fx, fy = ox - i0, oy - j0
    w = 1.0 / len(th)
    for di, dj, wt in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                       (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        np.add.at(ker, (half + i0 + di, half + j0 + dj), w * wt)
    # correlation with the offset kernel = convolution with its flip
    avg = signal.fftconvolve(fld.values, ker[::-1, ::-1], mode="same")
    idx = np.arange(n)
    ok = (idx >= r) & (idx <= n - 1 - r)
    return avg, ok[:, None] & ok[None, :]


def thick_point_ratio(fld, eps):
    """max over admissible sites of |h_eps(z)| / log(1/eps)."""
    avg, mask = circle_average_map(fld, eps)
    return np.abs(avg[mask]).max() / math.log(1 / eps)


def green_disk(x, y, kind="dirichlet"):
    x, y = complex(x), complex(y)
    if x == y:
        raise SingularArgument("x = y")
    if abs(x) >= 1 or abs(y) >= 1:
        raise OutOfDomain("points must lie in the open unit disk")
    if kind == "dirichlet":
        return math.log(abs(1 - x * y.conjugate()) / abs(y - x))
    if kind == "neumann":
        return -math.log(abs((x - y) * (1 - x * y.conjugate())))
    raise InvalidArgument(f"unknown kind {kind!r}")


@dataclass
class HarmonicDiskField:
    """sum_k a_k Re z^k + b_k Im z^k + sum_i g_i log|z - x_i|, pinned at 0.

    ``variances`` records the law the coefficients were drawn from (used for
    variance compensation); zero when the field is deterministic.
    """
    a: np.ndarray
    b: np.ndarray
    singularities: list = dc_field(default_factory=list)
    variances: np.ndarray | None = None

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.a.shape != self.b.shape:
            raise InvalidArgument("coefficient arrays differ in length")
        sing = []
        for g, x in self.singularities:
            x = complex(x)
            if abs(x) > 1 + 1e-12:
                raise OutOfDomain("singularity outside the closed disk")
            if x == 0:
                # log|0 - 0| cannot be pinned; the origin term is kept outside
                raise SingularArgument("singularity at the origin cannot be pinned")
            sing.append((float(g), x))
        self.singularities = sing
        if self.variances is None:
            self.variances = np.zeros(self.degree)

    @property
    def degree(self):
        return len(self.a)

    @property
    def coef(self):
        """c_k with value Re sum c_k z^k, index 0 <-> k = 1."""
        return self.a - 1j * self.b

    pinned = True

    def copy(self):
        return HarmonicDiskField(self.a.copy(), self.b.copy(), list(self.singularities),
                                 self.variances.copy())


def zero_field(N=0):
    return HarmonicDiskField(np.zeros(N), np.zeros(N))


def _horner(c, z):
    """sum_{k>=1} c_k z^k and its derivative, c[0] <-> k = 1."""
    z = np.asarray(z, dtype=complex)
    p = np.zeros_like(z)
    dp = np.zeros_like(z)
    for ck in c[::-1]:
        dp = dp * z + p
        p = p * z + ck
    return p * z, dp * z + p


def _check_point(fld, z):
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > 1 + 1e-12):
        raise OutOfDomain("evaluation point outside the closed disk")
    for _, x in fld.singularities:
        if np.any(z == x):
            raise SingularArgument("evaluation at a singularity")
    return z


def eval_field(fld, z, deriv="value"):
    """Value (real) or gradient (array [..., 2]) of the field at z."""
    z = _check_point(fld, z)
    if deriv == "value":
        p, _ = _horner(fld.coef, z)
        v = p.real
        for g, x in fld.singularities:
            v = v + g * (np.log(np.abs(z - x)) - math.log(abs(x)))
        return v
    if deriv == "gradient":
        gc = np.conj(analytic_derivative(fld, z))
        return np.stack([gc.real, gc.imag], axis=-1)
    raise InvalidArgument(f"unknown deriv {deriv!r}")


def analytic_derivative(fld, z):
    """A'(z) where the field equals Re A; grad . v = Re(A'(z) v)."""
    z = np.asarray(z, dtype=complex)
    _, dp = _horner(fld.coef, z)
    for g, x in fld.singularities:
        dp = dp + g / (z - x)
    return dp


def boundary_values(fld, M, include_singular=True):
    """Field on the angles 2 pi j / M (expansion part via FFT)."""
    N = fld.degree
    if N >= M:
        raise InvalidArgument("grid too coarse for the degree")
    c = np.zeros(M, dtype=complex)
    c[1:N + 1] = fld.coef
    v = np.real(np.fft.ifft(c)) * M
    if include_singular:
        th = 2 * np.pi * np.arange(M) / M
        u = np.exp(1j * th)
        for g, x in fld.singularities:
            with np.errstate(divide="ignore"):
                v = v + g * (np.log(np.abs(u - x)) - math.log(abs(x)))
    return v


def fbgff_variances(N):
    """Coefficient variances 2/k for the harmonic part of the free field."""
    return 2.0 / np.arange(1, N + 1)


def sample_harmonic_fbgff(N, singularities=(), seed=None):
    if N < 0:
        raise InvalidArgument("N must be nonnegative")
    rng = make_rng(seed)
    var = fbgff_variances(N)
    sd = np.sqrt(var)
    a = rng.standard_normal(N) * sd
    b = rng.standard_normal(N) * sd
    return HarmonicDiskField(a, b, list(singularities), var)


def harmonic_covariance_oracle(x, y, M=4000):
    """Pinned covariance of the harmonic part of the free field.

    Poisson-extends the boundary covariance -2 log|u - v| twice by a
    midpoint rule on two staggered angle grids.
    """
    th = 2 * np.pi * (np.arange(M) + 0.25) / M
    ph = 2 * np.pi * (np.arange(M) + 0.75) / M
    u, v = np.exp(1j * th), np.exp(1j * ph)

    def pk(z, w):
        return np.real((w + z) / (w - z))

    kern = -2 * np.log(np.abs(u[:, None] - v[None, :]))

    def integral(p, q):
        return pk(p, u) @ kern @ pk(q, v) / M**2

    return integral(x, y) - integral(x, 0) - integral(0, y) + integral(0, 0)
