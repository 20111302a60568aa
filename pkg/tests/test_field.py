import math

import numpy as np
import pytest

from qlekit import field
from qlekit.errors import InvalidArgument, OutOfDomain, SingularArgument


def dense_green(n):
    L = field.dirichlet_laplacian(n).toarray()
    return field.NORMALIZATION * np.linalg.inv(L)


def test_zero_boundary_is_zero():
    f = field.sample_dgff(17, seed=1)
    v = f.values
    assert v.shape == (17, 17)
    assert np.all(v[0] == 0) and np.all(v[-1] == 0)
    assert np.all(v[:, 0] == 0) and np.all(v[:, -1] == 0)


def test_seed_reproducible():
    a = field.sample_dgff(9, seed=5).values
    b = field.sample_dgff(9, seed=5).values
    c = field.sample_dgff(9, seed=6).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_dgff_covariance_small_grid():
    # oracle: dense inverse of the interior Laplacian
    n = 7
    s = field.sample_dgff_batch(n, "zero", 40_000, seed=2)[:, 1:-1, 1:-1].reshape(40_000, -1)
    emp = np.cov(s.T)
    G = dense_green(n)
    sd = np.sqrt(np.diag(G))
    assert np.abs(emp - G).max() / sd.max() ** 2 < 0.03


def test_free_boundary_has_mean_zero():
    s = field.sample_dgff_batch(12, "free", 5, seed=3)
    assert np.allclose(s.mean(axis=(1, 2)), 0, atol=1e-12)


def test_free_boundary_increment_variance():
    # Neumann Laplacian pseudo-inverse gives the law modulo constants
    n = 6
    V = n * n
    A = np.zeros((V, V))
    for i in range(n):
        for j in range(n):
            v = i * n + j
            for di, dj in ((1, 0), (0, 1)):
                if i + di < n and j + dj < n:
                    w = (i + di) * n + j + dj
                    A[v, v] += 1
                    A[w, w] += 1
                    A[v, w] -= 1
                    A[w, v] -= 1
    G = field.NORMALIZATION * np.linalg.pinv(A)
    s = field.sample_dgff_batch(n, "free", 40_000, seed=4).reshape(40_000, -1)
    d = s[:, 0] - s[:, V - 1]
    pred = G[0, 0] + G[-1, -1] - 2 * G[0, -1]
    assert abs(d.var() / pred - 1) < 0.03


def test_bad_arguments():
    with pytest.raises(InvalidArgument):
        field.sample_dgff(1)
    with pytest.raises(InvalidArgument):
        field.sample_dgff(5, bc="periodic")


def test_green_disk_closed_form():
    # -log|(x - y) / (1 - x conj(y))| at 0.3, 0.6
    assert field.green_disk(0.3, 0.6) == pytest.approx(-math.log(0.3 / 0.82), abs=1e-12)
    assert field.green_disk(0.3, 0.6) == pytest.approx(1.005522, abs=1e-6)
    assert field.green_disk(0.2j, -0.5) == pytest.approx(field.green_disk(-0.5, 0.2j))
    with pytest.raises(SingularArgument):
        field.green_disk(0.1, 0.1)
    with pytest.raises(OutOfDomain):
        field.green_disk(1.0, 0.1)


def test_circle_average_of_affine_field_is_center_value():
    n = 65
    x = np.linspace(0, 1, n)
    vals = 2 * x[:, None] - 3 * x[None, :] + 1
    f = field.LatticeField(vals)
    z = 0.4 + 0.55j
    # bilinear interpolation is exact for affine data; grid index i is x
    assert field.circle_average(f, z, 0.2) == pytest.approx(2 * 0.4 - 3 * 0.55 + 1, abs=1e-12)


def test_circle_averages_matches_single():
    f = field.sample_dgff(65, seed=7)
    zs = np.array([0.3 + 0.4j, 0.5 + 0.5j, 0.62 + 0.31j])
    many = field.circle_averages(f, zs, 0.1)
    one = [field.circle_average(f, z, 0.1) for z in zs]
    assert np.allclose(many, one, atol=1e-12)
    with pytest.raises(OutOfDomain):
        field.circle_averages(f, zs, 0.35)


def test_circle_angles_minimum():
    assert len(field.circle_angles(1e-4, 0.01)) == 16


def test_harmonic_field_pinned_and_linear():
    rng = np.random.default_rng(0)
    a1, b1, a2, b2 = rng.normal(size=(4, 6))
    f1 = field.HarmonicDiskField(a1, b1)
    f2 = field.HarmonicDiskField(a2, b2)
    f12 = field.HarmonicDiskField(a1 + 2 * a2, b1 + 2 * b2)
    z = np.array([0.1 + 0.2j, -0.5, 0.3j])
    assert field.eval_field(f1, 0) == 0
    assert np.allclose(field.eval_field(f12, z),
                       field.eval_field(f1, z) + 2 * field.eval_field(f2, z))


def test_harmonic_field_direct_sum():
    a, b = [0.5, -1.0], [0.25, 2.0]
    f = field.HarmonicDiskField(a, b, [(0.7, 1j)])
    z = 0.3 - 0.4j
    direct = (a[0] * z.real + b[0] * z.imag + a[1] * (z**2).real + b[1] * (z**2).imag
              + 0.7 * (math.log(abs(z - 1j)) - math.log(1)))
    assert field.eval_field(f, z) == pytest.approx(direct, abs=1e-14)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    f = field.HarmonicDiskField(rng.normal(size=8), rng.normal(size=8), [(0.4, np.exp(1j))])
    z = np.array([0.2 + 0.1j, -0.4 + 0.3j])
    h = 1e-6
    fd = np.stack([(field.eval_field(f, z + h) - field.eval_field(f, z - h)) / (2 * h),
                   (field.eval_field(f, z + 1j * h) - field.eval_field(f, z - 1j * h)) / (2 * h)],
                  axis=-1)
    assert np.allclose(field.eval_field(f, z, "gradient"), fd, rtol=1e-7, atol=1e-8)


def test_harmonic_field_errors():
    with pytest.raises(SingularArgument):
        field.HarmonicDiskField([], [], [(1.0, 0)])
    with pytest.raises(OutOfDomain):
        field.HarmonicDiskField([], [], [(1.0, 2)])
    f = field.HarmonicDiskField([1.0], [0.0], [(1.0, 0.5)])
    with pytest.raises(SingularArgument):
        field.eval_field(f, 0.5)
    with pytest.raises(OutOfDomain):
        field.eval_field(f, 1.5)


def test_boundary_values_fft_matches_direct():
    rng = np.random.default_rng(2)
    f = field.HarmonicDiskField(rng.normal(size=10), rng.normal(size=10))
    M = 64
    u = np.exp(2j * np.pi * np.arange(M) / M)
    assert np.allclose(field.boundary_values(f, M), field.eval_field(f, u), atol=1e-12)


def test_harmonic_covariance_oracle_closed_form():
    # pinned free-field covariance: -2 log|1 - x conj(y)|
    x, y = 0.3 + 0.2j, -0.1 + 0.5j
    expect = -2 * math.log(abs(1 - x * y.conjugate()))
    assert field.harmonic_covariance_oracle(x, y) == pytest.approx(expect, abs=1e-3)


def test_fbgff_variances_match_oracle():
    # sum_k (2/k) Re(x^k conj(y)^k) against the closed form
    x, y = 0.5, 0.4j + 0.1
    var = field.fbgff_variances(400)
    k = np.arange(1, 401)
    series = np.sum(var * np.real((x * np.conj(y)) ** k))
    assert series == pytest.approx(-2 * math.log(abs(1 - x * np.conj(y))), abs=1e-12)


def test_harmonic_samples_covariance():
    x, y = 0.4, -0.2 + 0.3j
    vx, vy = [], []
    for s in range(4000):
        f = field.sample_harmonic_fbgff(60, seed=s)
        vx.append(field.eval_field(f, x))
        vy.append(field.eval_field(f, y))
    c = np.cov(vx, vy)
    assert c[0, 1] == pytest.approx(-2 * math.log(abs(1 - x * np.conj(y))), abs=0.03)
    assert c[0, 0] == pytest.approx(-2 * math.log(1 - x * x), rel=0.06)


def test_thick_points_bounded():
    f = field.sample_dgff(65, seed=8)
    r = field.thick_point_ratio(f, 0.1)
    assert np.isfinite(r)


def test_circle_average_map_matches_pointwise():
    f = field.sample_dgff(33, seed=9)
    avg, mask = field.circle_average_map(f, 0.2)
    h = f.spacing
    for i, j in ((10, 12), (16, 16), (20, 9)):
        assert mask[i, j]
        assert avg[i, j] == pytest.approx(field.circle_average(f, complex(i * h, j * h), 0.2),
                                          abs=1e-10)
