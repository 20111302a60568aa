import math

import numpy as np
import pytest

from qlekit import field, qle, sle
from qlekit.errors import InvalidArgument, OutOfRange


def test_init_law_and_errors():
    st = qle.qle_init(6.0, 5, seed=1)
    (g, x), = st.field.singularities
    assert g == pytest.approx(2 / math.sqrt(6))
    assert abs(x) == pytest.approx(1) and np.angle(x) % (2 * np.pi) == pytest.approx(st.atom)
    assert np.allclose(st.field.variances, 2 / np.arange(1, 6))
    with pytest.raises(OutOfRange):
        qle.qle_init(1.0, 4)
    with pytest.raises(InvalidArgument):
        qle.qle_init(6.0, -1)


def test_origin_coefficient():
    assert qle.origin_coefficient(6.0) == pytest.approx(-12 / (2 * math.sqrt(6)))


def test_drift_closed_form_example():
    # D = P*/sqrt(kappa) + Q d_theta Pbar with P* = 2, d_theta Pbar = -4, Q(6) = 2/g + g/2
    D, sigma = qle.qle_drift(field.zero_field(0), 0.5, 1.0, 6.0)
    g = 4 / math.sqrt(6)
    assert D == pytest.approx(2 / math.sqrt(6) - 4 * (2 / g + g / 2), abs=1e-12)
    assert D == pytest.approx(-7.3485, abs=1e-4)
    assert sigma == pytest.approx(2.0)


def test_drift_gradient_term():
    f = field.HarmonicDiskField([1.0], [0.0])  # Re z
    z, u = 0.2 + 0.1j, np.exp(0.3j)
    D0, _ = qle.qle_drift(field.zero_field(1), z, u, 4.0)
    D1, _ = qle.qle_drift(f, z, u, 4.0)
    # grad(Re z) . Phi = Re(Phi)
    assert D0 - D1 == pytest.approx((z * (u + z) / (u - z)).real)


def test_atom_weights_are_boundary_field():
    st = qle.qle_init(6.0, 6, seed=2)
    M = 256
    lw = qle.atom_log_weights(st.field, 6.0, M)
    th = 2 * np.pi * np.arange(M) / M
    u = np.exp(1j * th)
    far = np.abs(u - st.field.singularities[0][1]) > 1e-6
    direct = -field.eval_field(st.field, u[far]) / math.sqrt(6)
    assert np.allclose(lw[far], direct, atol=1e-10)


def test_block_keeps_pin_and_tracks_time():
    st = qle.qle_init(6.0, 16, seed=3)
    for b in range(3):
        st = qle.qle_block(st, 0.05, 1e-3, seed=10 + b)
        assert field.eval_field(st.field, 0) == 0
    assert st.t == pytest.approx(0.15) and st.block == 3
    assert len(st.history) == 3 and len(st.history[0].V) == 101
    assert st.field.singularities == []


def test_block_argument_checks():
    st = qle.qle_init(6.0, 4, seed=4)
    with pytest.raises(InvalidArgument):
        qle.qle_block(st, 0.0005, 1e-3)
    with pytest.raises(InvalidArgument):
        qle.qle_block(st, 0.0105, 1e-3)


def n0_setup(dt, seed):
    kappa, delta = 6.0, 0.02
    probes = np.array([0.5, 0.3j, -0.2 + 0.1j])
    run = sle.sample_radial_sle(kappa, delta, dt, probes, seed=seed)
    half = np.concatenate([[0.0], np.cumsum(run.increments.ravel() * math.sqrt(kappa))])
    Wd = half[-1]
    fld = field.HarmonicDiskField([], [], [(2 / math.sqrt(kappa), np.exp(1j * Wd))])
    s0 = qle.QleState(fld, Wd, 0.0, kappa, 0, qle.origin_coefficient(kappa))
    oracle = np.array([sle.coupling_h(run, z, delta) for z in probes])
    oracle += -qle.origin_coefficient(kappa) * np.log(np.abs(probes)) - delta / math.sqrt(kappa)
    return s0, half[::-1] - Wd, probes, oracle


@pytest.mark.parametrize("method,dt,tol", [("exact", 1e-3, 1e-10), ("sde", 1e-4, 1e-3)])
def test_zero_degree_block_matches_coupling(method, dt, tol):
    s0, drive, probes, oracle = n0_setup(dt, 5)
    s1 = qle.qle_block(s0, 0.02, dt, atom=s0.atom, driving=drive, noise=False,
                       method=method, probes=probes)
    assert np.abs(s1.probe_values - oracle).max() < tol


def test_exact_and_sde_methods_agree():
    st = qle.qle_init(6.0, 8, seed=6)
    drive = np.concatenate([[0.0], np.cumsum(np.random.default_rng(0).normal(size=40) * 0.05)])
    probes = np.array([0.3, -0.4j])
    a = qle.qle_block(st, 0.02, 1e-3, atom=1.0, driving=drive, noise=False, probes=probes)
    b = qle.qle_block(st, 0.02, 1e-4, atom=1.0, driving=np.interp(np.linspace(0, 40, 401),
                      np.arange(41), drive), noise=False, method="sde", probes=probes)
    assert np.abs(a.probe_values - b.probe_values).max() < 5e-3


def test_batch_shape_and_pin():
    vals, degraded = qle.qle_batch(6.0, 8, 0.02, 2, 50, 1e-3, seed=7, probes=(0.0, 0.3))
    assert vals.shape == (3, 50, 2)
    assert np.all(vals[:, :, 0] == 0)
    assert 0 <= degraded <= 1


def test_run_conformal_radius_and_hulls():
    tr = qle.qle_run(6.0, 0.05, 0.1, 8, 1e-3, seed=8, hull_resolution=32)
    assert len(tr.states) == 3 and len(tr.hulls) == 2
    assert tr.conformal_radius[-1] == pytest.approx(math.exp(-0.1), rel=1e-8)
    assert all(np.all(np.abs(h) < 1) for h in tr.hulls)
    assert len(tr.nu[0]) == 256 and tr.nu[0].sum() == pytest.approx(1.0)
    with pytest.raises(InvalidArgument):
        qle.qle_run(6.0, 0.05, 0.12, 8)
