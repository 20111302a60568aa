import math

import numpy as np
import pytest

from qlekit import loewner
from qlekit.errors import InvalidArgument, InvalidCurve, OutOfDomain
from qlekit.lqg import CircleMeasure, density_measure, point_mass


def test_vector_field_identities():
    u, z = np.exp(0.4j), 0.3 - 0.2j
    assert loewner.phi(u, z) == pytest.approx(z * loewner.psi(u, z))
    h = 1e-6
    fd = (loewner.phi(u, z + h) - loewner.phi(u, z - h)) / (2 * h)
    assert loewner.dphi_dz(u, z) == pytest.approx(fd, rel=1e-8)


def test_uniform_driving_is_dilation():
    z = np.array([0.2, -0.1 + 0.3j, 0.05j])
    st = loewner.solve_forward(loewner.uniform_driving(0.8, 0.1), z, 0.8)[-1]
    assert np.allclose(st.images, math.exp(0.8) * z, atol=1e-10)
    assert np.allclose(st.logderiv, 0.8, atol=1e-9)


def test_uniform_swallow_time_is_log2():
    st = loewner.solve_forward(loewner.uniform_driving(1.0, 0.05), [0.5], 1.0)[-1]
    assert st.swallowed[0]
    assert st.swallow_time[0] == pytest.approx(math.log(2), abs=1e-6)


def test_point_mass_matches_slit_map():
    # closed form via the Koebe function, derived independently of the ODE
    theta, s = 0.9, 0.3
    z = np.array([0.1 + 0.1j, -0.5, 0.3j, 0.6 * np.exp(2.5j)])
    st = loewner.solve_forward(loewner.constant_driving(point_mass(theta), s, 0.05), z, s)[-1]
    assert np.allclose(st.images, loewner.slit_map(z, theta, s), atol=1e-9)
    assert st.deriv0 == pytest.approx(math.exp(s), abs=1e-9)


def test_slit_tip_and_capacity_are_inverse():
    for s in (1e-4, 0.05, 0.5, 2.0):
        x = loewner._slit_tip(s)
        assert loewner.slit_capacity(x) == pytest.approx(s, rel=1e-10)
        assert x / (1 + x) ** 2 == pytest.approx(math.exp(-s) / 4, rel=1e-12)


def test_inverse_map_round_trip():
    d = loewner.DrivingMeasure(0.05, [point_mass(0.3 * k) for k in range(6)])
    z = np.array([0.2, -0.4j, 0.1 + 0.1j])
    w = loewner.solve_forward(d, z, d.T)[-1].images
    assert np.allclose(loewner.inverse_map(d, d.T, w), z, atol=1e-9)


def test_reverse_flow_shrinks():
    meas = density_measure(lambda th: 1 + 0.5 * np.sin(th), 256)
    st = loewner.solve_reverse(loewner.constant_driving(meas, 0.4, 0.1), [0.5, 0.3j], 0.4)[-1]
    assert st.deriv0 == pytest.approx(math.exp(-0.4), rel=1e-9)
    assert np.all(np.abs(st.images) < [0.5, 0.3])


def test_record_times():
    out = loewner.solve_forward(loewner.uniform_driving(0.5, 0.1), [0.1], 0.5,
                                record_times=[0, 0.2, 0.5])
    assert [s.t for s in out] == pytest.approx([0, 0.2, 0.5])
    assert out[1].images[0] == pytest.approx(0.1 * math.exp(0.2))


def test_flow_rejects_outside_points():
    with pytest.raises(OutOfDomain):
        loewner.solve_forward(loewner.uniform_driving(0.1, 0.1), [1.2], 0.1)


def test_extract_straight_slit():
    theta = -1.1
    times = np.linspace(0, 0.2, 21)
    curve = np.exp(1j * theta) * np.array([1.0] + [loewner._slit_tip(t) for t in times[1:]])
    d, raw = loewner.extract_driving(curve, 0.01)
    assert raw[:, 0].sum() == pytest.approx(0.2, abs=1e-9)
    assert np.allclose(raw[:, 1], theta, atol=1e-9)
    assert len(d.slices) == 20


def test_tip_path_follows_slit():
    pts = loewner.tip_path(lambda t: 0.5, [0.0, 0.1, 0.2])
    x = [loewner._slit_tip(t) if t else 1.0 for t in (0.0, 0.1, 0.2)]
    assert np.allclose(pts, np.exp(0.5j) * np.array(x), atol=1e-6)


def test_extract_rejects_bad_curves():
    with pytest.raises(InvalidCurve):
        loewner.extract_driving([0.5, 0.4], 0.01)
    with pytest.raises(InvalidCurve):
        loewner.extract_driving([1.0, 1.2], 0.01)
    bow = [1.0, 0.8, 0.7 + 0.1j, 0.75 - 0.1j, 0.72 + 0.2j]
    with pytest.raises(InvalidCurve):
        loewner.extract_driving(bow, 0.01)


def test_caratheodory_distance():
    d = loewner.constant_driving(point_mass(0.2), 0.1, 0.05)
    e = loewner.constant_driving(point_mass(0.25), 0.1, 0.05)
    assert loewner.caratheodory_distance(d, d, 0.5, [0.1], 32) == 0
    assert loewner.caratheodory_distance(d, e, 0.5, [0.1], 32) > 0
    with pytest.raises(InvalidArgument):
        loewner.caratheodory_distance(d, e, 1.0, [0.1])


def test_hull_boundary_inside_disk():
    d = loewner.constant_driving(point_mass(0.0), 0.1, 0.05)
    w = loewner.hull_boundary(d, 0.1, resolution=32)
    assert w.shape == (32,) and np.all(np.abs(w) < 1)


def test_driving_rows():
    d = loewner.DrivingMeasure(0.1, [CircleMeasure(atoms=([0.1, 0.2], [0.5, 0.5]))])
    assert d.to_rows() == [(0.0, 0.1, 0.5), (0.0, 0.2, 0.5)]
    assert d.at(0.05) is d.slices[0]
