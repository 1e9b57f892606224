import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphmean.geometry import (
    H2,
    S2,
    Point,
    distance,
    geodesic_circle_quadrature,
    horospherical_bracket,
    mobius_translate,
    polar_point,
    rotation_from_pole,
)
from sphmean.phantoms import Bump, Phantom
from sphmean.transform import spherical_mean

disc = st.tuples(st.floats(0.0, 0.9), st.floats(0.0, 2 * math.pi)).map(
    lambda p: Point(H2, [p[0] * math.cos(p[1]), p[0] * math.sin(p[1])])
)
sphere = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda v: np.linalg.norm(v) > 0.1
).map(lambda v: Point(S2, list(v)))


def test_h2_distance_examples():
    o = Point(H2, [0.0, 0.0])
    assert distance(o, Point(H2, [0.5, 0.0])) == pytest.approx(math.log(3.0), rel=1e-14)
    assert distance(o, o) == 0.0


def test_s2_distance_examples():
    assert distance(Point(S2, [0, 0, 1]), Point(S2, [1, 0, 0])) == pytest.approx(math.pi / 2, rel=1e-15)


def test_mixed_geometry_rejected():
    with pytest.raises(ValueError):
        distance(Point(H2, [0.0, 0.0]), Point(S2, [0, 0, 1]))


def test_point_validation():
    with pytest.raises(ValueError):
        Point(H2, [1.0, 0.0])
    with pytest.raises(ValueError):
        Point(H2, [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        Point(S2, [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        Point("H3", [0.0, 0.0])
    assert np.linalg.norm(Point(S2, [3.0, 4.0, 0.0]).coords) == pytest.approx(1.0, abs=1e-15)


def test_mobius_examples():
    a = Point(H2, [0.3, -0.2])
    zero = Point(H2, [0.0, 0.0])
    np.testing.assert_allclose(mobius_translate(a, zero).coords, a.coords, atol=1e-16)
    z = Point(H2, [0.1, 0.5])
    np.testing.assert_array_equal(mobius_translate(zero, z).coords, z.coords)


@settings(max_examples=200, deadline=None)
@given(a=disc, x=disc, y=disc)
def test_mobius_is_isometry(a, x, y):
    d = distance(x, y)
    moved = distance(mobius_translate(a, x), mobius_translate(a, y))
    assert abs(moved - d) <= 1e-10 * max(1.0, d)


@settings(max_examples=200, deadline=None)
@given(x=disc, y=disc)
def test_distance_from_translated_origin(x, y):
    back = Point(H2, -x.coords)
    d0 = distance(Point(H2, [0.0, 0.0]), mobius_translate(back, y))
    assert abs(d0 - distance(x, y)) <= 1e-10 * max(1.0, d0)


@settings(max_examples=500, deadline=None)
@given(x=disc, y=disc, z=disc)
def test_triangle_inequality_h2(x, y, z):
    assert distance(x, z) <= distance(x, y) + distance(y, z) + 1e-12


@settings(max_examples=500, deadline=None)
@given(x=sphere, y=sphere, z=sphere)
def test_triangle_inequality_s2(x, y, z):
    assert distance(x, z) <= distance(x, y) + distance(y, z) + 1e-12


def test_quadrature_about_origin():
    q = geodesic_circle_quadrature(Point(H2, [0.0, 0.0]), 1.0, 64)
    np.testing.assert_allclose(np.hypot(q.nodes[:, 0], q.nodes[:, 1]), math.tanh(0.5), rtol=1e-15)
    assert q.measure == pytest.approx(2 * math.pi * math.sinh(1.0), rel=1e-14)
    assert q.mean(lambda c: np.ones(c.shape[:-1])) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("geometry, center", [(H2, [0.4, -0.3]), (S2, [0.3, 0.5, 0.8])])
def test_quadrature_nodes_on_circle(geometry, center):
    c = Point(geometry, center)
    q = geodesic_circle_quadrature(c, 0.9, 128)
    for node in q.nodes:
        assert distance(c, Point(geometry, node)) == pytest.approx(0.9, abs=1e-10)


def test_quadrature_measure_matches_metric_arclength():
    # hyperbolic length of the off-centre node polygon: |dx| 2 / (1 - |x|^2)
    c = Point(H2, [0.35, 0.2])
    r = 1.3
    q = geodesic_circle_quadrature(c, r, 8192)
    x = q.nodes
    y = np.roll(x, -1, axis=0)
    mid = 0.5 * (x + y)
    length = np.sum(np.linalg.norm(y - x, axis=1) * 2.0 / (1.0 - np.sum(mid**2, axis=1)))
    assert length == pytest.approx(2 * math.pi * math.sinh(r), rel=1e-6)
    assert q.measure == pytest.approx(2 * math.pi * math.sinh(r), rel=1e-14)


def test_quadrature_validation():
    o = Point(H2, [0.0, 0.0])
    with pytest.raises(ValueError):
        geodesic_circle_quadrature(o, 1.0, 4)
    with pytest.raises(ValueError):
        geodesic_circle_quadrature(o, 0.0, 16)
    with pytest.raises(ValueError):
        geodesic_circle_quadrature(o, 80.0, 16)
    with pytest.raises(ValueError):
        geodesic_circle_quadrature(Point(S2, [0, 0, 1]), 3.2, 16)


@pytest.mark.parametrize("geometry", [H2, S2])
def test_quadrature_converges_spectrally(geometry):
    # an analytic integrand: the equispaced rule converges geometrically
    def f(coords):
        return np.exp(coords[..., 0] - 0.5 * coords[..., 1]) * np.cos(2 * coords[..., 1])

    c = polar_point(geometry, 0.1, 4.0)
    a = geodesic_circle_quadrature(c, 0.5, 64).mean(f)
    b = geodesic_circle_quadrature(c, 0.5, 128).mean(f)
    assert abs(a - b) <= 1e-10


def test_spherical_mean_invariant_under_mobius():
    a = Point(H2, [0.2, -0.35])
    centre = Point(H2, [0.1, 0.3])
    bump = Point(H2, [-0.15, 0.2])
    f = Phantom(H2, [Bump("gaussian_bump", bump, 0.25)])
    g = Phantom(H2, [Bump("gaussian_bump", mobius_translate(a, bump), 0.25)])
    for r in (0.3, 0.7, 1.1):
        m1 = spherical_mean(f, centre, r, N=256)
        m2 = spherical_mean(g, mobius_translate(a, centre), r, N=256)
        assert abs(m1 - m2) <= 1e-8


def test_spherical_mean_invariant_under_rotation():
    Q = rotation_from_pole([0.6, -0.2, 0.7])
    centre = polar_point(S2, 0.4, 1.0)
    bump = polar_point(S2, 0.3, 2.5)
    f = Phantom(S2, [Bump("polynomial_bump", bump, 0.2)])
    g = Phantom(S2, [Bump("polynomial_bump", Point(S2, Q @ bump.coords), 0.2)])
    for r in (0.2, 0.6, 1.0):
        m1 = spherical_mean(f, centre, r, N=256)
        m2 = spherical_mean(g, Point(S2, Q @ centre.coords), r, N=256)
        assert abs(m1 - m2) <= 1e-8


def test_rotation_from_pole():
    for c in ([0, 0, 1], [0, 0, -1], [1, 2, 3]):
        Q = rotation_from_pole(c)
        np.testing.assert_allclose(Q @ [0, 0, 1], np.array(c) / np.linalg.norm(c), atol=1e-15)
        np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-15)


def test_horospherical_bracket_examples():
    eta = np.array([math.cos(0.4), math.sin(0.4)])
    assert horospherical_bracket(Point(H2, [0.0, 0.0]), eta) == 0.0
    t = 0.6
    assert horospherical_bracket(Point(H2, t * eta), eta) == pytest.approx(math.log((1 + t) / (1 - t)), rel=1e-14)
    with pytest.raises(ValueError):
        horospherical_bracket(Point(H2, [0.1, 0.0]), [2.0, 0.0])
    with pytest.raises(ValueError):
        horospherical_bracket(Point(S2, [0, 0, 1]), eta)


@settings(max_examples=200, deadline=None)
@given(x=disc, phi=st.floats(0, 2 * math.pi))
def test_horospherical_bracket_bounded_by_distance(x, phi):
    eta = np.array([math.cos(phi), math.sin(phi)])
    d = distance(Point(H2, [0.0, 0.0]), x)
    assert abs(horospherical_bracket(x, eta)) <= d + 1e-10
