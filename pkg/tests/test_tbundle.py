import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isotm import geom_core as gc
from isotm import tbundle as tb
from isotm.errors import DomainError

from conftest import wavy_field

vec2 = st.lists(st.floats(-1, 1), min_size=2, max_size=2).map(np.array)


@given(vec2, vec2, vec2, vec2)
def test_split_and_lift_roundtrip(x, y, h, v):
    s2 = gc.sphere_stereographic(2)
    at = tb.TMPoint(x, y)
    A = tb.lift(s2, h, v, at)
    hh, vv = tb.split(s2, A)
    np.testing.assert_allclose(hh, h, atol=1e-12)
    np.testing.assert_allclose(vv, v, atol=1e-12)
    np.testing.assert_allclose(tb.lift_matrix(s2, at) @ tb.split_matrix(s2, at), np.eye(4), atol=1e-12)


def test_connection_map_kills_horizontal(s2):
    at = tb.TMPoint([0.3, -0.2], [0.5, 0.7])
    assert np.all(np.abs(tb.connection_map(s2, tb.horizontal_lift(s2, [1.0, 0.4], at))) < 1e-15)
    np.testing.assert_array_equal(tb.projection(tb.vertical_lift(s2, [1.0, 0.4], at)), 0)


def test_bracket_hh(s2, rng):
    X, Y = wavy_field(rng, 2), wavy_field(rng, 2)
    at = tb.TMPoint([0.3, -0.2], [0.5, 0.7])
    p = at.x
    br = tb.bracket_fd(tb.lifted_field(s2, X, "h"), tb.lifted_field(s2, Y, "h"), at)
    XY = Y.derivative(p) @ X(p) - X.derivative(p) @ Y(p)
    R = gc.riemann(s2, p)
    want = tb.lift(s2, XY, -gc.curvature_apply(R, X(p), Y(p), at.y), at).components
    np.testing.assert_allclose(br.components, want, atol=1e-4)


def test_bracket_hv_and_vv(s2, rng):
    X, Y = wavy_field(rng, 2), wavy_field(rng, 2)
    at = tb.TMPoint([-0.4, 0.6], [0.2, -0.9])
    p = at.x
    br = tb.bracket_fd(tb.lifted_field(s2, X, "h"), tb.lifted_field(s2, Y, "v"), at)
    want = tb.vertical_lift(s2, gc.covariant_derivative(s2, Y, X(p), p), at).components
    np.testing.assert_allclose(br.components, want, atol=1e-4)
    vv = tb.bracket_fd(tb.lifted_field(s2, X, "v"), tb.lifted_field(s2, Y, "v"), at)
    np.testing.assert_allclose(vv.components, 0, atol=1e-4)


def test_lift_derivatives_of_base_functions(s2, rng):
    # X^h(f o pi) = (X f) o pi and X^v(f o pi) = 0 for f = g(Y, Z)
    X, Y, Z = (wavy_field(rng, 2) for _ in range(3))
    at = tb.TMPoint([0.1, 0.5], [0.3, 0.3])

    def f(q):
        return s2.inner(q[:2], Y(q[:2]), Z(q[:2]))

    from isotm import fd

    grad = fd.jacobian(f, at.coords)
    Xh = tb.horizontal_lift(s2, X(at.x), at).components
    Xv = tb.vertical_lift(s2, X(at.x), at).components
    base = fd.directional(lambda x: s2.inner(x, Y(x), Z(x)), at.x, X(at.x))
    assert grad @ Xh == pytest.approx(base, abs=1e-6)
    assert grad @ Xv == pytest.approx(0.0, abs=1e-12)


def test_bracket_outside_domain(s2):
    at = tb.TMPoint([4.0, 0.0], [0.1, 0.1])
    F = tb.lifted_field(s2, gc.constant_field([1.0, 0.0]), "h")
    with pytest.raises(DomainError):
        tb.bracket_fd(F, F, at)


def test_liouville(s2):
    at = tb.TMPoint([0.3, 0.2], [1.0, -0.5])
    A = tb.lift(s2, [0.4, 0.1], [3.0, 2.0], at)
    assert tb.liouville_form(s2, A) == pytest.approx(s2.inner(at.x, [0.4, 0.1], at.y))
    W = tb.exterior_liouville(s2, at)
    np.testing.assert_allclose(W, -W.T)
    assert tb.energy_function(s2, at) == pytest.approx(0.5 * s2.inner(at.x, at.y, at.y))
