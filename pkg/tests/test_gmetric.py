import numpy as np
import pytest

from isotm import geom_core as gc
from isotm import gmetric as gm
from isotm import iso
from isotm.errors import (
    JetMismatchError,
    NotRadialError,
    NotUnitFiberError,
    PointMismatchError,
)
from isotm.tbundle import TMPoint, TMVector, bracket_fd, lift, lifted_field

from conftest import wavy_field

STRUCTURES = [
    iso.sasaki(),
    iso.family_sigma0(1.0, 1.0),
    iso.family_general(1.0, 0.7, 0.5),
    iso.family_general(-0.4, 1.5, 2.0),
]


def _rel(a, b):
    return np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b)))


@pytest.mark.parametrize("s", STRUCTURES, ids=lambda s: s.name)
def test_metric_blocks_and_spd(s2, s):
    m = gm.TangentMetric(s, s2)
    at = TMPoint([0.4, -0.3], [0.6, 0.2])
    G = gm.metric_matrix(m, at)
    assert np.all(np.linalg.eigvalsh(G) > 0)
    J = iso.J_matrix(s, s2, at)
    np.testing.assert_allclose(J.T @ G @ J, G, atol=1e-9)
    np.testing.assert_allclose(gm.metric_from_liouville(m, at), G, atol=1e-5)
    a, d, sg, g = m.values(at)
    X, Y = np.array([1.0, 0.2]), np.array([-0.3, 0.8])
    hX, vY = lift(s2, X, 0 * X, at), lift(s2, 0 * Y, Y, at)
    assert gm.metric_eval(m, hX, lift(s2, Y, 0 * Y, at)) == pytest.approx(a * X @ g @ Y)
    assert gm.metric_eval(m, hX, vY) == pytest.approx(-sg * X @ g @ Y)
    assert gm.metric_eval(m, lift(s2, 0 * X, X, at), vY) == pytest.approx(d * X @ g @ Y)


def test_metric_eval_rejects_different_points(s2):
    m = gm.TangentMetric(iso.sasaki(), s2)
    A = TMVector(TMPoint([0.0, 0.0], [1.0, 0.0]), np.ones(4))
    B = TMVector(TMPoint([0.1, 0.0], [1.0, 0.0]), np.ones(4))
    with pytest.raises(PointMismatchError):
        gm.metric_eval(m, A, B)


@pytest.mark.parametrize("s", STRUCTURES, ids=lambda s: s.name)
@pytest.mark.parametrize("kind", ["hh", "hv", "vh", "vv"])
def test_closed_connection_matches_koszul(s2, s, kind, rng):
    m = gm.TangentMetric(s, s2)
    X, Y = wavy_field(rng, 2), wavy_field(rng, 2)
    at = TMPoint([0.3, 0.5], [0.4, -0.7])
    cv = gm.levi_civita_closed(m, X, Y, kind, at)
    ora = gm.koszul_oracle(m, lifted_field(s2, X, kind[0]), lifted_field(s2, Y, kind[1]), at)
    assert _rel(cv.result.components, ora.components) <= 1e-5
    np.testing.assert_allclose(cv.terms_sum(), cv.result.components, atol=1e-12)


def test_printed_connection_needs_sigma_zero(s2, rng):
    X, Y = wavy_field(rng, 2), wavy_field(rng, 2)
    at = TMPoint([0.3, 0.5], [0.4, -0.7])
    m0 = gm.TangentMetric(iso.family_sigma0(1.0, 1.0), s2)
    a = gm.levi_civita_closed(m0, X, Y, "hh", at, form="printed").result.components
    b = gm.levi_civita_closed(m0, X, Y, "hh", at).result.components
    np.testing.assert_allclose(a, b, atol=1e-12)
    m1 = gm.TangentMetric(iso.family_general(1.0, 0.7, 0.5), s2)
    a = gm.levi_civita_closed(m1, X, Y, "hh", at, form="printed").result.components
    b = gm.levi_civita_closed(m1, X, Y, "hh", at).result.components
    assert np.max(np.abs(a - b)) > 1e-3


def test_jet_mismatch_is_reported(s2, rng):
    good = iso.family_sigma0(1.0, 1.0)
    bad = iso.IsotropicStructure(good.delta_fn, good.sigma_fn, lambda c, x, y: 2 * good.d_delta_fn(c, x, y),
                                 good.d_sigma_fn, name="bad_jet")
    m = gm.TangentMetric(bad, s2)
    X = wavy_field(rng, 2)
    with pytest.raises(JetMismatchError) as exc:
        gm.levi_civita_closed(m, X, X, "hh", TMPoint([0.1, 0.2], [0.5, 0.5]))
    assert exc.value.report["delta"] > 1e-6


def test_oracle_torsion_free_and_compatible(s2, rng):
    m = gm.TangentMetric(iso.family_general(1.0, 0.7, 0.5), s2)
    at = TMPoint([-0.2, 0.4], [0.3, 0.9])
    F = lifted_field(s2, wavy_field(rng, 2), "h")
    G = lifted_field(s2, wavy_field(rng, 2), "v")
    H = lifted_field(s2, wavy_field(rng, 2), "h")
    tors = gm.koszul_oracle(m, F, G, at).components - gm.koszul_oracle(m, G, F, at).components \
        - bracket_fd(F, G, at).components
    assert np.max(np.abs(tors)) <= 1e-5
    from isotm import fd

    lhs = fd.directional(lambda c: gm.metric_eval(m, TMVector(TMPoint.from_coords(c), G(TMPoint.from_coords(c))),
                                                  TMVector(TMPoint.from_coords(c), H(TMPoint.from_coords(c)))),
                         at.coords, F(at))
    rhs = gm.metric_eval(m, gm.koszul_oracle(m, F, G, at), TMVector(at, H(at))) \
        + gm.metric_eval(m, TMVector(at, G(at)), gm.koszul_oracle(m, F, H, at))
    assert lhs == pytest.approx(rhs, abs=1e-5)


def test_gradient_duality(s2):
    m = gm.TangentMetric(iso.family_general(1.0, 0.7, 0.5), s2)
    at = TMPoint([0.2, -0.1], [0.5, 0.5])
    A = lift(s2, [0.3, 1.0], [-0.7, 0.2], at)
    for name in ("alpha", "delta", "sigma"):
        gr = gm.gradient_on_TM(m, name, at)
        df = m.structure.differential(name, s2, at)
        assert gm.metric_eval(m, gr, A) == pytest.approx(df @ A.components, abs=1e-12)
    f = lambda q: float(q.x[0] * q.y[1])
    gr = gm.gradient_on_TM(m, f, at)
    assert gm.metric_eval(m, gr, A) == pytest.approx(A.components[0] * 0.5 + A.components[3] * 0.2, abs=1e-8)


def test_sigma0_alpha_gradient_is_vertical_multiple(s3):
    # for delta^-1 = sqrt(2kE+b): grad alpha = k u^v, so X1 = 0 and X2 = k X
    k = 1.0
    m = gm.TangentMetric(iso.family_sigma0(k, 0.5), s3)
    W = gc.hopf_fields(1)
    p = np.array([0.3, -0.2, 0.5])
    X1, X2 = gm.x1_x2_fields(m, "alpha", W, p)
    np.testing.assert_allclose(X1, 0, atol=1e-14)
    np.testing.assert_allclose(X2, k * W(p), atol=1e-12)


def test_unit_normal(s2):
    s = iso.family_general(1.0, 0.7, 0.5)
    m = gm.TangentMetric(s, s2)
    x = np.array([0.3, 0.2])
    u = np.array([1.0, 0.0]) / s2.norm(x, [1.0, 0.0])
    at = TMPoint(x, u)
    N = gm.unit_normal(m, at)
    assert gm.metric_eval(m, N, N) == pytest.approx(1.0)
    # orthogonal to S(M): horizontal lifts and vertical lifts of vectors orthogonal to u
    w = np.array([-u[1], u[0]])
    for A in (lift(s2, u, 0 * u, at), lift(s2, w, 0 * w, at), lift(s2, 0 * w, w, at)):
        assert gm.metric_eval(m, N, A) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(NotUnitFiberError):
        gm.unit_normal(m, TMPoint(x, 2 * u))


def test_gnatural_coefficients(s2):
    s = iso.family_general(1.0, 0.7, 0.5)
    a1, a2, a3 = gm.gnatural_coefficients(s)
    at = TMPoint([0.1, -0.3], [0.4, 0.4])
    a, d, sg = s.values(s2, at)
    r2 = s2.inner(at.x, at.y, at.y)
    assert a1(r2) == pytest.approx(d)
    assert a2(r2) == pytest.approx(-sg)
    assert a3(r2) == pytest.approx(a - d)
    with pytest.raises(NotRadialError):
        gm.gnatural_coefficients(iso.example_z().to_structure())
