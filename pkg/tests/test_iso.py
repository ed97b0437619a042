import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isotm import geom_core as gc
from isotm import iso
from isotm.errors import DomainError, ParameterError
from isotm.tbundle import TMPoint, TMVector, lift

vec2 = st.lists(st.floats(-0.9, 0.9), min_size=2, max_size=2).map(np.array)
structures = st.sampled_from([
    iso.sasaki(),
    iso.family_sigma0(1.0, 1.0),
    iso.family_sigma0(-0.3, 2.0),
    iso.family_general(1.0, 0.7, 0.5),
    iso.family_general(-0.5, -1.2, 3.0),
])


def test_classify_three_way():
    V = iso.Verdict
    assert iso.classify(1e-6, V.INTEGRABLE, V.NOT_INTEGRABLE) is V.INTEGRABLE
    assert iso.classify(1e-3, V.INTEGRABLE, V.NOT_INTEGRABLE) is V.INCONCLUSIVE
    assert iso.classify(0.5, V.INTEGRABLE, V.NOT_INTEGRABLE) is V.NOT_INTEGRABLE


def test_family_values(s2):
    at = TMPoint([0.0, 0.0], [0.5, 0.0])
    # lambda(0) = 2 so E = 0.5
    a, d, s = iso.family_sigma0(1.0, 1.0).values(s2, at)
    assert d == pytest.approx(1 / np.sqrt(2.0))
    assert a == pytest.approx(np.sqrt(2.0))
    assert s == 0
    a, d, s = iso.family_general(1.0, 1.0, 1.0).values(s2, at)
    w = 0.5 * (2 + np.sqrt(8))
    assert d == pytest.approx(w**-0.5)
    assert s == pytest.approx(1 / w)
    assert a * d - s**2 == pytest.approx(1.0)


def test_family_domain_errors(s2):
    with pytest.raises(ParameterError):
        iso.family_general(1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        iso.family_sigma0(-1.0, 0.5).values(s2, TMPoint([0.0, 0.0], [1.0, 0.0]))
    bad = iso.IsotropicStructure.custom(lambda c, x, y: -np.ones(np.shape(x)[:-1]))
    with pytest.raises(DomainError):
        bad.values(s2, TMPoint([0.0, 0.0], [1.0, 0.0]))


@given(structures, vec2, vec2)
def test_J_squared_and_identity(s, x, y):
    chart = gc.sphere_stereographic(2)
    at = TMPoint(x, y)
    a, d, sg = s.values(chart, at)
    assert a * d - sg**2 == pytest.approx(1.0, abs=1e-12)
    J = iso.J_matrix(s, chart, at)
    np.testing.assert_allclose(J @ J, -np.eye(4), atol=1e-10)
    A = lift(chart, [0.3, -0.1], [1.0, 2.0], at)
    np.testing.assert_allclose(iso.apply_J(s, chart, A).components, J @ A.components, atol=1e-12)


def test_J_on_lifts(s2):
    s = iso.family_general(1.0, 0.7, 0.5)
    at = TMPoint([0.2, 0.1], [0.4, -0.3])
    a, d, sg = s.values(s2, at)
    X = np.array([1.0, 0.5])
    Jh = iso.apply_J(s, s2, lift(s2, X, 0 * X, at))
    np.testing.assert_allclose(Jh.components, lift(s2, sg * X, a * X, at).components, atol=1e-12)
    Jv = iso.apply_J(s, s2, lift(s2, 0 * X, X, at))
    np.testing.assert_allclose(Jv.components, lift(s2, -d * X, -sg * X, at).components, atol=1e-12)


def test_analytic_jets_match_fd(s3):
    at = TMPoint([0.3, 0.1, -0.4], [0.2, 0.5, 0.1])
    for s in (iso.family_sigma0(1.0, 0.5), iso.family_general(1.0, 0.3, 1.0), iso.family_general(-1, 2, 3)):
        assert max(s.jet_mismatch(s3, at).values()) < 1e-8


def test_nijenhuis_integrable_families():
    e2 = gc.euclidean(2)
    s2 = gc.sphere_stereographic(2)
    at = TMPoint([0.3, -0.4], [0.7, 0.2])
    assert iso.nijenhuis_max(iso.family_sigma0(0, 1), e2, at) <= 1e-4
    assert iso.nijenhuis_max(iso.family_sigma0(1, 1), s2, at) <= 1e-4
    assert iso.nijenhuis_max(iso.family_general(1, 0.5, 1), s2, at) <= 1e-4
    assert iso.nijenhuis_max(iso.sasaki(), s2, at) > 1e-2
    assert iso.integrability_verdict(iso.nijenhuis_max(iso.sasaki(), s2, at)) is iso.Verdict.NOT_INTEGRABLE


def test_nijenhuis_tensor_matches_bracket_form(s2):
    s = iso.sasaki()
    at = TMPoint([0.3, -0.4], [0.7, 0.2])
    T = iso.nijenhuis_tensor(s, s2, at)
    for i, j in ((0, 1), (0, 2), (1, 3), (2, 3)):
        e_i, e_j = np.eye(4)[i], np.eye(4)[j]
        N = iso.nijenhuis(s, s2, at, TMVector(at, e_i), TMVector(at, e_j)).components
        np.testing.assert_allclose(N, T[:, i, j], atol=1e-6)


def test_sasaki_zero_section_is_integrable_point(s2):
    assert iso.nijenhuis_max(iso.sasaki(), s2, TMPoint([0.1, 0.2], [0.0, 0.0])) < 1e-8


def test_example_z_solves_flat_pde():
    zf = iso.example_z()
    rng = np.random.default_rng(1)
    x, y = rng.uniform(-2, 2, (50, 3)), rng.uniform(-2, 2, (50, 3))
    assert np.max(np.abs(iso.flat_pde_residual(zf, x, y))) <= 1e-7
    assert np.all(zf(x, y).imag > 0)


def test_example_z_jets_match_fd():
    zf = iso.example_z()
    fdz = iso.ComplexFieldZ(zf.z)
    x, y = np.array([0.3, -0.2]), np.array([1.0, 0.4])
    for a, b in zip(zf.partials(x, y), fdz.partials(x, y)):
        np.testing.assert_allclose(a, b, atol=1e-8)


def test_example_z_structure_is_integrable():
    s = iso.example_z().to_structure()
    e2 = gc.euclidean(2)
    assert iso.nijenhuis_max(s, e2, TMPoint([0.3, 0.5], [-0.2, 0.8])) <= 1e-4


def test_z_roundtrip_and_refusal(s2):
    s = iso.family_general(1.0, 0.5, 1.0)
    at = TMPoint([0.2, 0.1], [0.3, 0.3])
    z = iso.ComplexFieldZ.from_structure(s, s2)
    back = z.to_structure()
    np.testing.assert_allclose(back.values(s2, at), s.values(s2, at), atol=1e-12)
    assert iso.z_map(s, s2, at) == pytest.approx(z(at.x, at.y))
    bad = iso.ComplexFieldZ(lambda x, y: -1j * np.ones(np.shape(x)[:-1]))
    with pytest.raises(DomainError):
        bad.to_structure().values(s2, at)


def test_flat_pde_rejects_sasaki_on_sphere_pde(s2):
    # z = i: the y^s lambda^2 term survives, so Sasaki is not integrable
    zi = iso.ComplexFieldZ(lambda x, y: 1j * np.ones(np.shape(x)[:-1]))
    x, y = np.array([0.3, -0.1]), np.array([0.5, 0.2])
    lam2 = s2.conformal.value(x) ** 2
    for s0 in range(2):
        assert iso.sphere_pde_residual(zi, s2, x, y, s0) == pytest.approx(y[s0] * lam2)


@pytest.mark.parametrize("b", [0.5, 1.0, 2.0])
def test_sphere_pde_sigma0_family(s3, b):
    zf = iso.z_of_sigma0_on_sphere(1.0, b, s3)
    rng = np.random.default_rng(2)
    x, y = rng.uniform(-1, 1, (20, 3)), rng.uniform(-1, 1, (20, 3))
    for s0 in range(3):
        assert np.max(np.abs(iso.sphere_pde_residual(zf, s3, x, y, s0))) < 1e-10
        assert np.max(np.abs(iso.sphere_pde_residual(zf, s3, x, y, s0, literal=True))) > 1e-2


def test_sphere_pde_general_family_from_structure(s2):
    zf = iso.ComplexFieldZ.from_structure(iso.family_general(1.0, 0.6, 1.0), s2)
    x, y = np.array([0.4, -0.2]), np.array([0.3, 0.6])
    for s0 in range(2):
        assert abs(iso.sphere_pde_residual(zf, s2, x, y, s0)) < 1e-7


def test_phi_map():
    out = iso.phi_map([1.0, 0.0], [0.0, 2.0], 0.5 + 1j)
    np.testing.assert_allclose(out, [-0.5 - 1j, 2.0])
    with pytest.raises(ParameterError):
        iso.phi_map([1.0, 0.0], [1.0, 2.0], 1j)
    with pytest.raises(ParameterError):
        iso.phi_map([1.0, 0.0], [0.0, 2.0], -1j)
