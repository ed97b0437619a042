import numpy as np
import pytest

from isotm import geom_core as gc
from isotm import gmetric as gm
from isotm import harmonic as hm
from isotm import iso
from isotm.errors import (
    NotOrthogonalError,
    NotParallelError,
    NotUnitFieldError,
    SigmaNotZeroError,
)
from isotm.tbundle import TMPoint

from conftest import wavy_field

P3 = np.array([0.3, -0.2, 0.5])


def _rotated(s2):
    def theta(x):
        return 0.7 * np.sum(x * x, axis=-1) + 0.3 * x[..., 0]

    def dtheta(x):
        d = 1.4 * x
        d[..., 0] += 0.3
        return d

    return gc.rotated_frame_field(s2, theta, dtheta, "rotated")


def test_pushforward_matches_fd(s2, rng):
    X = wavy_field(rng, 2)
    p = np.array([0.2, 0.4])
    V = np.array([0.5, -1.0])
    np.testing.assert_allclose(hm.pushforward(s2, X, V, p).components,
                               hm.pushforward_fd(s2, X, V, p).components, atol=1e-8)


def test_hopf_sasaki_energy_density(s3):
    m = gm.TangentMetric(iso.sasaki(), s3)
    pts = np.random.default_rng(0).uniform(-2, 2, (30, 3))
    np.testing.assert_allclose(hm.energy_density(m, gc.hopf_fields(1), pts), 2.5, atol=1e-12)


def test_parallel_field_density_flat():
    e3 = gc.euclidean(3)
    m = gm.TangentMetric(iso.sasaki(), e3)
    pts = np.random.default_rng(0).uniform(-1, 1, (10, 3))
    assert np.all(hm.energy_density(m, gc.constant_field([0.0, 0.0, 1.0]), pts) == 1.5)


def test_cap_volume():
    # cap of the unit S^2 beyond stereographic radius R: 4 pi / (1 + R^2)
    assert hm.cap_volume(2, 4.0) == pytest.approx(4 * np.pi / 17)
    assert hm.cap_volume(3, 1.0) == pytest.approx(np.pi**2)


def test_sphere_volume_by_quadrature(s2):
    rep = hm.energy(gm.TangentMetric(iso.sasaki(), s2), gc.constant_field([0.0, 0.0]), grid=48)
    # X = 0 has density n/2 = 1, so the energy is the volume
    assert rep.corrected_total == pytest.approx(4 * np.pi, rel=1e-3)
    assert rep.cap_estimate <= rep.cap_bound + 1e-12


FIELDS = {
    "hopf": lambda: gc.hopf_fields(2),
    "coord": lambda: gc.normalized_coordinate_field(gc.sphere_stereographic(3), 0, angle=0.4),
}


@pytest.mark.parametrize("s", [iso.sasaki(), iso.family_sigma0(1.0, 0.5), iso.family_general(1.0, 0.7, 0.5)],
                         ids=lambda s: s.name)
@pytest.mark.parametrize("fname", sorted(FIELDS))
def test_tension_closed_matches_oracle(s3, s, fname):
    m = gm.TangentMetric(s, s3)
    X = FIELDS[fname]()
    c = hm.tension_closed(m, X, P3).assembled.components
    o = hm.tension_oracle(m, X, P3).assembled.components
    np.testing.assert_allclose(c, o, atol=1e-4)


def test_sigma0_specialization(s3):
    m = gm.TangentMetric(iso.family_sigma0(1.0, 2.0), s3)
    X = FIELDS["coord"]()
    a = hm.tension_sigma0(m, X, P3).assembled.components
    b = hm.tension_closed(m, X, P3).assembled.components
    np.testing.assert_allclose(a, b, atol=1e-10)
    with pytest.raises(SigmaNotZeroError):
        hm.tension_sigma0(gm.TangentMetric(iso.family_general(1.0, 0.7, 0.5), s3), X, P3)


def test_tau1_is_tangential_and_consistent(s3):
    m = gm.TangentMetric(iso.family_sigma0(1.0, 1.0), s3)
    X = FIELDS["coord"]()
    t = hm.tau1(m, X, P3)
    N = gm.unit_normal(m, t.assembled.at)
    assert abs(gm.metric_eval(m, t.assembled, N)) < 1e-10
    np.testing.assert_allclose(t.vertical, t.expanded_vertical, atol=1e-6)
    to = hm.tau1(m, X, P3, source="oracle")
    np.testing.assert_allclose(to.assembled.components, t.assembled.components, atol=1e-4)
    # the residual of the harmonic equation is -K tau_1
    r = hm.harmonic_unit_residual(m, X, P3)
    np.testing.assert_allclose(r.residual, -t.vertical, atol=1e-6)


def test_tau1_needs_unit_field(s3):
    m = gm.TangentMetric(iso.sasaki(), s3)
    with pytest.raises(NotUnitFieldError):
        hm.tau1(m, gc.constant_field([1.0, 0.0, 0.0]), P3)


@pytest.mark.parametrize("s", [iso.sasaki(), iso.family_sigma0(1.0, 0.5), iso.family_sigma0(1.0, 2.0)],
                         ids=lambda s: s.name)
def test_hopf_is_harmonic(s3, s):
    r = hm.harmonic_unit_residual(gm.TangentMetric(s, s3), gc.hopf_fields(1), P3)
    assert r.residual_norm <= 1e-4
    assert r.verdict is iso.Verdict.HARMONIC


def test_rotated_field_is_not_harmonic(s2):
    r = hm.harmonic_unit_residual(gm.TangentMetric(iso.sasaki(), s2), _rotated(s2), np.array([0.4, 0.3]))
    assert r.verdict is iso.Verdict.NOT_HARMONIC


def test_coordinate_field_on_sphere2_is_harmonic(s2):
    # conformal coordinate directions on S^2 are harmonic unit fields
    X = gc.normalized_coordinate_field(s2, 0)
    r = hm.harmonic_unit_residual(gm.TangentMetric(iso.sasaki(), s2), X, np.array([0.4, 0.3]))
    assert r.residual_norm < 1e-6


def test_parallel_check():
    e3 = gc.euclidean(3)
    X = gc.constant_field([0.0, 1.0, 0.0])
    p = np.array([0.1, 0.2, 0.3])
    r = hm.parallel_field_check(gm.TangentMetric(iso.sasaki(), e3), X, p)
    assert r.verdict is iso.Verdict.PASS
    r = hm.parallel_field_check(gm.TangentMetric(iso.family_sigma0(1.0, 1.0), e3), X, p)
    assert r.cond2 < 1e-12
    assert r.cond1 < 1e-12
    with pytest.raises(NotParallelError):
        hm.parallel_field_check(gm.TangentMetric(iso.sasaki(), gc.sphere_stereographic(3)),
                                gc.hopf_fields(1), p)


def test_first_variation_rotated_field(s2):
    m = gm.TangentMetric(iso.family_sigma0(1.0, 1.0), s2)
    X = _rotated(s2)
    c = np.array([0.2, -0.1])
    V = hm.orthogonal_variation(s2, X, gc.constant_field([0.3, 1.0]), c, 0.5)
    r = hm.first_variation_check(m, X, V, (c - 0.5, c + 0.5), grid=20)
    assert abs(r.lhs) > 1e-2
    assert r.rel_gap <= 1e-2


def test_first_variation_rejects_non_orthogonal(s2):
    m = gm.TangentMetric(iso.sasaki(), s2)
    X = _rotated(s2)
    with pytest.raises(NotOrthogonalError):
        hm.first_variation_check(m, X, X, (np.array([-0.5, -0.5]), np.array([0.5, 0.5])), grid=4)
