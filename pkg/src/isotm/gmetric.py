"""The metric ``g_{delta,sigma}(A, B) = dTheta(J A, B)`` on TM and its connection.

In the lift basis the metric has blocks ``alpha g``, ``-sigma g``, ``delta g``.
The closed-form Levi-Civita connection is assembled per block from a pair of
base vectors ``(A1, B1)`` by inverting the 2x2 coefficient matrix
``[[alpha, -sigma], [-sigma, delta]]``; :func:`koszul_oracle` computes the
same object from the Koszul formula by finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Union

import numpy as np

from . import fd
from .errors import (
    JetMismatchError,
    NotRadialError,
    NotUnitFiberError,
    PointMismatchError,
    SingularMetricError,
)
from .geom_core import (
    RiemannianChart,
    VectorFieldOnM,
    covariant_derivative,
    curvature_apply,
    riemann,
)
from .iso import IsotropicStructure
from .tbundle import (
    TMPoint,
    TMVector,
    bracket_fd,
    field_jacobian,
    lift,
    lift_matrix,
    split,
    split_matrix,
)

JET_TOL = 1e-6


@dataclass(frozen=True)
class TangentMetric:
    structure: IsotropicStructure
    chart: RiemannianChart

    def values(self, at: TMPoint):
        """``(alpha, delta, sigma, g)`` at ``at``."""
        a, d, s = self.structure.values(self.chart, at)
        return a, d, s, self.chart.g(at.x)


@dataclass
class ConnectionValue:
    result: TMVector
    terms: Dict[str, TMVector] = field(default_factory=dict)

    def terms_sum(self) -> np.ndarray:
        return sum(t.components for t in self.terms.values())


def _same_point(A: TMVector, B: TMVector):
    if A.at is B.at:
        return
    if not (np.array_equal(A.at.x, B.at.x) and np.array_equal(A.at.y, B.at.y)):
        raise PointMismatchError("tangent vectors live at different points of TM")


def _cholesky(G):
    try:
        return np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise SingularMetricError("g_{delta,sigma} is not positive definite here") from exc


def _spd_solve(G, rhs):
    L = _cholesky(G)
    return np.linalg.solve(L.T, np.linalg.solve(L, rhs))


def metric_eval(m: TangentMetric, A: TMVector, B: TMVector) -> float:
    """``alpha g(a1,b1) - sigma (g(a1,b2) + g(a2,b1)) + delta g(a2,b2)``."""
    _same_point(A, B)
    a, d, s, g = m.values(A.at)
    a1, a2 = split(m.chart, A)
    b1, b2 = split(m.chart, B)
    return float(a * (a1 @ g @ b1) - s * (a1 @ g @ b2 + a2 @ g @ b1) + d * (a2 @ g @ b2))


def lift_block_matrix(m: TangentMetric, at: TMPoint) -> np.ndarray:
    """The metric in the (h-lift, v-lift) basis."""
    a, d, s, g = m.values(at)
    return np.block([[a * g, -s * g], [-s * g, d * g]])


def metric_matrix(m: TangentMetric, at: TMPoint) -> np.ndarray:
    """``g_{delta,sigma}`` in the induced coordinates ``(x, y)``."""
    M = split_matrix(m.chart, at)
    G = M.T @ lift_block_matrix(m, at) @ M
    return 0.5 * (G + G.T)


def metric_from_liouville(m: TangentMetric, at: TMPoint) -> np.ndarray:
    """``dTheta(J ., .)`` by finite differences of the Liouville form."""
    from .iso import J_matrix
    from .tbundle import exterior_liouville

    W = exterior_liouville(m.chart, at)
    J = J_matrix(m.structure, m.chart, at)
    return J.T @ W


# ---------------------------------------------------------------------------
# gradients


ScalarSpec = Union[str, Callable[[TMPoint], float]]


def _differential(m: TangentMetric, f: ScalarSpec, at: TMPoint) -> np.ndarray:
    if isinstance(f, str):
        return np.asarray(m.structure.differential(f, m.chart, at), float)
    return fd.jacobian(lambda q: np.asarray(f(TMPoint.from_coords(q)), float), at.coords)


def gradient_on_TM(m: TangentMetric, f: ScalarSpec, at: TMPoint) -> TMVector:
    """``grad f`` w.r.t. ``g_{delta,sigma}``; ``f`` is ``"alpha"|"delta"|"sigma"`` or a callable."""
    df = _differential(m, f, at)
    if not np.any(df):
        return TMVector(at, np.zeros(2 * at.n))
    return TMVector(at, _spd_solve(metric_matrix(m, at), df))


def x1_x2_fields(m: TangentMetric, f: ScalarSpec, X: VectorFieldOnM, p):
    """``(pi_* grad f, K grad f)`` at ``(p, X(p))``."""
    p = m.chart.check(p)
    at = TMPoint(p, X(p))
    return split(m.chart, gradient_on_TM(m, f, at))


def unit_normal(m: TangentMetric, at: TMPoint) -> TMVector:
    """``sqrt(alpha) ((sigma/alpha) u^h + u^v)``, the unit normal of S(M)."""
    r2 = float(m.chart.inner(at.x, at.y, at.y))
    if abs(r2 - 1.0) > 1e-9:
        raise NotUnitFiberError(f"g(u,u) = {r2!r}, expected 1")
    a, d, s, _ = m.values(at)
    return TMVector(at, np.sqrt(a) * lift(m.chart, (s / a) * at.y, at.y, at).components)


def gnatural_coefficients(s: IsotropicStructure):
    """``(alpha_1, alpha_2, alpha_3)`` as functions of ``r^2 = g(u,u)``."""
    prof = s.profile
    if prof is None:
        raise NotRadialError(f"{s.name}: structure is not declared to depend on g(u,u) only")

    def a1(r2):
        return prof.delta(0.5 * np.asarray(r2, float))

    def a2(r2):
        return -prof.sigma(0.5 * np.asarray(r2, float))

    def a3(r2):
        E = 0.5 * np.asarray(r2, float)
        d = prof.delta(E)
        return (1 + prof.sigma(E) ** 2) / d - d

    return a1, a2, a3


# ---------------------------------------------------------------------------
# closed-form connection


def _check_jets(m: TangentMetric, at: TMPoint):
    if not m.structure.has_jets:
        return
    report = m.structure.jet_mismatch(m.chart, at)
    bad = {k: v for k, v in report.items() if v > JET_TOL}
    if bad:
        raise JetMismatchError(f"analytic jets disagree with finite differences: {bad}", report)


def _assemble(m, at, pieces, grad, form):
    """Turn labelled ``(A1_part, B1_part)`` pairs into TM vectors."""
    a, d, s, _ = m.values(at)
    terms = {}
    for label, (pa, pb) in pieces.items():
        if form == "printed":
            h, v = 0.5 * pa / a, 0.5 * pb / d
        else:
            h, v = 0.5 * (d * pa + s * pb), 0.5 * (s * pa + a * pb)
        terms[label] = lift(m.chart, h, v, at)
    terms["gradient"] = grad
    result = TMVector(at, sum(t.components for t in terms.values()))
    return ConnectionValue(result, terms)


def levi_civita_closed(m: TangentMetric, X: VectorFieldOnM, Y: VectorFieldOnM, kind: str,
                       at: TMPoint, form: str = "exact", verify_jets: bool = True) -> ConnectionValue:
    """``nabla-bar`` of lifted base fields: ``kind`` in ``hh``, ``hv``, ``vh``, ``vv``.

    ``hv`` means ``nabla-bar_{X^h} Y^v``.  ``form="printed"`` divides each block
    by its own diagonal coefficient, which only coincides with the exact
    inversion when sigma vanishes.
    """
    if kind not in ("hh", "hv", "vh", "vv"):
        raise ValueError(f"unknown block {kind!r}")
    if form not in ("exact", "printed"):
        raise ValueError(f"unknown form {form!r}")
    chart = m.chart
    p = chart.check(at.x)
    u = at.y
    if verify_jets:
        _check_jets(m, at)
    if kind == "vh":
        cv = levi_civita_closed(m, Y, X, "hv", at, form=form, verify_jets=False)
        nYX = covariant_derivative(chart, X, Y(p), p)
        cv.terms["bracket"] = lift(chart, np.zeros_like(u), -nYX, at)
        cv.result = TMVector(at, cv.result.components + cv.terms["bracket"].components)
        return cv

    a, d, s, g = m.values(at)
    Xp, Yp = X(p), Y(p)
    gXY = float(Xp @ g @ Yp)
    df = {k: m.structure.differential(k, chart, at) for k in ("alpha", "delta", "sigma")}

    def hder(name, V):
        return float(df[name] @ lift(chart, V, np.zeros_like(V), at).components)

    def vder(name, V):
        return float(df[name] @ lift(chart, np.zeros_like(V), V, at).components)

    def grad(name):
        return gradient_on_TM(m, name, at)

    R = riemann(chart, p)
    nXY = covariant_derivative(chart, Y, Xp, p)
    z = np.zeros_like(u)
    if kind == "hh":
        pieces = {
            "dalpha": (hder("alpha", Xp) * Yp + hder("alpha", Yp) * Xp, z),
            "dsigma": (z, -hder("sigma", Xp) * Yp - hder("sigma", Yp) * Xp),
            "nabla": (2 * a * nXY, -2 * s * nXY),
            "curvature": (-2 * s * curvature_apply(R, u, Xp, Yp), -d * curvature_apply(R, Xp, Yp, u)),
        }
        gr = TMVector(at, -0.5 * gXY * grad("alpha").components)
    elif kind == "hv":
        pieces = {
            "dalpha": (vder("alpha", Yp) * Xp, z),
            "dsigma": (-hder("sigma", Xp) * Yp, -vder("sigma", Yp) * Xp),
            "ddelta": (z, hder("delta", Xp) * Yp),
            "nabla": (-2 * s * nXY, 2 * d * nXY),
            "curvature": (d * curvature_apply(R, u, Yp, Xp), z),
        }
        gr = TMVector(at, 0.5 * gXY * grad("sigma").components)
    else:  # vv
        pieces = {
            "dsigma": (-vder("sigma", Xp) * Yp - vder("sigma", Yp) * Xp, z),
            "ddelta": (z, vder("delta", Xp) * Yp + vder("delta", Yp) * Xp),
        }
        gr = TMVector(at, -0.5 * gXY * grad("delta").components)
    return _assemble(m, at, pieces, gr, form)


# ---------------------------------------------------------------------------
# Koszul oracle


def _field(F):
    if isinstance(F, TMVector):
        c = F.components
        return lambda q: c
    return F


def koszul_oracle(m: TangentMetric, F, G, at: TMPoint) -> TMVector:
    """``nabla-bar_F G`` from the Koszul formula against coordinate fields ``E_c``.

    ``2 g(nabla_F G, E_c) = F g(G,E_c) + G g(F,E_c) - E_c g(F,G)
    + g([F,G],E_c) - g([F,E_c],G) - g([G,E_c],F)`` with ``[F, E_c] = -d_c F``.
    """
    F = _field(F)
    G = _field(G)
    Fv = np.asarray(F(at), float)
    Gv = np.asarray(G(at), float)
    Gm = metric_matrix(m, at)
    dG = fd.jacobian(lambda q: metric_matrix(m, TMPoint.from_coords(q)), at.coords)  # [a,b,c] = d_c G_ab
    DF = field_jacobian(F, at)
    DG = field_jacobian(G, at)

    # F(g(G, E_c)) = dG_cb/dx^e F^e G^b + G_cb DG^b_e F^e
    t1 = np.einsum("cbe,e,b->c", dG, Fv, Gv) + Gm @ (DG @ Fv)
    t2 = np.einsum("cbe,e,b->c", dG, Gv, Fv) + Gm @ (DF @ Gv)
    # E_c(g(F,G)) = dG_abc F^a G^b + g(d_c F, G) + g(F, d_c G)
    t3 = np.einsum("abc,a,b->c", dG, Fv, Gv) + DF.T @ (Gm @ Gv) + DG.T @ (Gm @ Fv)
    br = bracket_fd(F, G, at).components
    t4 = Gm @ br
    t5 = DF.T @ (Gm @ Gv)   # -g([F,E_c],G) = g(d_c F, G)
    t6 = DG.T @ (Gm @ Fv)   # -g([G,E_c],F) = g(d_c G, F)
    rhs = 0.5 * (t1 + t2 - t3 + t4 + t5 + t6)
    return TMVector(at, _spd_solve(Gm, rhs))


def lifted(chart: RiemannianChart, X: VectorFieldOnM, kind: str):
    """TM field ``X^h`` or ``X^v`` for the oracle."""
    from .tbundle import lifted_field

    return lifted_field(chart, X, kind)
