"""Vector fields as maps ``M -> (TM, g_{delta,sigma})`` and ``M -> S(M)``.

Energy, tension, the unit-bundle tension ``tau_1`` and the harmonic unit
vector field residual.  Throughout, ``u = X(p)``, ``V_i`` is an orthonormal
frame at ``p`` and ``W_i = nabla_{V_i} X``.  For a scalar ``f`` on TM with
``grad f = f1^h + f2^v`` we write

    hf = alpha f1 - sigma f2      so that  Z^h(f) = g(hf, Z)
    vf = delta f2 - sigma f1      so that  Z^v(f) = g(vf, Z)

and ``T_f = sum g(vf, W_i) V_i``, ``S_f = sum g(vf, W_i) W_i``,
``Rt = sum R(u, W_i) V_i``, ``Ric(u) = sum R(u, V_i) V_i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from . import fd
from .errors import (
    NotOrthogonalError,
    NotParallelError,
    NotUnitFieldError,
    SigmaNotZeroError,
)
from .geom_core import (
    RiemannianChart,
    VectorFieldOnM,
    covariant_derivative,
    curvature_apply,
    divergence,
    frame_field,
    grad_norm_sq,
    nabla,
    orthonormal_frame,
    riemann,
    rough_laplacian,
)
from .gmetric import TangentMetric, gradient_on_TM, koszul_oracle, metric_eval, unit_normal
from .iso import Verdict, classify
from .tbundle import TMPoint, TMVector, lift, split

UNIT_TOL = 1e-9


# ---------------------------------------------------------------------------
# pushforward


def pushforward(chart: RiemannianChart, X: VectorFieldOnM, V, p) -> TMVector:
    """``X_* V = V^h + (nabla_V X)^v`` at ``(p, X(p))``."""
    p = chart.check(p)
    V = np.asarray(V, float)
    at = TMPoint(p, X(p))
    return lift(chart, V, covariant_derivative(chart, X, V, p), at)


def pushforward_fd(chart: RiemannianChart, X: VectorFieldOnM, V, p) -> TMVector:
    """Differential of ``p -> (p, X(p))`` along ``V`` by central differences."""
    p = chart.check(p)
    V = np.asarray(V, float)
    comp = fd.directional(lambda q: np.concatenate([q, X(q)]), p, V)
    return TMVector(TMPoint(p, X(p)), comp)


# ---------------------------------------------------------------------------
# energy


def energy_density(m: TangentMetric, X: VectorFieldOnM, p) -> np.ndarray:
    """``(n alpha - 2 sigma div X + delta |nabla X|^2) / 2`` (vectorised over p)."""
    p = m.chart.check(p)
    a, d, s = m.structure.values(m.chart, TMPoint(p, X(p)))
    n = m.chart.dim
    return 0.5 * (n * a - 2 * s * divergence(m.chart, X, p) + d * grad_norm_sq(m.chart, X, p))


def cap_volume(n: int, radius: float) -> float:
    """Volume of the part of the unit S^n outside the stereographic ball ``|x| <= radius``."""
    c = (radius**2 - 1) / (radius**2 + 1)  # last embedded coordinate on the boundary
    th = np.arccos(c)
    if n == 2:
        return float(2 * np.pi * (1 - c))
    if n == 3:
        return float(2 * np.pi * (th - np.sin(th) * c))
    raise ValueError("cap volume implemented for n = 2, 3")


def midpoint_grid(lo, hi, grid):
    """Cell centres and cell volume of a tensor-product midpoint rule."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    n = lo.size
    counts = np.broadcast_to(np.asarray(grid, int), (n,))
    axes = [lo[k] + (np.arange(counts[k]) + 0.5) * (hi[k] - lo[k]) / counts[k] for k in range(n)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    cell = float(np.prod((hi - lo) / counts))
    return pts, cell


def _region_points(chart: RiemannianChart, region, grid):
    lo, hi = (chart.lo, chart.hi) if region is None else region
    pts, cell = midpoint_grid(lo, hi, grid)
    pts = pts[chart.contains(pts)]
    return pts, cell, np.asarray(lo, float), np.asarray(hi, float)


def _volume_weights(chart, pts, cell):
    return cell * np.sqrt(np.linalg.det(chart.g(pts)))


@dataclass
class EnergyReport:
    density: Callable[[np.ndarray], np.ndarray]
    total: float
    quadrature_meta: dict
    cap_volume: float = 0.0
    cap_estimate: float = 0.0
    cap_bound: float = 0.0

    @property
    def corrected_total(self) -> float:
        """Quadrature total plus the polar-cap estimate (zero off the sphere)."""
        return self.total + self.cap_estimate


def energy(m: TangentMetric, X: VectorFieldOnM, region=None, grid=48, chunk=8192) -> EnergyReport:
    """Midpoint-rule Dirichlet energy on ``region = (lo, hi)`` (default: chart box).

    On a stereographic sphere chart the excluded cap is reported: its
    volume, an estimate (cap volume times the mean density on the outermost
    shell of samples) and a bound (cap volume times the largest density).
    """
    chart = m.chart
    pts, cell, lo, hi = _region_points(chart, region, grid)

    def density(p):
        return energy_density(m, X, p)

    total = 0.0
    dens = np.empty(len(pts))
    for i in range(0, len(pts), chunk):
        q = pts[i:i + chunk]
        dens[i:i + chunk] = density(q)
    w = _volume_weights(chart, pts, cell)
    total = float(np.sum(dens * w))
    meta = {"grid": int(np.max(grid)), "n_points": int(len(pts)), "cell_volume": cell,
            "lo": lo.tolist(), "hi": hi.tolist()}
    rep = EnergyReport(density, total, meta)
    if chart.conformal is not None and chart.radius is not None and region is None:
        cv = cap_volume(chart.dim, chart.radius)
        r = np.linalg.norm(pts, axis=-1)
        shell = r >= r.max() - 2 * float(np.max((hi - lo) / np.asarray(grid)))
        rep.cap_volume = cv
        rep.cap_estimate = cv * float(np.mean(dens[shell]))
        rep.cap_bound = cv * float(np.max(np.abs(dens)))
    return rep


# ---------------------------------------------------------------------------
# tension


@dataclass
class TensionReport:
    horizontal: np.ndarray
    vertical: np.ndarray
    assembled: TMVector
    source: str
    terms: Dict[str, np.ndarray] = field(default_factory=dict)
    expanded_vertical: Optional[np.ndarray] = None


@dataclass
class _Pieces:
    """Every base-manifold quantity the tension formulas need at ``p``."""

    n: int
    at: TMPoint
    alpha: float
    delta: float
    sigma: float
    u: np.ndarray
    g: np.ndarray
    V: np.ndarray
    W: np.ndarray
    div: float
    gn2: float
    lap: np.ndarray
    ric: np.ndarray
    rt: np.ndarray
    grads: dict
    hvec: dict
    vvec: dict
    nabla_X: np.ndarray

    def T(self, f):
        return np.einsum("i,ij->j", self.W @ self.g @ self.vvec[f], self.V)

    def S(self, f):
        return np.einsum("i,ij->j", self.W @ self.g @ self.vvec[f], self.W)

    def nab(self, Z):
        return self.nabla_X @ Z


def _pieces(m: TangentMetric, X: VectorFieldOnM, p, order=None) -> _Pieces:
    chart = m.chart
    p = chart.check(p)
    u = X(p)
    at = TMPoint(p, u)
    a, d, s, g = m.values(at)
    V = orthonormal_frame(chart, p, order)
    N = nabla(chart, X, p)
    W = (N @ V.T).T
    R = riemann(chart, p)
    grads, hvec, vvec = {}, {}, {}
    for f in ("alpha", "delta", "sigma"):
        f1, f2 = split(chart, gradient_on_TM(m, f, at))
        grads[f] = (f1, f2)
        hvec[f] = a * f1 - s * f2
        vvec[f] = d * f2 - s * f1
    ric = sum(curvature_apply(R, u, V[i], V[i]) for i in range(chart.dim))
    rt = sum(curvature_apply(R, u, W[i], V[i]) for i in range(chart.dim))
    return _Pieces(
        n=chart.dim, at=at, alpha=float(a), delta=float(d), sigma=float(s), u=u, g=g, V=V, W=W,
        div=float(np.trace(N)), gn2=float(np.sum(W @ g * W)),
        lap=rough_laplacian(chart, X, p, order), ric=ric, rt=rt,
        grads=grads, hvec=hvec, vvec=vvec, nabla_X=N,
    )


def _report(m, P: _Pieces, h_terms, v_terms, source):
    H = sum(h_terms.values())
    Vt = sum(v_terms.values())
    terms = {f"h:{k}": v for k, v in h_terms.items()}
    terms.update({f"v:{k}": v for k, v in v_terms.items()})
    return TensionReport(H, Vt, lift(m.chart, H, Vt, P.at), source, terms)


def tension_closed(m: TangentMetric, X: VectorFieldOnM, p, form: str = "exact",
                   order=None) -> TensionReport:
    """Closed-form tension of ``X: M -> (TM, g_{delta,sigma})`` for general sigma.

    ``form="exact"`` is the form obtained from the block-inverted connection;
    ``form="printed"`` evaluates the printed expression term by term.
    """
    P = _pieces(m, X, p, order)
    a, d, s, n = P.alpha, P.delta, P.sigma, P.n
    X1, X2 = P.grads["alpha"]
    Y1, Y2 = P.grads["delta"]
    Z1, Z2 = P.grads["sigma"]
    if form == "printed":
        h = {
            "X1": (1 / a - n / 2) * X1,
            "Y1": -0.5 * P.gn2 * Y1,
            "Z1": P.div * Z1,
            "T_alpha": P.T("alpha") / a,
            "ricci": -s * P.ric / a,
            "nabla_hsigma": -P.nab(P.hvec["sigma"]) / a,
            "S_sigma": -P.S("sigma") / a,
            "laplacian": s * P.lap / a,
            "curvature": d * P.rt / a,
        }
        v = {
            "X2": -0.5 * n * X2,
            "Y2": -0.5 * P.gn2 * Y2,
            "Z2": P.div * Z2,
            "hsigma": -P.hvec["sigma"] / d,
            "T_sigma": -P.T("sigma") / d,
            "nabla_hdelta": P.nab(P.hvec["delta"]) / d,
            "S_delta": P.S("delta") / d,
            "laplacian": P.lap,
        }
        return _report(m, P, h, v, "closed_form:printed")
    if form != "exact":
        raise ValueError(f"unknown form {form!r}")
    # base vectors a, b of the connection blocks summed over the frame
    A = {
        "h_alpha": P.hvec["alpha"],
        "ricci": -s * P.ric,
        "nabla_hsigma": -P.nab(P.hvec["sigma"]),
        "T_alpha": P.T("alpha"),
        "laplacian": 2 * s * P.lap,
        "curvature": d * P.rt,
        "S_sigma": -P.S("sigma"),
    }
    B = {
        "h_sigma": -P.hvec["sigma"],
        "nabla_hdelta": P.nab(P.hvec["delta"]),
        "T_sigma": -P.T("sigma"),
        "laplacian": -2 * d * P.lap,
        "S_delta": P.S("delta"),
    }
    h = {k: d * val for k, val in A.items()}
    for k, val in B.items():
        h[f"b:{k}"] = s * val
    h["X1"] = -0.5 * n * X1
    h["Z1"] = P.div * Z1
    h["Y1"] = -0.5 * P.gn2 * Y1
    v = {k: s * val for k, val in A.items()}
    for k, val in B.items():
        v[f"b:{k}"] = a * val
    v["trace_laplacian"] = P.lap
    v["X2"] = -0.5 * n * X2
    v["Z2"] = P.div * Z2
    v["Y2"] = -0.5 * P.gn2 * Y2
    return _report(m, P, h, v, "closed_form")


def _require_sigma0(m: TangentMetric, at: Optional[TMPoint] = None):
    s = m.structure
    if s.sigma_zero:
        return
    if at is not None:
        if abs(float(s.sigma(m.chart, at.x, at.y))) == 0 and not np.any(s.d_sigma(m.chart, at)):
            return
    raise SigmaNotZeroError(f"{s.name}: sigma is not identically zero")


def tension_sigma0(m: TangentMetric, X: VectorFieldOnM, p, form: str = "exact",
                   order=None) -> TensionReport:
    """Tension for ``sigma = 0``; ``form="printed"`` is the printed specialization."""
    p = m.chart.check(p)
    _require_sigma0(m, TMPoint(p, X(p)))
    P = _pieces(m, X, p, order)
    a, n = P.alpha, P.n
    X1, X2 = P.grads["alpha"]
    c = P.gn2 / (2 * a**2) - n / 2
    if form == "printed":
        h = {
            "X1": (1 / a - n / 2 + P.gn2 / (2 * a**2)) * X1,
            "T_alpha": P.T("alpha") / a,
            "curvature": P.rt / a**2,
        }
        v = {"laplacian": P.lap}
    elif form == "exact":
        h = {
            "X1": (1 - n / 2 + P.gn2 / (2 * a**2)) * X1,
            "T_alpha": P.T("alpha") / a,
            "curvature": P.rt / a**2,
        }
        v = {"laplacian": -P.lap}
    else:
        raise ValueError(f"unknown form {form!r}")
    v["nabla_X1"] = -P.nab(X1)
    v["S_alpha"] = -P.S("alpha") / a
    v["X2"] = c * X2
    return _report(m, P, h, v, "closed_form" if form == "exact" else "closed_form:printed")


def tension_oracle(m: TangentMetric, X: VectorFieldOnM, p, order=None) -> TensionReport:
    """``sum_i nabla-bar_{X_* E_i} X_* E_i - X_*(nabla_{E_i} E_i)`` via the Koszul oracle.

    ``E_i`` is the Gram-Schmidt frame field in the given coordinate order and
    ``X_* E_i`` is extended off the image of ``X`` as ``(E_i(x), DX(x) E_i(x))``.
    """
    chart = m.chart
    p = chart.check(p)
    at = TMPoint(p, X(p))
    n = chart.dim
    total = np.zeros(2 * n)
    for i in range(n):
        E = frame_field(chart, i, order)

        def F(q, E=E):
            e = E(q.x)
            return np.concatenate([e, X.derivative(q.x) @ e])

        nEE = covariant_derivative(chart, E, E(p), p)
        total += koszul_oracle(m, F, F, at).components
        total -= np.concatenate([nEE, X.derivative(p) @ nEE])
    vec = TMVector(at, total)
    H, Vt = split(chart, vec)
    return TensionReport(H, Vt, vec, "oracle")


def tension(m: TangentMetric, X: VectorFieldOnM, p, source: str = "closed", form: str = "exact"):
    if source == "oracle":
        return tension_oracle(m, X, p)
    return tension_closed(m, X, p, form=form)


# ---------------------------------------------------------------------------
# unit vector fields


def _require_unit(chart, X, p):
    r = float(chart.norm(p, X(p)))
    if abs(r * r - 1) > UNIT_TOL:
        raise NotUnitFieldError(f"g(X,X) = {r * r!r} at {np.asarray(p).tolist()}")


def tau1(m: TangentMetric, X: VectorFieldOnM, p, source: str = "closed",
         form: str = "exact") -> TensionReport:
    """Tangential part of the tension along ``S(M)``: ``tau - g(tau, N) N``.

    The vertical part is also evaluated from its expanded closed form
    (``expanded_vertical``) for comparison.
    """
    chart = m.chart
    p = chart.check(p)
    _require_unit(chart, X, p)
    at = TMPoint(p, X(p))
    _require_sigma0(m, at)
    if source == "oracle":
        tau = tension_oracle(m, X, p)
    else:
        tau = tension_sigma0(m, X, p, form=form)
    Nv = unit_normal(m, at)
    proj = tau.assembled.components - metric_eval(m, tau.assembled, Nv) * Nv.components
    vec = TMVector(at, proj)
    H, Vt = split(chart, vec)
    P = _pieces(m, X, p)
    a, n = P.alpha, P.n
    X1, X2 = P.grads["alpha"]
    c = P.gn2 / (2 * a**2) - n / 2
    u = P.u
    gX2X = float(X2 @ P.g @ u)
    base = -P.nab(X1) - P.S("alpha") / a + c * X2
    if form == "printed":
        expanded = P.lap + base - (P.gn2 + c * gX2X) * u
    else:
        expanded = -P.lap + base + (P.gn2 - c * gX2X) * u
    return TensionReport(H, Vt, vec, f"tau1:{tau.source}", tau.terms, expanded)


@dataclass
class HarmonicityVerdict:
    residual_norm: float
    tolerance: float
    verdict: Verdict
    residual: np.ndarray
    breakdown: Dict[str, np.ndarray] = field(default_factory=dict)


def harmonic_unit_residual(m: TangentMetric, X: VectorFieldOnM, p, form: str = "exact",
                           tol: float = 1e-4, hi: float = 1e-2) -> HarmonicityVerdict:
    """``Delta_g X - RHS`` of the harmonic unit vector field equation.

    exact RHS: ``[|nX|^2 + (n/2 - |nX|^2/(2a^2)) g(X2,X)] X
    + (|nX|^2/(2a^2) - n/2) X2 - nabla_{X1} X - S_alpha / a``; this residual is
    ``-K tau_1``.  ``form="printed"`` uses the printed signs.
    """
    chart = m.chart
    p = chart.check(p)
    _require_unit(chart, X, p)
    _require_sigma0(m, TMPoint(p, X(p)))
    P = _pieces(m, X, p)
    a, n = P.alpha, P.n
    X1, X2 = P.grads["alpha"]
    q = P.gn2 / (2 * a**2)
    gX2X = float(X2 @ P.g @ P.u)
    if form == "printed":
        rhs = {
            "X": (P.gn2 + (q - n / 2) * gX2X) * P.u,
            "X2": (n / 2 - q) * X2,
            "nabla_X1": P.nab(X1),
            "S_alpha": P.S("alpha") / a,
        }
    else:
        rhs = {
            "X": (P.gn2 + (n / 2 - q) * gX2X) * P.u,
            "X2": (q - n / 2) * X2,
            "nabla_X1": -P.nab(X1),
            "S_alpha": -P.S("alpha") / a,
        }
    res = P.lap - sum(rhs.values())
    norm = float(np.sqrt(res @ P.g @ res))
    breakdown = {"laplacian": P.lap, **{f"rhs:{k}": v for k, v in rhs.items()}}
    return HarmonicityVerdict(norm, tol, classify(norm, Verdict.HARMONIC, Verdict.NOT_HARMONIC, tol, hi),
                              res, breakdown)


@dataclass
class ParallelReport:
    cond1: float
    cond2: float
    cond1_printed: float
    cond2_printed: float
    X1: np.ndarray
    X2: np.ndarray
    verdict: Verdict
    verdict_printed: Verdict


def parallel_field_check(m: TangentMetric, X: VectorFieldOnM, p, tol: float = 1e-4,
                         hi: float = 1e-2) -> ParallelReport:
    """Harmonic-map conditions for a parallel unit field.

    From the tension: ``(1 - n/2) X1 = 0`` and ``X2 = g(X2, X) X``.  The
    printed variants ``(1 - n alpha/2) X1 = 0`` and ``X2 = |X2| X`` are
    evaluated as well.
    """
    chart = m.chart
    p = chart.check(p)
    _require_unit(chart, X, p)
    if np.sqrt(max(float(grad_norm_sq(chart, X, p)), 0.0)) > 1e-8:
        raise NotParallelError(f"{X.name} is not parallel at {p.tolist()}")
    at = TMPoint(p, X(p))
    _require_sigma0(m, at)
    a, _, _ = m.structure.values(chart, at)
    n = chart.dim
    X1, X2 = split(chart, gradient_on_TM(m, "alpha", at))
    u = at.y
    g = chart.g(p)

    def nrm(v):
        return float(np.sqrt(v @ g @ v))

    c1 = nrm((1 - n / 2) * X1)
    c2 = nrm(X2 - float(X2 @ g @ u) * u)
    c1p = nrm((1 - n * a / 2) * X1)
    c2p = nrm(X2 - nrm(X2) * u)

    def v(x, y):
        worst = max(x, y)
        return classify(worst, Verdict.PASS, Verdict.FAIL, tol, hi)

    return ParallelReport(c1, c2, c1p, c2p, X1, X2, v(c1, c2), v(c1p, c2p))


# ---------------------------------------------------------------------------
# first variation


def normalized(chart: RiemannianChart, W: VectorFieldOnM, name="U") -> VectorFieldOnM:
    """``W / |W|_g`` (derivative by central differences)."""
    def value(x):
        w = W(x)
        return w / chart.norm(x, w)[..., None]

    return VectorFieldOnM(value, None, name)


def bump(center, radius):
    """Smooth bump ``exp(1 - 1/(1 - r^2))`` supported in the open ball."""
    center = np.asarray(center, float)

    def phi(x):
        r2 = np.sum((np.asarray(x) - center) ** 2, axis=-1) / radius**2
        out = np.zeros_like(r2)
        inside = r2 < 1
        out[inside] = np.exp(1 - 1 / (1 - r2[inside]))
        return out

    return phi


def orthogonal_variation(chart: RiemannianChart, X: VectorFieldOnM, W: VectorFieldOnM,
                         center, radius, scale=1.0) -> VectorFieldOnM:
    """``phi (W - g(W, X) X)`` with a bump ``phi``: orthogonal to the unit field X."""
    phi = bump(center, radius)

    def value(x):
        u = X(x)
        w = W(x)
        g = chart.g(x)
        gw = np.einsum("...ij,...i,...j->...", g, w, u)
        return scale * phi(x)[..., None] * (w - gw[..., None] * u)

    return VectorFieldOnM(value, None, "bump_variation")


@dataclass
class FirstVariationReport:
    lhs: float
    rhs: float
    rel_gap: float
    n_points: int


def _energy_on(m, X, pts, w):
    return float(np.sum(energy_density(m, X, pts) * w))


def first_variation_check(m: TangentMetric, X: VectorFieldOnM, V: VectorFieldOnM, region,
                          grid=24, t_step: float = 1e-4, source: str = "closed",
                          form: str = "exact") -> FirstVariationReport:
    """``d/dt E(U_t)`` at 0 against ``-int g_{delta,0}(V^v, tau_1(X))``.

    ``U_t = (X + t V)/|X + t V|``.  The derivative is a Richardson-extrapolated
    central difference; ``V`` should vanish near the boundary of ``region``.
    """
    chart = m.chart
    pts, cell, _, _ = _region_points(chart, region, grid)
    u = X(pts)
    v = V(pts)
    g = chart.g(pts)
    if np.max(np.abs(np.einsum("...ij,...i,...j->...", g, u, v)), initial=0.0) > UNIT_TOL:
        raise NotOrthogonalError("variation field is not g-orthogonal to X")
    w = _volume_weights(chart, pts, cell)

    def E(t):
        Wt = VectorFieldOnM(lambda x: X(x) + t * V(x), None)
        return _energy_on(m, normalized(chart, Wt), pts, w)

    def D(h):
        return (E(h) - E(-h)) / (2 * h)

    lhs = (4 * D(t_step / 2) - D(t_step)) / 3
    rhs = 0.0
    vn = np.sqrt(np.einsum("...ij,...i,...j->...", g, v, v))
    for k in np.flatnonzero(vn > 0):
        t1 = tau1(m, X, pts[k], source=source, form=form)
        at = t1.assembled.at
        rhs -= metric_eval(m, lift(chart, np.zeros_like(v[k]), v[k], at), t1.assembled) * w[k]
    scale = max(abs(lhs), abs(rhs))
    gap = abs(lhs - rhs) / scale if scale > 0 else 0.0
    return FirstVariationReport(float(lhs), float(rhs), float(gap), int(len(pts)))
