"""Verification checks run by the command-line driver.

Each check returns a :class:`CheckResult`.  ``max_residual`` and
``tolerance`` always determine the verdict (``<= tolerance`` passes); checks
made of several sub-tests report residuals normalised by their own
tolerances with an overall tolerance of 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from . import fd
from . import geom_core as gc
from . import gmetric as gm
from . import harmonic as hm
from . import iso
from .errors import GeometryError
from .scenario import Scenario
from .tbundle import TMPoint, TMVector, bracket_fd, lifted_field

PASSING = {"PASS", "INTEGRABLE", "NOT_INTEGRABLE", "HARMONIC", "NOT_HARMONIC", "INCONCLUSIVE"}
CLASSIFYING = {"nijenhuis_scan", "flat_pde", "sphere_pde", "harmonic_residual", "parallel_check"}


@dataclass
class CheckResult:
    name: str
    n_samples: int
    max_residual: float
    mean_residual: float
    tolerance: float
    verdict: str
    passed: bool = True
    details: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None

    def as_dict(self):
        d = {
            "name": self.name,
            "n_samples": self.n_samples,
            "max_residual": self.max_residual,
            "mean_residual": self.mean_residual,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "passed": self.passed,
        }
        if self.details:
            d["term_breakdowns"] = self.details
        if self.error is not None:
            d["error"] = self.error
        return d


class Context:
    """Lazily built objects shared by the checks of one scenario run."""

    def __init__(self, sc: Scenario, adjudicate: bool = False):
        self.sc = sc
        self.adjudicate = adjudicate
        self.chart = sc.chart()
        self.structure = sc.build_structure()
        self.metric = gm.TangentMetric(self.structure, self.chart)
        self._field = None

    @property
    def field(self):
        if self._field is None:
            self._field = self.sc.build_field(self.chart)
        return self._field

    def rng(self, name):
        # one independent, reproducible stream per check
        idx = list(self.sc.checks).index(name)
        return np.random.Generator(np.random.PCG64([self.sc.seed, idx]))

    def base_points(self, rng, n=None):
        lo, hi = self.sc.region(self.chart)
        n = n or self.sc.sampling["n_points"]
        return lo + (hi - lo) * rng.random((n, self.chart.dim))

    def tm_points(self, rng, n=None):
        """Base points with fibers of g-length at most ``fiber_radius``."""
        out = []
        R = self.sc.sampling["fiber_radius"]
        for x in self.base_points(rng, n):
            d = rng.normal(size=self.chart.dim)
            d /= float(self.chart.norm(x, d))
            out.append(TMPoint(x, d * R * rng.random()))
        return out


def _summ(name, vals, tol, verdict=None, **details):
    vals = np.asarray(vals, float)
    mx = float(np.max(vals)) if vals.size else 0.0
    mean = float(np.mean(vals)) if vals.size else 0.0
    if verdict is None:
        verdict = "PASS" if mx <= tol else "FAIL"
    return CheckResult(name, int(vals.size), mx, mean, tol, verdict, details=details)


def _classify(x, tol, yes, no):
    return iso.classify(x, yes, no, tol, max(tol, iso.NONZERO_TOL)).value


def _fsig(v):
    return float(f"{float(v):.12g}")


# ---------------------------------------------------------------------------


def check_nijenhuis_scan(ctx: Context):
    tol = ctx.sc.tolerance("nijenhuis_scan", iso.ZERO_TOL)
    vals = [iso.nijenhuis_max(ctx.structure, ctx.chart, q) for q in ctx.tm_points(ctx.rng("nijenhuis_scan"))]
    mx = max(vals)
    return _summ("nijenhuis_scan", vals, tol, _classify(mx, tol, iso.Verdict.INTEGRABLE, iso.Verdict.NOT_INTEGRABLE),
                 min_residual=_fsig(min(vals)))


def _zfield(ctx: Context):
    st = ctx.sc.structure
    if st["kind"] == "custom_named" and st["name"] == "example_z":
        return iso.example_z()
    if st["kind"] == "sasaki":
        return iso.ComplexFieldZ(lambda x, y: np.full(np.shape(x)[:-1], 1j), name="i")
    if st["kind"] == "sigma0" and ctx.chart.conformal is not None:
        return iso.z_of_sigma0_on_sphere(st["k"], st["b"], ctx.chart)
    return iso.ComplexFieldZ.from_structure(ctx.structure, ctx.chart)


def check_flat_pde(ctx: Context):
    if ctx.chart.conformal is not None:
        raise GeometryError("flat_pde needs a flat (euclidean) base")
    tol = ctx.sc.tolerance("flat_pde", 1e-6)
    zf = _zfield(ctx)
    vals = [float(np.max(np.abs(iso.flat_pde_residual(zf, q.x, q.y))))
            for q in ctx.tm_points(ctx.rng("flat_pde"))]
    return _summ("flat_pde", vals, tol, _classify(max(vals), tol, iso.Verdict.INTEGRABLE, iso.Verdict.NOT_INTEGRABLE))


def check_sphere_pde(ctx: Context):
    if ctx.chart.conformal is None:
        raise GeometryError("sphere_pde needs a conformal chart")
    tol = ctx.sc.tolerance("sphere_pde", 1e-5)
    zf = _zfield(ctx)
    k = ctx.sc.curvature
    vals, lit = [], []
    for q in ctx.tm_points(ctx.rng("sphere_pde")):
        vals.append(max(abs(iso.sphere_pde_residual(zf, ctx.chart, q.x, q.y, s, curvature=k)) for s in range(q.n)))
        lit.append(max(abs(iso.sphere_pde_residual(zf, ctx.chart, q.x, q.y, s, literal=True, curvature=k)) for s in range(q.n)))
    return _summ("sphere_pde", vals, tol, _classify(max(vals), tol, iso.Verdict.INTEGRABLE, iso.Verdict.NOT_INTEGRABLE),
                 printed_sign_max_residual=_fsig(max(lit)))


def random_field(rng, n, name="random"):
    """Affine-plus-trigonometric test field with analytic derivative."""
    c = rng.normal(size=n)
    A = rng.normal(size=(n, n)) * 0.5
    s = rng.normal(size=n) * 0.3

    def value(x):
        return c + np.einsum("ij,...j->...i", A, x) + s * np.sin(x)

    def jac(x):
        return A + s[..., :, None] * np.eye(n) * np.cos(x)[..., None, :]

    return gc.VectorFieldOnM(value, jac, name)


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def check_connection_xval(ctx: Context):
    tol = ctx.sc.tolerance("connection_xval", 1e-5)
    rng = ctx.rng("connection_xval")
    m, chart = ctx.metric, ctx.chart
    rel, printed, tors, comp = [], [], [], []
    worst = (0.0, None)
    for q in ctx.tm_points(rng):
        X = random_field(rng, chart.dim)
        Y = random_field(rng, chart.dim)
        for kind in ("hh", "hv", "vh", "vv"):
            cv = gm.levi_civita_closed(m, X, Y, kind, q)
            F = lifted_field(chart, X, kind[0])
            G = lifted_field(chart, Y, kind[1])
            ora = gm.koszul_oracle(m, F, G, q).components
            r = _rel(cv.result.components, ora)
            rel.append(r)
            printed.append(_rel(gm.levi_civita_closed(m, X, Y, kind, q, form="printed", verify_jets=False)
                              .result.components, ora))
            if r >= worst[0]:
                worst = (r, kind, {k: _fsig(np.max(np.abs(v.components))) for k, v in cv.terms.items()})
        # oracle self-consistency on one mixed pair per point
        F = lifted_field(chart, X, "h")
        G = lifted_field(chart, Y, "v")
        tq = (gm.koszul_oracle(m, F, G, q).components - gm.koszul_oracle(m, G, F, q).components
              - bracket_fd(F, G, q).components)
        tors.append(float(np.max(np.abs(tq))))
        H = lifted_field(chart, random_field(rng, chart.dim), "h")

        def gfun(c, F=F, G=G):
            p = TMPoint.from_coords(c)
            return gm.metric_eval(m, TMVector(p, G(p)), TMVector(p, H(p)))

        lhs = float(fd.directional(gfun, q.coords, F(q)))
        rhs = (gm.metric_eval(m, gm.koszul_oracle(m, F, G, q), TMVector(q, H(q)))
               + gm.metric_eval(m, TMVector(q, G(q)), gm.koszul_oracle(m, F, H, q)))
        comp.append(abs(lhs - rhs) / max(1.0, abs(lhs)))
    return _summ("connection_xval", rel + tors + comp, tol,
                closed_vs_oracle_max=_fsig(max(rel)),
                oracle_torsion_max=_fsig(max(tors)),
                oracle_metric_compat_max=_fsig(max(comp)),
                printed_form_vs_oracle_max=_fsig(max(printed)),
                worst_block=worst[1], worst_block_terms=worst[2])


def check_metric_properties(ctx: Context):
    rng = ctx.rng("metric_properties")
    m, chart, s = ctx.metric, ctx.chart, ctx.structure
    tols = {"J_squared": 1e-10, "J_invariance": 1e-9, "spd": 0.0, "liouville_vs_blocks": 1e-5,
            "alpha_delta_identity": 1e-12}
    worst = {k: 0.0 for k in tols}
    n = 0
    for q in ctx.tm_points(rng):
        n += 1
        J = iso.J_matrix(s, chart, q)
        G = gm.metric_matrix(m, q)
        worst["J_squared"] = max(worst["J_squared"], float(np.max(np.abs(J @ J + np.eye(2 * q.n)))))
        worst["J_invariance"] = max(worst["J_invariance"],
                                    float(np.max(np.abs(J.T @ G @ J - G))) / max(1.0, float(np.max(np.abs(G)))))
        worst["spd"] = max(worst["spd"], 0.0 if np.min(np.linalg.eigvalsh(G)) > 0 else 1.0)
        L = gm.metric_from_liouville(m, q)
        worst["liouville_vs_blocks"] = max(worst["liouville_vs_blocks"],
                                           float(np.max(np.abs(L - G))) / max(1.0, float(np.max(np.abs(G)))))
        a, d, sg = s.values(chart, q)
        worst["alpha_delta_identity"] = max(worst["alpha_delta_identity"], abs(float(a * d - sg**2 - 1)))
    ratios = []
    details = {}
    for k, t in tols.items():
        r = worst[k] / t if t > 0 else worst[k]
        ratios.append(r)
        details[k] = {"max_residual": _fsig(worst[k]), "tolerance": t}
    res = _summ("metric_properties", ratios, 1.0, **details)
    res.n_samples = n
    return res


def _points_for_field(ctx, name):
    return ctx.base_points(ctx.rng(name))


def check_tension_xval(ctx: Context):
    tol = ctx.sc.tolerance("tension_xval", 1e-4)
    X = ctx.field
    m = ctx.metric
    gaps, spec, printed = [], [], []
    for p in _points_for_field(ctx, "tension_xval"):
        o = hm.tension_oracle(m, X, p).assembled.components
        c = hm.tension_closed(m, X, p).assembled.components
        gaps.append(float(np.max(np.abs(o - c))))
        printed.append(float(np.max(np.abs(hm.tension_closed(m, X, p, form="printed").assembled.components - o))))
        if ctx.structure.sigma_zero:
            spec.append(float(np.max(np.abs(hm.tension_sigma0(m, X, p).assembled.components - c))))
    details = {"printed_form_vs_oracle_max": _fsig(max(printed))}
    vals = list(gaps)
    if spec:
        details["sigma0_vs_general_max"] = _fsig(max(spec))
        vals += [v * tol / 1e-10 for v in spec]  # 1e-10 budget for the specialization
    return _summ("tension_xval", vals, tol, **details)


def _tau1(ctx, X, p):
    return hm.tau1(ctx.metric, X, p, source="oracle" if ctx.adjudicate else "closed")


def check_tau1(ctx: Context):
    tol = ctx.sc.tolerance("tau1", 1e-5)
    X = ctx.field
    m = ctx.metric
    cons, normal, size = [], [], []
    for p in _points_for_field(ctx, "tau1"):
        t = _tau1(ctx, X, p)
        cons.append(float(np.max(np.abs(t.vertical - t.expanded_vertical))))
        Nv = gm.unit_normal(m, t.assembled.at)
        normal.append(abs(gm.metric_eval(m, t.assembled, Nv)))
        size.append(float(np.max(np.abs(t.assembled.components))))
    return _summ("tau1", [max(a, b) for a, b in zip(cons, normal)], tol,
                 projection_vs_expanded_max=_fsig(max(cons)), normal_component_max=_fsig(max(normal)),
                 tau1_max_component=_fsig(max(size)))


def check_harmonic_residual(ctx: Context):
    tol = ctx.sc.tolerance("harmonic_residual", 1e-4)
    X = ctx.field
    m = ctx.metric
    vals, printed = [], []
    for p in _points_for_field(ctx, "harmonic_residual"):
        if ctx.adjudicate:
            t = hm.tau1(m, X, p, source="oracle")
            g = ctx.chart.g(p)
            vals.append(float(np.sqrt(t.vertical @ g @ t.vertical)))
        else:
            vals.append(hm.harmonic_unit_residual(m, X, p, tol=tol).residual_norm)
        printed.append(hm.harmonic_unit_residual(m, X, p, form="printed").residual_norm)
    return _summ("harmonic_residual", vals, tol,
                 _classify(max(vals), tol, iso.Verdict.HARMONIC, iso.Verdict.NOT_HARMONIC),
                 printed_form_max_residual=_fsig(max(printed)))


def check_first_variation(ctx: Context):
    tol = ctx.sc.tolerance("first_variation", 1e-2)
    rng = ctx.rng("first_variation")
    X = ctx.field
    m, chart = ctx.metric, ctx.chart
    lo, hi = ctx.sc.region(chart)
    rad = 0.25 * float(np.min(hi - lo))
    grid = ctx.sc.sampling["grid"]
    vals, pairs = [], []
    for _ in range(ctx.sc.sampling["n_variations"]):
        c = lo + rad + (hi - lo - 2 * rad) * rng.random(chart.dim)
        W = gc.constant_field(rng.normal(size=chart.dim))
        V = hm.orthogonal_variation(chart, X, W, c, rad)
        r = hm.first_variation_check(m, X, V, (c - rad, c + rad), grid=grid,
                                     source="oracle" if ctx.adjudicate else "closed")
        # relative gap with an absolute floor so that critical points compare sensibly
        vals.append(abs(r.lhs - r.rhs) / max(abs(r.lhs), abs(r.rhs), 0.1))
        pairs.append([_fsig(r.lhs), _fsig(r.rhs)])
    return _summ("first_variation", vals, tol, lhs_rhs=pairs)


def check_energy(ctx: Context):
    X = ctx.field
    rep = hm.energy(ctx.metric, X, grid=ctx.sc.sampling["grid"],
                    region=None if ctx.chart.radius is not None else ctx.sc.region(ctx.chart))
    details = {"total": _fsig(rep.total), "cap_volume": _fsig(rep.cap_volume),
               "cap_estimate": _fsig(rep.cap_estimate), "cap_bound": _fsig(rep.cap_bound),
               "corrected_total": _fsig(rep.corrected_total), "n_quadrature_points": rep.quadrature_meta["n_points"]}
    expected = ctx.sc.expectations.get("energy")
    if isinstance(expected, (int, float)) and not isinstance(expected, bool):
        tol = ctx.sc.tolerance("energy", 5e-3)
        gap = abs(rep.corrected_total - expected) / abs(expected)
        details["expected_total"] = float(expected)
        return _summ("energy", [gap], tol, **details)
    return _summ("energy", [0.0], ctx.sc.tolerance("energy", 5e-3), **details)


def check_parallel(ctx: Context):
    tol = ctx.sc.tolerance("parallel_check", 1e-4)
    X = ctx.field
    vals, printed = [], []
    for p in _points_for_field(ctx, "parallel_check"):
        r = hm.parallel_field_check(ctx.metric, X, p, tol=tol)
        vals.append(max(r.cond1, r.cond2))
        printed.append(max(r.cond1_printed, r.cond2_printed))
    return _summ("parallel_check", vals, tol, _classify(max(vals), tol, iso.Verdict.PASS, iso.Verdict.FAIL),
                 printed_conditions_max=_fsig(max(printed)))


def check_gnatural(ctx: Context):
    a1, a2, a3 = gm.gnatural_coefficients(ctx.structure)
    vals = []
    for q in ctx.tm_points(ctx.rng("gnatural_coeffs")):
        a, d, s = ctx.structure.values(ctx.chart, q)
        r2 = float(ctx.chart.inner(q.x, q.y, q.y))
        vals.append(max(abs(a1(r2) - d), abs(a2(r2) + s), abs(a3(r2) - (a - d))))
    return _summ("gnatural_coeffs", vals, ctx.sc.tolerance("gnatural_coeffs", 1e-12))


REGISTRY = {
    "nijenhuis_scan": check_nijenhuis_scan,
    "flat_pde": check_flat_pde,
    "sphere_pde": check_sphere_pde,
    "connection_xval": check_connection_xval,
    "metric_properties": check_metric_properties,
    "tension_xval": check_tension_xval,
    "tau1": check_tau1,
    "harmonic_residual": check_harmonic_residual,
    "first_variation": check_first_variation,
    "energy": check_energy,
    "parallel_check": check_parallel,
    "gnatural_coeffs": check_gnatural,
}


def run_check(ctx: Context, name: str) -> CheckResult:
    try:
        res = REGISTRY[name](ctx)
    except GeometryError as exc:
        return CheckResult(name, 0, None, None, None, "ERROR", False,
                           error=f"{type(exc).__name__}: {exc}")
    expected = ctx.sc.expectations.get(name)
    if name in CLASSIFYING:
        res.passed = expected is None or res.verdict == expected
        if expected is not None:
            res.details["expected_verdict"] = expected
    else:
        res.passed = res.verdict == "PASS"
    return res


def run_all(ctx: Context) -> List[CheckResult]:
    return [run_check(ctx, name) for name in ctx.sc.checks]
