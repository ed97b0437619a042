"""Scenario files: a single JSON document, validated strictly.

See ``docs/scenario.md`` for the schema.  Unknown keys are rejected and every
error names the offending field as a dotted path.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from . import geom_core as gc
from . import iso
from .errors import ConfigError

CHECKS = (
    "nijenhuis_scan", "flat_pde", "sphere_pde", "connection_xval", "metric_properties",
    "tension_xval", "tau1", "harmonic_residual", "first_variation", "energy",
    "parallel_check", "gnatural_coeffs",
)

STRUCTURE_REGISTRY: Dict[str, Callable[[], iso.IsotropicStructure]] = {}
FIELD_REGISTRY: Dict[str, Callable[..., gc.VectorFieldOnM]] = {}


def register_structure(name):
    def deco(fn):
        STRUCTURE_REGISTRY[name] = fn
        return fn
    return deco


def register_field(name):
    def deco(fn):
        FIELD_REGISTRY[name] = fn
        return fn
    return deco


@register_structure("example_z")
def _example_z():
    return iso.example_z().to_structure()


@register_structure("x_profile")
def _x_profile():
    """delta = 1/(1 + |x|^2/2), sigma = 0: not of the space-form type."""
    def delta(chart, x, y):
        return 1.0 / (1.0 + 0.5 * np.sum(x * x, axis=-1))
    return iso.IsotropicStructure.custom(delta, name="x_profile")


@register_structure("alpha_x")
def _alpha_x():
    """alpha = 1/2 + |x|^2, sigma = 0; alpha = 2/n on a sphere of the base."""
    def delta(chart, x, y):
        return 1.0 / (0.5 + np.sum(x * x, axis=-1))
    return iso.IsotropicStructure.custom(delta, name="alpha_x")


@register_structure("delta_cross")
def _delta_cross():
    """delta = exp(0.3 y^2), sigma = 0: grad alpha has a vertical part across the fiber."""
    def delta(chart, x, y):
        return np.exp(0.3 * y[..., -1])
    return iso.IsotropicStructure.custom(delta, name="delta_cross")


@register_field("rotated_quadratic")
def _rotated_quadratic(chart, c=0.7, d=0.3):
    """Angle ``c |x|^2 + d x^1`` against the conformal frame (not harmonic for c != 0)."""
    shift = np.zeros(chart.dim)
    shift[0] = d
    return gc.rotated_frame_field(
        chart,
        lambda x: c * np.sum(x * x, axis=-1) + d * x[..., 0],
        lambda x: 2 * c * x + shift,
        name=f"rotated_quadratic({c:g},{d:g})",
    )


# ---------------------------------------------------------------------------


def _obj(d, path, allowed, required=()):
    if not isinstance(d, dict):
        raise ConfigError(path or "<root>", "expected a JSON object")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}" if path else k, "unknown key")
    for k in required:
        if k not in d:
            raise ConfigError(f"{path}.{k}" if path else k, "missing required key")
    return d


def _num(d, key, path, default=None, integer=False):
    if key not in d:
        if default is None:
            raise ConfigError(f"{path}.{key}", "missing required number")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", "expected a number")
    if integer:
        if int(v) != v:
            raise ConfigError(f"{path}.{key}", "expected an integer")
        return int(v)
    return float(v)


@dataclass
class Scenario:
    manifold: dict
    structure: dict
    field: Optional[dict]
    checks: List[str]
    sampling: dict
    tolerances: Dict[str, float] = field(default_factory=dict)
    expectations: Dict[str, Any] = field(default_factory=dict)

    # -- construction of domain objects

    def chart(self) -> gc.RiemannianChart:
        mf = self.manifold
        kind, n, params = mf["kind"], mf["dim"], mf["params"]
        if kind == "euclidean":
            return gc.euclidean(n, params.get("half_width", 10.0))
        if kind == "sphere":
            return gc.sphere_stereographic(n)
        return space_form_chart(n, params["curvature"])

    def build_structure(self) -> iso.IsotropicStructure:
        st = self.structure
        kind = st["kind"]
        if kind == "sasaki":
            return iso.sasaki()
        if kind == "sigma0":
            return iso.family_sigma0(st["k"], st["b"])
        if kind == "general":
            return iso.family_general(st["k"], st["a"], st["b"])
        return STRUCTURE_REGISTRY[st["name"]]()

    def build_field(self, chart) -> gc.VectorFieldOnM:
        if self.field is None:
            raise ConfigError("field", "this check needs a vector field")
        f = self.field
        kind, params = f["kind"], f["params"]
        if kind.startswith("hopf"):
            return gc.hopf_fields(int(kind[-1]))
        if kind == "parallel":
            v = np.asarray(params["vector"], float)
            return gc.constant_field(v / np.linalg.norm(v), name="parallel")
        if kind == "coordinate_normalized":
            return gc.normalized_coordinate_field(chart, int(params.get("index", 0)), params.get("angle"))
        extra = {k: v for k, v in params.items() if k != "name"}
        return FIELD_REGISTRY[params["name"]](chart, **extra)

    @property
    def curvature(self) -> float:
        """Sectional curvature of the base (space-form charts only)."""
        kind = self.manifold["kind"]
        if kind == "sphere":
            return 1.0
        if kind == "euclidean":
            return 0.0
        return float(self.manifold["params"]["curvature"])

    @property
    def seed(self) -> int:
        return self.sampling["seed"]

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed))

    def region(self, chart):
        r = self.sampling.get("region")
        n = chart.dim
        if r is None:
            lo, hi = -np.ones(n), np.ones(n)
        else:
            lo = np.broadcast_to(np.asarray(r[0], float), (n,)).copy()
            hi = np.broadcast_to(np.asarray(r[1], float), (n,)).copy()
        return lo, hi

    def tolerance(self, check, default):
        return float(self.tolerances.get(check, default))


def space_form_chart(n: int, k: float) -> gc.RiemannianChart:
    """``g = lambda^2 |dx|^2`` with ``lambda = 2/(1 + k|x|^2)`` (curvature k)."""
    if k == 0:
        return gc.euclidean(n)

    def value(x):
        return 2.0 / (1.0 + k * np.sum(np.asarray(x) ** 2, axis=-1))

    def grad(x):
        lv = value(x)
        return -k * (lv**2)[..., None] * x

    def hess(x):
        x = np.asarray(x)
        lv = value(x)[..., None, None]
        return 2 * k**2 * lv**3 * x[..., :, None] * x[..., None, :] - k * lv**2 * np.eye(x.shape[-1])

    lam = gc.ConformalFactor(value, grad, hess)
    if k > 0:
        radius = gc.STEREO_RADIUS / np.sqrt(k)
    else:
        radius = 0.9 / np.sqrt(-k)
    return gc.conformal(n, lam, half_width=radius, radius=radius, name=f"space_form({n},k={k:g})")


def parse(doc: dict, seed_override: Optional[int] = None) -> Scenario:
    _obj(doc, "", {"manifold", "structure", "field", "checks", "sampling", "tolerances",
                   "expectations"}, ("manifold", "structure", "checks"))

    mf = _obj(doc["manifold"], "manifold", {"kind", "dim", "params"}, ("kind", "dim"))
    if mf["kind"] not in ("euclidean", "sphere", "conformal"):
        raise ConfigError("manifold.kind", f"unknown manifold kind {mf['kind']!r}")
    dim = _num(mf, "dim", "manifold", integer=True)
    if not 1 <= dim <= 3:
        raise ConfigError("manifold.dim", "dimension must be 1, 2 or 3")
    mparams = mf.get("params", {})
    if mf["kind"] == "euclidean":
        _obj(mparams, "manifold.params", {"half_width"})
        if "half_width" in mparams and _num(mparams, "half_width", "manifold.params") <= 0:
            raise ConfigError("manifold.params.half_width", "must be positive")
    elif mf["kind"] == "sphere":
        _obj(mparams, "manifold.params", set())
    else:
        _obj(mparams, "manifold.params", {"curvature"}, ("curvature",))
        _num(mparams, "curvature", "manifold.params")
    manifold = {"kind": mf["kind"], "dim": dim, "params": dict(mparams)}

    st = _obj(doc["structure"], "structure", {"kind", "k", "a", "b", "name"}, ("kind",))
    skind = st["kind"]
    if skind not in ("sasaki", "sigma0", "general", "custom_named"):
        raise ConfigError("structure.kind", f"unknown structure kind {skind!r}")
    structure = {"kind": skind}
    if skind in ("sigma0", "general"):
        structure["k"] = _num(st, "k", "structure")
        structure["b"] = _num(st, "b", "structure")
    if skind == "general":
        structure["a"] = _num(st, "a", "structure")
        if structure["a"] == 0:
            raise ConfigError("structure.a", "the general family requires a != 0")
    if skind == "custom_named":
        if st.get("name") not in STRUCTURE_REGISTRY:
            raise ConfigError("structure.name", f"unknown structure; known: {sorted(STRUCTURE_REGISTRY)}")
        structure["name"] = st["name"]

    fld = None
    if doc.get("field") is not None:
        f = _obj(doc["field"], "field", {"kind", "params"}, ("kind",))
        fkinds = ("hopf1", "hopf2", "hopf3", "parallel", "coordinate_normalized", "custom_named")
        if f["kind"] not in fkinds:
            raise ConfigError("field.kind", f"unknown field kind {f['kind']!r}")
        fp = f.get("params", {})
        if not isinstance(fp, dict):
            raise ConfigError("field.params", "expected a JSON object")
        if f["kind"].startswith("hopf"):
            _obj(fp, "field.params", set())
            if mf["kind"] != "sphere" or dim != 3:
                raise ConfigError("field.kind", "Hopf fields live on the sphere of dimension 3")
        elif f["kind"] == "parallel":
            _obj(fp, "field.params", {"vector"}, ("vector",))
            v = fp["vector"]
            if not (isinstance(v, list) and len(v) == dim and all(isinstance(t, (int, float)) for t in v)):
                raise ConfigError("field.params.vector", f"expected {dim} numbers")
            if not any(v):
                raise ConfigError("field.params.vector", "must be nonzero")
            if mf["kind"] != "euclidean":
                raise ConfigError("field.kind", "parallel fields are provided on euclidean charts only")
        elif f["kind"] == "coordinate_normalized":
            _obj(fp, "field.params", {"index", "angle"})
            if "index" in fp and not 0 <= _num(fp, "index", "field.params", integer=True) < dim:
                raise ConfigError("field.params.index", "out of range")
            if "angle" in fp:
                _num(fp, "angle", "field.params")
        else:
            if fp.get("name") not in FIELD_REGISTRY:
                raise ConfigError("field.params.name", f"unknown field; known: {sorted(FIELD_REGISTRY)}")
        fld = {"kind": f["kind"], "params": dict(fp)}

    checks = doc["checks"]
    if not isinstance(checks, list) or not checks:
        raise ConfigError("checks", "expected a non-empty list of check names")
    for i, c in enumerate(checks):
        if c not in CHECKS:
            raise ConfigError(f"checks[{i}]", f"unknown check {c!r}")

    sp = _obj(doc.get("sampling", {}), "sampling",
              {"seed", "n_points", "fiber_radius", "grid", "fd_step_overrides", "region", "n_variations"})
    sampling = {
        "seed": _num(sp, "seed", "sampling", 0, integer=True),
        "n_points": _num(sp, "n_points", "sampling", 20, integer=True),
        "fiber_radius": _num(sp, "fiber_radius", "sampling", 1.0),
        "grid": _num(sp, "grid", "sampling", 16, integer=True),
        "n_variations": _num(sp, "n_variations", "sampling", 3, integer=True),
    }
    if seed_override is not None:
        sampling["seed"] = int(seed_override)
    for key in ("n_points", "grid", "n_variations"):
        if sampling[key] < 1:
            raise ConfigError(f"sampling.{key}", "must be >= 1")
    if sampling["fiber_radius"] <= 0:
        raise ConfigError("sampling.fiber_radius", "must be positive")
    fo = _obj(sp.get("fd_step_overrides", {}), "sampling.fd_step_overrides", {"first", "second"})
    sampling["fd_step_overrides"] = {k: _num(fo, k, "sampling.fd_step_overrides") for k in fo}
    for k, v in sampling["fd_step_overrides"].items():
        if not 0 < v < 1:
            raise ConfigError(f"sampling.fd_step_overrides.{k}", "must lie in (0, 1)")
    if "region" in sp:
        r = sp["region"]
        if not (isinstance(r, list) and len(r) == 2):
            raise ConfigError("sampling.region", "expected [lo, hi]")
        lo = np.broadcast_to(np.asarray(r[0], float), (dim,))
        hi = np.broadcast_to(np.asarray(r[1], float), (dim,))
        if np.any(lo >= hi):
            raise ConfigError("sampling.region", "need lo < hi componentwise")
        sampling["region"] = [lo.tolist(), hi.tolist()]

    tol = doc.get("tolerances", {})
    _obj(tol, "tolerances", set(CHECKS))
    tolerances = {k: _num(tol, k, "tolerances") for k in tol}
    exp = doc.get("expectations", {})
    _obj(exp, "expectations", set(CHECKS))

    sc = Scenario(manifold, structure, fld, list(checks), sampling, tolerances, dict(exp))
    _validate_domain(sc)
    return sc


def _validate_domain(sc: Scenario):
    st = sc.structure
    R = sc.sampling["fiber_radius"]
    if st["kind"] == "sigma0":
        k, b = st["k"], st["b"]
        # 2kE + b over 0 <= 2E <= R^2
        if k >= 0 and b <= 0:
            raise ConfigError("structure.b", "sigma0 with k >= 0 needs b > 0")
        if k < 0 and k * R**2 + b <= 0:
            raise ConfigError("structure.b", f"2kE+b <= 0 inside the fiber radius {R:g}")
    if st["kind"] == "custom_named" and st["name"] == "example_z" and sc.manifold["kind"] != "euclidean":
        raise ConfigError("structure.name", "example_z is defined on a flat base")


def load(path, seed_override=None) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from exc
    return parse(doc, seed_override)
