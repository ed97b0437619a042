"""``isotm verify`` and ``isotm dump``.

Exit codes: 0 every check passed, 1 configuration error, 2 a check failed or
raised.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import List, Optional

import numpy as np

from . import __version__, fd, iso
from . import harmonic as hm
from .checks import Context, run_all
from .errors import ConfigError, GeometryError
from .scenario import load
from .tbundle import TMPoint

DUMP_KINDS = ("residual", "energy_density", "nijenhuis_norm", "harmonic_residual")


def build_report(sc, results) -> dict:
    steps = sc.sampling["fd_step_overrides"]
    return {
        "checks": [r.as_dict() for r in results],
        "all_passed": all(r.passed for r in results),
        "environment": {
            "fd_steps": {"first": steps.get("first", fd.FIRST_STEP), "second": steps.get("second", fd.SECOND_STEP)},
            "grid": sc.sampling["grid"],
            "seed": sc.seed,
            "rng": "numpy PCG64, stream per check seeded with [seed, check index]",
            "version": __version__,
        },
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def verify(path, out=None, adjudicate=False, seed=None) -> int:
    sc = load(path, seed)
    steps = sc.sampling["fd_step_overrides"]
    with fd.steps(steps.get("first"), steps.get("second")):
        try:
            ctx = Context(sc, adjudicate)
        except GeometryError as exc:
            raise ConfigError("structure", str(exc)) from exc
        results = run_all(ctx)
    text = dumps_report(build_report(sc, results))
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if all(r.passed for r in results) else 2


def _axes(lo, hi, k):
    return [np.linspace(lo[i], hi[i], k) for i in range(len(lo))]


def _grid(lo, hi, k):
    ax = _axes(lo, hi, k)
    return np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1).reshape(-1, len(lo))


def dump_rows(sc, what):
    """Header and rows for ``dump``; ordering is by grid index (C order)."""
    ctx = Context(sc)
    chart = ctx.chart
    n = chart.dim
    lo, hi = sc.region(chart)
    k = sc.sampling["grid"]
    xs = [f"x{i + 1}" for i in range(n)]
    ys = [f"y{i + 1}" for i in range(n)]
    if what in ("energy_density", "harmonic_residual"):
        pts = _grid(lo, hi, k)
        pts = pts[chart.contains(pts)]
        if what == "energy_density":
            vals = hm.energy_density(ctx.metric, ctx.field, pts)
        else:
            vals = [hm.harmonic_unit_residual(ctx.metric, ctx.field, p).residual_norm for p in pts]
        return xs + [what], [list(p) + [float(v)] for p, v in zip(pts, vals)]
    R = sc.sampling["fiber_radius"]
    Q = _grid(np.concatenate([lo, -R * np.ones(n)]), np.concatenate([hi, R * np.ones(n)]), k)
    Q = Q[chart.contains(Q[:, :n])]
    rows = []
    if what == "nijenhuis_norm":
        for q in Q:
            rows.append(list(q) + [iso.nijenhuis_max(ctx.structure, chart, TMPoint(q[:n], q[n:]))])
        return xs + ys + [what], rows
    from .checks import _zfield

    zf = _zfield(ctx)
    if chart.conformal is None:
        res = np.max(np.abs(iso.flat_pde_residual(zf, Q[:, :n], Q[:, n:])), axis=-1)
    else:
        res = np.max(np.stack([np.abs(iso.sphere_pde_residual(zf, chart, Q[:, :n], Q[:, n:], s, curvature=sc.curvature))
                               for s in range(n)]), axis=0)
    return xs + ys + ["residual"], [list(q) + [float(v)] for q, v in zip(Q, res)]


def dump(path, what, csv_path, seed=None) -> int:
    if what not in DUMP_KINDS:
        raise ConfigError("--what", f"expected one of {DUMP_KINDS}")
    sc = load(path, seed)
    steps = sc.sampling["fd_step_overrides"]
    with fd.steps(steps.get("first"), steps.get("second")):
        header, rows = dump_rows(sc, what)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="isotm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    v = sub.add_parser("verify", help="run the checks listed in a scenario file")
    v.add_argument("scenario")
    v.add_argument("--out", help="write the JSON report here instead of stdout")
    v.add_argument("--oracle-adjudicate", action="store_true",
                   help="use the oracle tension as ground truth in tau1-based checks")
    v.add_argument("--seed", type=int)
    d = sub.add_parser("dump", help="write a residual field on a grid as CSV")
    d.add_argument("scenario")
    d.add_argument("--what", required=True, choices=DUMP_KINDS)
    d.add_argument("--csv", required=True)
    d.add_argument("--seed", type=int)
    args = ap.parse_args(argv)
    try:
        if args.cmd == "verify":
            return verify(args.scenario, args.out, args.oracle_adjudicate, args.seed)
        return dump(args.scenario, args.what, args.csv, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except GeometryError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
