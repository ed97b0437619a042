"""Central finite differences over the last axis of batched coordinates.

All helpers accept ``x`` with shape ``(..., n)`` and a callable ``f`` that is
vectorised over the leading axes.  Steps scale as ``rel * max(1, |x_k|)``.
"""
from __future__ import annotations

import contextlib
import contextvars

import numpy as np

FIRST_STEP = 1e-5
SECOND_STEP = 1e-4

_steps = contextvars.ContextVar("isotm_fd_steps", default=(FIRST_STEP, SECOND_STEP))


def first_step():
    return _steps.get()[0]


def second_step():
    return _steps.get()[1]


@contextlib.contextmanager
def steps(first=None, second=None):
    """Temporarily override the relative FD steps (context-local)."""
    cur = _steps.get()
    token = _steps.set((first or cur[0], second or cur[1]))
    try:
        yield
    finally:
        _steps.reset(token)


def _h(xk, rel):
    return rel * np.maximum(1.0, np.abs(xk))


def _bcast(h, like):
    return np.reshape(h, np.shape(h) + (1,) * (np.ndim(like) - np.ndim(h)))


def jacobian(f, x, rel=None):
    """d f / d x_k stacked on a new trailing axis: shape f(x).shape + (n,)."""
    rel = first_step() if rel is None else rel
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.shape[-1]):
        h = _h(x[..., k], rel)
        xp = x.copy()
        xm = x.copy()
        xp[..., k] += h
        xm[..., k] -= h
        fp = np.asarray(f(xp))
        fm = np.asarray(f(xm))
        # use the representable step actually taken
        hk = xp[..., k] - xm[..., k]
        cols.append((fp - fm) / _bcast(hk, fp))
    return np.stack(cols, axis=-1)


def directional(f, x, v, rel=None):
    """Central difference of ``f`` along direction ``v`` (single point)."""
    rel = first_step() if rel is None else rel
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return np.zeros_like(np.asarray(f(x), dtype=float))
    t = rel * max(1.0, float(np.max(np.abs(x)))) / nv
    return (np.asarray(f(x + t * v)) - np.asarray(f(x - t * v))) / (2 * t)


def hessian(f, x, rel=None):
    """Second partials, shape f(x).shape + (n, n)."""
    rel = second_step() if rel is None else rel
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    f0 = np.asarray(f(x))
    out = np.empty(f0.shape + (n, n))
    hs = [_h(x[..., k], rel) for k in range(n)]

    def shifted(pairs):
        y = x.copy()
        for k, s in pairs:
            y[..., k] += s * hs[k]
        return np.asarray(f(y))

    for i in range(n):
        hi = _bcast(hs[i], f0)
        out[..., i, i] = (shifted([(i, 1)]) - 2 * f0 + shifted([(i, -1)])) / hi**2
        for j in range(i + 1, n):
            hj = _bcast(hs[j], f0)
            d = (
                shifted([(i, 1), (j, 1)])
                - shifted([(i, 1), (j, -1)])
                - shifted([(i, -1), (j, 1)])
                + shifted([(i, -1), (j, -1)])
            ) / (4 * hi * hj)
            out[..., i, j] = d
            out[..., j, i] = d
    return out
