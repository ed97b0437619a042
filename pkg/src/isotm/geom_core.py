"""Chart-based Riemannian calculus on the base manifold.

Every function is vectorised over leading axes: a base point ``p`` may have
shape ``(n,)`` or ``(..., n)``.  Index conventions:

* ``dg[..., k, i, j] = d_k g_ij`` and ``d2g[..., k, l, i, j] = d_k d_l g_ij``
* ``gamma[..., k, i, j] = Gamma^k_ij``
* ``riem[..., l, i, j, k] = R^l_ijk`` with ``R(d_i, d_j) d_k = R^l_ijk d_l`` and
  ``R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``
* ``nabla(X)[..., k, j] = (nabla_{d_j} X)^k``
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import fd
from .errors import DegeneratePlaneError, DomainError, SingularMetricError

Array = np.ndarray


@dataclass(frozen=True)
class ConformalFactor:
    """lambda(x) with analytic gradient and Hessian, all vectorised."""

    value: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    hess: Callable[[Array], Array]

    def mu(self, x):
        """mu_i = (1/lambda) d_i lambda."""
        return self.grad(x) / self.value(x)[..., None]


@dataclass(frozen=True)
class RiemannianChart:
    """A single coordinate chart ``(U, x)`` carrying the metric of ``(M, g)``.

    ``metric_jet`` (optional) returns ``(dg, d2g)``; without it both are
    obtained by central differences of ``metric``.
    """

    dim: int
    metric: Callable[[Array], Array]
    lo: Array
    hi: Array
    metric_jet: Optional[Callable[[Array], tuple]] = None
    radius: Optional[float] = None
    name: str = "chart"
    conformal: Optional[ConformalFactor] = field(default=None, compare=False)

    def contains(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        ok = np.all((x >= self.lo) & (x <= self.hi), axis=-1)
        if self.radius is not None:
            ok &= np.linalg.norm(x, axis=-1) <= self.radius
        return ok

    def check(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DomainError(f"{self.name}: expected {self.dim} coordinates, got shape {x.shape}")
        if not np.all(self.contains(x)):
            raise DomainError(f"{self.name}: point outside chart domain")
        return x

    def g(self, x) -> Array:
        return np.asarray(self.metric(self.check(x)), dtype=float)

    def jet(self, x):
        """Return ``(g, dg, d2g)`` at ``x``."""
        x = self.check(x)
        g = np.asarray(self.metric(x), dtype=float)
        if self.metric_jet is not None:
            dg, d2g = self.metric_jet(x)
            return g, np.asarray(dg, dtype=float), np.asarray(d2g, dtype=float)
        dg = np.moveaxis(fd.jacobian(self.g, x), -1, -3)
        d2g = np.moveaxis(fd.hessian(self.g, x), (-2, -1), (-4, -3))
        return g, dg, d2g

    def inner(self, x, a, b) -> Array:
        return np.einsum("...ij,...i,...j->...", self.g(x), a, b)

    def norm(self, x, a) -> Array:
        return np.sqrt(self.inner(x, a, a))


# ---------------------------------------------------------------------------
# built-in charts


def euclidean(n: int, half_width: float = 10.0) -> RiemannianChart:
    def metric(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)).copy()

    def jet(x):
        shape = np.shape(x)[:-1]
        return np.zeros(shape + (n, n, n)), np.zeros(shape + (n, n, n, n))

    return RiemannianChart(
        dim=n,
        metric=metric,
        metric_jet=jet,
        lo=-half_width * np.ones(n),
        hi=half_width * np.ones(n),
        name=f"euclidean({n})",
    )


def conformal(n: int, lam: ConformalFactor, half_width: float = 10.0,
              radius: Optional[float] = None, name: Optional[str] = None) -> RiemannianChart:
    """Chart with ``g = lambda^2 (dx^1 dx^1 + ... + dx^n dx^n)``."""
    eye = np.eye(n)

    def metric(x):
        lv = lam.value(x)
        return (lv**2)[..., None, None] * eye

    def jet(x):
        lv = lam.value(x)[..., None]
        gr = lam.grad(x)
        he = lam.hess(x)
        dg = (2 * lv * gr)[..., :, None, None] * eye
        d2 = 2 * (gr[..., :, None] * gr[..., None, :] + lv[..., None] * he)
        d2g = d2[..., :, :, None, None] * eye
        return dg, d2g

    return RiemannianChart(
        dim=n,
        metric=metric,
        metric_jet=jet,
        lo=-half_width * np.ones(n),
        hi=half_width * np.ones(n),
        radius=radius,
        name=name or f"conformal({n})",
        conformal=lam,
    )


def _stereo_lambda() -> ConformalFactor:
    def value(x):
        return 2.0 / (1.0 + np.sum(np.asarray(x) ** 2, axis=-1))

    def grad(x):
        lv = value(x)
        return -(lv**2)[..., None] * x

    def hess(x):
        x = np.asarray(x)
        lv = value(x)[..., None, None]
        n = x.shape[-1]
        return 2 * lv**3 * x[..., :, None] * x[..., None, :] - lv**2 * np.eye(n)

    return ConformalFactor(value, grad, hess)


STEREO_RADIUS = 4.0


def sphere_stereographic(n: int) -> RiemannianChart:
    """Unit round sphere S^n through stereographic projection, ``|x| <= 4``."""
    return conformal(n, _stereo_lambda(), half_width=STEREO_RADIUS,
                     radius=STEREO_RADIUS, name=f"sphere({n})")


def inverse_stereographic(x):
    """Embedded point of S^n in R^{n+1} and the differential (n+1, n)."""
    x = np.asarray(x, dtype=float)
    lv = 2.0 / (1.0 + np.sum(x**2, axis=-1))
    p = np.concatenate([lv[..., None] * x, (1.0 - lv)[..., None]], axis=-1)
    n = x.shape[-1]
    l1 = lv[..., None, None]
    top = l1 * np.eye(n) - l1**2 * x[..., :, None] * x[..., None, :]
    bottom = (lv**2)[..., None] * x
    D = np.concatenate([top, bottom[..., None, :]], axis=-2)
    return p, D


# ---------------------------------------------------------------------------
# vector fields


@dataclass(frozen=True)
class VectorFieldOnM:
    """``value(x) -> (..., n)``; optional ``jac(x)[..., i, j] = d_j X^i``."""

    value: Callable[[Array], Array]
    jac: Optional[Callable[[Array], Array]] = None
    name: str = "X"

    def __call__(self, x):
        return np.asarray(self.value(np.asarray(x, dtype=float)), dtype=float)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.jac is not None:
            return np.asarray(self.jac(x), dtype=float)
        return fd.jacobian(self.value, x)

    def second_derivative(self, x):
        """``[..., i, j, k] = d_j d_k X^i``."""
        x = np.asarray(x, dtype=float)
        if self.jac is not None:
            return fd.jacobian(self.jac, x)
        return fd.hessian(self.value, x)


def constant_field(c, name="parallel") -> VectorFieldOnM:
    c = np.asarray(c, dtype=float)

    def value(x):
        return np.broadcast_to(c, np.shape(x)[:-1] + c.shape).copy()

    def jac(x):
        return np.zeros(np.shape(x)[:-1] + (c.size, c.size))

    return VectorFieldOnM(value, jac, name)


def linear_field(A, name="linear") -> VectorFieldOnM:
    A = np.asarray(A, dtype=float)
    return VectorFieldOnM(
        lambda x: np.einsum("ij,...j->...i", A, x),
        lambda x: np.broadcast_to(A, np.shape(x)[:-1] + A.shape).copy(),
        name,
    )


def normalized_coordinate_field(chart: RiemannianChart, index: int = 0,
                                angle: Optional[float] = None) -> VectorFieldOnM:
    """Unit field ``d_i / |d_i|`` (or ``(cos t d_1 + sin t d_2)/|.|``).

    Analytic jet for conformal charts, central differences otherwise.
    """
    n = chart.dim
    c = np.zeros(n)
    if angle is None:
        c[index] = 1.0
    else:
        c[0], c[1] = np.cos(angle), np.sin(angle)

    def value(x):
        g = chart.g(x)
        s = np.sqrt(np.einsum("...ij,i,j->...", g, c, c))
        return c / s[..., None]

    jac = None
    if chart.conformal is not None:
        lam = chart.conformal
        cn = c / np.linalg.norm(c)

        def jac(x):
            lv = lam.value(x)
            return -(lam.grad(x) / (lv**2)[..., None])[..., None, :] * cn[:, None]

    return VectorFieldOnM(value, jac, f"coordinate_normalized[{index if angle is None else angle}]")


def rotated_frame_field(chart: RiemannianChart, theta, theta_grad=None,
                        name="rotated") -> VectorFieldOnM:
    """Unit field ``(cos t d_1 + sin t d_2) / lambda`` on a 2-d conformal chart.

    ``theta(x)`` is a scalar angle; the field is a harmonic unit field
    exactly when ``theta`` is a harmonic function.
    """
    lam = chart.conformal
    if lam is None or chart.dim != 2:
        raise ValueError("rotated_frame_field needs a 2-d conformal chart")

    def value(x):
        t = theta(x)
        return np.stack([np.cos(t), np.sin(t)], axis=-1) / lam.value(x)[..., None]

    jac = None
    if theta_grad is not None:
        def jac(x):
            t = theta(x)
            lv = lam.value(x)[..., None, None]
            c = np.stack([np.cos(t), np.sin(t)], axis=-1)[..., :, None]
            dc = np.stack([-np.sin(t), np.cos(t)], axis=-1)[..., :, None]
            return dc * theta_grad(x)[..., None, :] / lv - c * lam.grad(x)[..., None, :] / lv**2

    return VectorFieldOnM(value, jac, name)


# ---------------------------------------------------------------------------
# connection and curvature


def _inverse(g):
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise SingularMetricError("metric is not positive definite") from exc
    return np.linalg.inv(g)


def _first_kind(dg):
    # Gamma_{l i j} = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)
    return 0.5 * (
        np.einsum("...ilj->...lij", dg)
        + np.einsum("...jli->...lij", dg)
        - dg
    )


def christoffel(chart: RiemannianChart, p) -> Array:
    g, dg, _ = chart.jet(p)
    gi = _inverse(g)
    return np.einsum("...kl,...lij->...kij", gi, _first_kind(dg))


def christoffel_derivative(chart: RiemannianChart, p):
    """Return ``(gamma, dgamma)`` with ``dgamma[..., m, k, i, j] = d_m Gamma^k_ij``."""
    g, dg, d2g = chart.jet(p)
    gi = _inverse(g)
    first = _first_kind(dg)
    gamma = np.einsum("...kl,...lij->...kij", gi, first)
    dfirst = 0.5 * (
        np.einsum("...milj->...mlij", d2g)
        + np.einsum("...mjli->...mlij", d2g)
        - d2g
    )
    dgi = -np.einsum("...ka,...mab,...bl->...mkl", gi, dg, gi)
    dgamma = np.einsum("...mkl,...lij->...mkij", dgi, first) + np.einsum(
        "...kl,...mlij->...mkij", gi, dfirst
    )
    return gamma, dgamma


def riemann(chart: RiemannianChart, p) -> Array:
    gamma, dgamma = christoffel_derivative(chart, p)
    # R^l_ijk = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik
    t1 = np.einsum("...iljk->...lijk", dgamma)
    t2 = np.einsum("...jlik->...lijk", dgamma)
    t3 = np.einsum("...lim,...mjk->...lijk", gamma, gamma)
    t4 = np.einsum("...ljm,...mik->...lijk", gamma, gamma)
    return t1 - t2 + t3 - t4


def ricci(chart: RiemannianChart, p) -> Array:
    """``Ric_jk = R^i_ijk``; equals ``(n-1) k g`` on a space form."""
    return np.einsum("...iijk->...jk", riemann(chart, p))


def curvature_apply(riem, X, Y, Z) -> Array:
    """Vector ``R(X, Y) Z``."""
    return np.einsum("...lijk,...i,...j,...k->...l", riem, X, Y, Z)


def ricci_operator(chart: RiemannianChart, p, X) -> Array:
    """The (1,1) Ricci tensor applied to ``X`` (index raised with g)."""
    gi = _inverse(chart.g(p))
    return np.einsum("...ab,...bc,...c->...a", gi, ricci(chart, p), X)


def sectional(chart: RiemannianChart, p, X, Y) -> float:
    p = np.asarray(p, dtype=float)
    g = chart.g(p)
    gxx = X @ g @ X
    gyy = Y @ g @ Y
    gxy = X @ g @ Y
    area = gxx * gyy - gxy**2
    if area <= 1e-14 * max(gxx * gyy, 1e-300):
        raise DegeneratePlaneError("plane vectors are linearly dependent")
    R = riemann(chart, p)
    return float(curvature_apply(R, X, Y, Y) @ g @ X / area)


def nabla(chart: RiemannianChart, X: VectorFieldOnM, p) -> Array:
    """Covariant derivative of ``X`` as the matrix ``(nabla X)^k_j``."""
    p = chart.check(p)
    gamma = christoffel(chart, p)
    return X.derivative(p) + np.einsum("...kjm,...m->...kj", gamma, X(p))


def covariant_derivative(chart: RiemannianChart, X: VectorFieldOnM, V, p) -> Array:
    """``nabla_V X`` at ``p``."""
    return np.einsum("...kj,...j->...k", nabla(chart, X, p), V)


def orthonormal_frame(chart: RiemannianChart, p, order=None) -> Array:
    """Gram-Schmidt on coordinate fields in ``order``; rows are frame vectors."""
    g = chart.g(p)
    n = chart.dim
    order = list(range(n)) if order is None else list(order)
    gp = g[..., order, :][..., :, order]
    try:
        L = np.linalg.cholesky(gp)
    except np.linalg.LinAlgError as exc:
        raise SingularMetricError("metric is not positive definite") from exc
    E = np.swapaxes(np.linalg.inv(L), -1, -2)  # columns orthonormal in permuted coords
    out = np.zeros_like(E)
    out[..., order, :] = E
    return np.swapaxes(out, -1, -2)


def frame_field(chart: RiemannianChart, index: int, order=None) -> VectorFieldOnM:
    """Frame vector ``E_index`` of the Gram-Schmidt frame, as a field near p."""
    return VectorFieldOnM(lambda x: orthonormal_frame(chart, x, order)[..., index, :],
                          None, f"E{index}")


def divergence(chart: RiemannianChart, X: VectorFieldOnM, p) -> Array:
    return np.einsum("...kk->...", nabla(chart, X, p))


def grad_norm_sq(chart: RiemannianChart, X: VectorFieldOnM, p) -> Array:
    """``||nabla X||^2`` as a (1,1)-tensor norm."""
    g = chart.g(p)
    gi = _inverse(g)
    N = nabla(chart, X, p)
    return np.einsum("...kl,...ij,...ki,...lj->...", g, gi, N, N)


def second_covariant(chart: RiemannianChart, X: VectorFieldOnM, p) -> Array:
    """``(nabla^2 X)^k_ij = (nabla_i nabla_j X - nabla_{nabla_i d_j} X)^k``."""
    p = chart.check(p)
    gamma, dgamma = christoffel_derivative(chart, p)
    Xv = X(p)
    dX = X.derivative(p)            # [k, j] = d_j X^k
    ddX = X.second_derivative(p)    # [k, j, i] = d_i d_j X^k
    N = dX + np.einsum("...kjm,...m->...kj", gamma, Xv)
    # d_i N^k_j
    dN = (
        np.einsum("...kji->...kij", ddX)
        + np.einsum("...ikjm,...m->...kij", dgamma, Xv)
        + np.einsum("...kjm,...mi->...kij", gamma, dX)
    )
    return (
        dN
        + np.einsum("...kim,...mj->...kij", gamma, N)
        - np.einsum("...mij,...km->...kij", gamma, N)
    )


def rough_laplacian(chart: RiemannianChart, X: VectorFieldOnM, p, order=None) -> Array:
    """``Delta_g X = -sum_a (nabla^2 X)(E_a, E_a)`` over a Gram-Schmidt frame."""
    E = orthonormal_frame(chart, p, order)
    H = second_covariant(chart, X, p)
    return -np.einsum("...ai,...aj,...kij->...k", E, E, H)


# ---------------------------------------------------------------------------
# Hopf fields on S^3

HOPF_J = {
    1: np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], float),
    2: np.array([[0, 0, 1, 0], [0, 0, 0, -1], [-1, 0, 0, 0], [0, 1, 0, 0]], float),
    3: np.array([[0, 0, 0, 1], [0, 0, 1, 0], [0, -1, 0, 0], [-1, 0, 0, 0]], float),
}


def hopf_fields(i: int) -> VectorFieldOnM:
    """``W_i = J_i N`` pulled back to the stereographic chart of S^3."""
    if i not in HOPF_J:
        raise ValueError("Hopf index must be 1, 2 or 3")
    J = HOPF_J[i]

    def value(x):
        x = np.asarray(x, dtype=float)
        p, D = inverse_stereographic(x)
        lv = 2.0 / (1.0 + np.sum(x**2, axis=-1))
        q = np.einsum("ab,...b->...a", J, p)
        return np.einsum("...aj,...a->...j", D, q) / (lv**2)[..., None]

    def jac(x):
        x = np.asarray(x, dtype=float)
        p, D = inverse_stereographic(x)
        lv = 2.0 / (1.0 + np.sum(x**2, axis=-1))
        n = 3
        q = np.einsum("ab,...b->...a", J, p)
        l2 = (lv**2)[..., None, None]
        l3 = (lv**3)[..., None, None, None]
        eye = np.eye(n)
        xa = x[..., :, None, None]
        xj = x[..., None, :, None]
        xk = x[..., None, None, :]
        # dD[..., a, j, k] = d_k D_aj
        top = (
            -l2[..., None] * xk * eye[:, :, None]
            + 2 * l3 * xk * xa * xj
            - l2[..., None] * (eye[:, None, :] * xj + xa * eye[None, :, :])
        )
        bottom = -2 * (lv**3)[..., None, None] * x[..., :, None] * x[..., None, :] + (lv**2)[..., None, None] * eye
        dD = np.concatenate([top, bottom[..., None, :, :]], axis=-3)
        dq = np.einsum("ab,...bk->...ak", J, D)
        dinv = (2.0 / lv)[..., None] * x  # d_k (1/lambda^2)
        W0 = np.einsum("...aj,...a->...j", D, q)
        return (
            W0[..., :, None] * dinv[..., None, :]
            + (np.einsum("...ajk,...a->...jk", dD, q) + np.einsum("...aj,...ak->...jk", D, dq))
            / (lv**2)[..., None, None]
        )

    return VectorFieldOnM(value, jac, f"hopf{i}")
