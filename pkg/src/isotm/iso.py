"""Isotropic almost complex structures ``J_{delta,sigma}`` on TM.

``J X^h = alpha X^v + sigma X^h`` and ``J X^v = -sigma X^v - delta X^h`` with
``alpha = (1 + sigma^2) / delta`` so that ``alpha delta - sigma^2 = 1``.

Scalar fields on TM are vectorised callables ``f(chart, x, y)``; their jets
``df(chart, x, y)`` return the gradient in the induced coordinates (last
axis of length 2n, x-part first).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import fd
from .errors import DomainError, ParameterError
from .geom_core import RiemannianChart
from .tbundle import TMPoint, TMVector, bracket_fd, lift_matrix, split_matrix


class Verdict(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    INTEGRABLE = "INTEGRABLE"
    NOT_INTEGRABLE = "NOT_INTEGRABLE"
    HARMONIC = "HARMONIC"
    NOT_HARMONIC = "NOT_HARMONIC"
    INCONCLUSIVE = "INCONCLUSIVE"


ZERO_TOL = 1e-4
NONZERO_TOL = 1e-2


def classify(value: float, yes: Verdict, no: Verdict, lo=ZERO_TOL, hi=NONZERO_TOL) -> Verdict:
    """Three-way verdict: ``<= lo`` yes, ``> hi`` no, otherwise inconclusive."""
    if value <= lo:
        return yes
    if value > hi:
        return no
    return Verdict.INCONCLUSIVE


# ---------------------------------------------------------------------------
# structures


def _energy_and_grad(chart, x, y):
    g, dg, _ = chart.jet(x)
    E = 0.5 * np.einsum("...ij,...i,...j->...", g, y, y)
    dEx = 0.5 * np.einsum("...kij,...i,...j->...k", dg, y, y)
    dEy = np.einsum("...ij,...j->...i", g, y)
    return E, np.concatenate([dEx, dEy], axis=-1)


@dataclass(frozen=True)
class RadialProfile:
    """delta, sigma as functions of ``E = g(u,u)/2`` with their E-derivatives."""

    delta: Callable[[np.ndarray], np.ndarray]
    ddelta: Callable[[np.ndarray], np.ndarray]
    sigma: Callable[[np.ndarray], np.ndarray]
    dsigma: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class IsotropicStructure:
    """``J_{delta,sigma}``; alpha is always derived, never supplied."""

    delta_fn: Callable
    sigma_fn: Callable
    d_delta_fn: Optional[Callable] = None
    d_sigma_fn: Optional[Callable] = None
    name: str = "custom"
    profile: Optional[RadialProfile] = None
    sigma_zero: bool = False
    params: tuple = ()

    @classmethod
    def custom(cls, delta, sigma=None, d_delta=None, d_sigma=None, name="custom"):
        if sigma is None:
            def sigma(chart, x, y):
                return np.zeros(np.shape(x)[:-1])

            def d_sigma(chart, x, y):
                return np.zeros(np.shape(x)[:-1] + (2 * np.shape(x)[-1],))

            return cls(delta, sigma, d_delta, d_sigma, name=name, sigma_zero=True)
        return cls(delta, sigma, d_delta, d_sigma, name=name)

    @classmethod
    def from_profile(cls, prof: RadialProfile, name, sigma_zero=False, params=()):
        def delta(chart, x, y):
            E, _ = _energy_and_grad(chart, x, y)
            return prof.delta(E)

        def sigma(chart, x, y):
            E, _ = _energy_and_grad(chart, x, y)
            return prof.sigma(E)

        def d_delta(chart, x, y):
            E, dE = _energy_and_grad(chart, x, y)
            return prof.ddelta(E)[..., None] * dE

        def d_sigma(chart, x, y):
            E, dE = _energy_and_grad(chart, x, y)
            return prof.dsigma(E)[..., None] * dE

        return cls(delta, sigma, d_delta, d_sigma, name=name, profile=prof,
                   sigma_zero=sigma_zero, params=params)

    @property
    def has_jets(self) -> bool:
        return self.d_delta_fn is not None and self.d_sigma_fn is not None

    # -- values

    def delta(self, chart, x, y):
        d = np.asarray(self.delta_fn(chart, np.asarray(x, float), np.asarray(y, float)), float)
        if np.any(~np.isfinite(d)) or np.any(d <= 0):
            raise DomainError(f"{self.name}: delta must be finite and positive")
        return d

    def sigma(self, chart, x, y):
        return np.asarray(self.sigma_fn(chart, np.asarray(x, float), np.asarray(y, float)), float)

    def alpha(self, chart, x, y):
        return (1.0 + self.sigma(chart, x, y) ** 2) / self.delta(chart, x, y)

    def values(self, chart, at: TMPoint):
        """``(alpha, delta, sigma)`` at a TM point."""
        d = self.delta(chart, at.x, at.y)
        s = self.sigma(chart, at.x, at.y)
        return (1.0 + s**2) / d, d, s

    # -- differentials in induced coordinates

    def _fd_grad(self, fn, chart, at):
        n = at.n
        return fd.jacobian(lambda q: fn(chart, q[..., :n], q[..., n:]), at.coords)

    def d_delta(self, chart, at: TMPoint):
        if self.d_delta_fn is not None:
            return np.asarray(self.d_delta_fn(chart, at.x, at.y), float)
        return self._fd_grad(self.delta, chart, at)

    def d_sigma(self, chart, at: TMPoint):
        if self.d_sigma_fn is not None:
            return np.asarray(self.d_sigma_fn(chart, at.x, at.y), float)
        return self._fd_grad(self.sigma, chart, at)

    def d_alpha(self, chart, at: TMPoint):
        a, d, s = self.values(chart, at)
        dd = self.d_delta(chart, at)
        ds = self.d_sigma(chart, at)
        return (2 * s * ds * d - (1 + s**2) * dd) / d**2 if np.ndim(d) == 0 else (
            (2 * s * d)[..., None] * ds - (1 + s**2)[..., None] * dd) / (d**2)[..., None]

    def differential(self, name: str, chart, at: TMPoint):
        return {"alpha": self.d_alpha, "delta": self.d_delta, "sigma": self.d_sigma}[name](chart, at)

    def jet_mismatch(self, chart, at: TMPoint) -> dict:
        """Relative gap between analytic jets and central differences."""
        out = {}
        for name, fn, jet in (("delta", self.delta, self.d_delta_fn), ("sigma", self.sigma, self.d_sigma_fn)):
            if jet is None:
                continue
            a = np.asarray(jet(chart, at.x, at.y), float)
            b = self._fd_grad(fn, chart, at)
            out[name] = float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))
        return out


def sasaki() -> IsotropicStructure:
    """``J_{1,0}``: delta = 1, sigma = 0 (alpha = 1)."""
    return family_sigma0(0.0, 1.0, name="sasaki")


def family_sigma0(k: float, b: float, name: Optional[str] = None) -> IsotropicStructure:
    """``delta^{-1} = sqrt(2kE + b)``, ``sigma = 0``."""
    k = float(k)
    b = float(b)

    def s_of(E):
        s = 2 * k * E + b
        if np.any(s <= 0):
            raise DomainError(f"sigma0(k={k}, b={b}): 2kE+b <= 0, structure undefined")
        return s

    prof = RadialProfile(
        delta=lambda E: s_of(E) ** -0.5,
        ddelta=lambda E: -k * s_of(E) ** -1.5,
        sigma=lambda E: np.zeros_like(np.asarray(E, float)),
        dsigma=lambda E: np.zeros_like(np.asarray(E, float)),
    )
    return IsotropicStructure.from_profile(prof, name or f"sigma0(k={k:g},b={b:g})",
                                           sigma_zero=True, params=("sigma0", k, b))


def family_general(k: float, a: float, b: float) -> IsotropicStructure:
    """``delta^{-2} = (2kE+b+sqrt((2kE+b)^2+4a^2k^2))/2``, ``sigma = a k delta^2``."""
    k, a, b = float(k), float(a), float(b)
    if a == 0:
        raise ParameterError("family_general requires a != 0")

    def w_of(E):
        s = 2 * k * E + b
        w = 0.5 * (s + np.sqrt(s**2 + 4 * a**2 * k**2))
        if np.any(w <= 0):
            raise DomainError(f"general(k={k}, a={a}, b={b}): delta^-2 <= 0")
        return s, w

    def dw(E):
        s, w = w_of(E)
        r = np.sqrt(s**2 + 4 * a**2 * k**2)
        return k * (1 + s / r)

    prof = RadialProfile(
        delta=lambda E: w_of(E)[1] ** -0.5,
        ddelta=lambda E: -0.5 * w_of(E)[1] ** -1.5 * dw(E),
        sigma=lambda E: a * k / w_of(E)[1],
        dsigma=lambda E: -a * k / w_of(E)[1] ** 2 * dw(E),
    )
    return IsotropicStructure.from_profile(prof, f"general(k={k:g},a={a:g},b={b:g})",
                                           sigma_zero=(k == 0), params=("general", k, a, b))


# ---------------------------------------------------------------------------
# the complex function z = (sigma + i) / delta


@dataclass(frozen=True)
class ComplexFieldZ:
    """``z(x, y) = u + i v`` with ``u = sigma/delta``, ``v = 1/delta``.

    ``dz_dx`` and ``dz_dy`` (optional) return complex arrays of shape (..., n).
    """

    z: Callable
    dz_dx: Optional[Callable] = None
    dz_dy: Optional[Callable] = None
    name: str = "z"

    def __call__(self, x, y):
        return np.asarray(self.z(np.asarray(x, float), np.asarray(y, float)), complex)

    def partials(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if self.dz_dx is not None and self.dz_dy is not None:
            return np.asarray(self.dz_dx(x, y), complex), np.asarray(self.dz_dy(x, y), complex)
        n = x.shape[-1]
        J = fd.jacobian(lambda q: self.z(q[..., :n], q[..., n:]), np.concatenate([x, y], axis=-1))
        return J[..., :n], J[..., n:]

    def to_structure(self) -> IsotropicStructure:
        """``delta = 1/v``, ``sigma = u/v``; refuses ``v <= 0``."""
        def uv(x, y):
            zz = self(x, y)
            if np.any(zz.imag <= 0):
                raise DomainError(f"{self.name}: Im z must be positive")
            return zz.real, zz.imag

        def delta(chart, x, y):
            return 1.0 / uv(x, y)[1]

        def sigma(chart, x, y):
            u, v = uv(x, y)
            return u / v

        d_delta = d_sigma = None
        if self.dz_dx is not None and self.dz_dy is not None:
            def _dz(x, y):
                zx, zy = self.partials(x, y)
                return np.concatenate([zx, zy], axis=-1)

            def d_delta(chart, x, y):
                u, v = uv(x, y)
                return -_dz(x, y).imag / (v**2)[..., None]

            def d_sigma(chart, x, y):
                u, v = uv(x, y)
                dz = _dz(x, y)
                return (dz.real * v[..., None] - u[..., None] * dz.imag) / (v**2)[..., None]

        return IsotropicStructure(delta, sigma, d_delta, d_sigma, name=f"from_z[{self.name}]")

    @classmethod
    def from_structure(cls, s: IsotropicStructure, chart: RiemannianChart):
        def z(x, y):
            return (s.sigma(chart, x, y) + 1j) / s.delta(chart, x, y)

        return cls(z, name=f"z[{s.name}]")


def example_z() -> ComplexFieldZ:
    """``u = x.y/(1+x.x)``, ``v = sqrt((1+x.x)(1+y.y)-(x.y)^2)/(1+x.x)``."""

    def parts(x, y):
        A = 1.0 + np.sum(x * x, axis=-1)
        B = 1.0 + np.sum(y * y, axis=-1)
        c = np.sum(x * y, axis=-1)
        D = A * B - c * c
        return A, B, c, D

    def z(x, y):
        A, B, c, D = parts(x, y)
        return c / A + 1j * np.sqrt(D) / A

    def dz_dx(x, y):
        A, B, c, D = parts(x, y)
        A_ = A[..., None]
        c_ = c[..., None]
        sD = np.sqrt(D)[..., None]
        du = y / A_ - 2 * c_ * x / A_**2
        dD = 2 * x * B[..., None] - 2 * c_ * y
        dv = dD / (2 * sD * A_) - 2 * x * sD / A_**2
        return du + 1j * dv

    def dz_dy(x, y):
        A, B, c, D = parts(x, y)
        A_ = A[..., None]
        c_ = c[..., None]
        sD = np.sqrt(D)[..., None]
        du = x / A_
        dD = 2 * A_ * y - 2 * c_ * x
        dv = dD / (2 * sD * A_)
        return du + 1j * dv

    return ComplexFieldZ(z, dz_dx, dz_dy, name="example_z")


def z_of_sigma0_on_sphere(k: float, b: float, chart: RiemannianChart) -> ComplexFieldZ:
    """``z = i sqrt(2kE + b)`` with ``E = lambda^2 |y|^2 / 2`` on a conformal chart."""
    lam = chart.conformal

    def z(x, y):
        s = k * lam.value(x) ** 2 * np.sum(y * y, axis=-1) + b
        return 1j * np.sqrt(s)

    def dz_dx(x, y):
        lv = lam.value(x)
        r2 = np.sum(y * y, axis=-1)
        s = k * lv**2 * r2 + b
        return 1j * (k * lv * r2 / np.sqrt(s))[..., None] * lam.grad(x)

    def dz_dy(x, y):
        lv = lam.value(x)
        s = k * lv**2 * np.sum(y * y, axis=-1) + b
        return 1j * (k * lv**2 / np.sqrt(s))[..., None] * y

    return ComplexFieldZ(z, dz_dx, dz_dy, name=f"sigma0(k={k:g},b={b:g})")


# ---------------------------------------------------------------------------
# J and integrability


def J_matrix(s: IsotropicStructure, chart, at: TMPoint) -> np.ndarray:
    """Matrix of ``J`` in the induced coordinates at ``at``."""
    a, d, sg = s.values(chart, at)
    n = at.n
    I = np.eye(n)
    Jl = np.block([[sg * I, -d * I], [a * I, -sg * I]])
    return lift_matrix(chart, at) @ Jl @ split_matrix(chart, at)


def apply_J(s: IsotropicStructure, chart, A: TMVector) -> TMVector:
    """``J A`` from the split ``A = h^h + v^v``."""
    a, d, sg = s.values(chart, A.at)
    M = split_matrix(chart, A.at)
    hv = M @ A.components
    n = A.at.n
    h, v = hv[:n], hv[n:]
    new = np.concatenate([sg * h - d * v, a * h - sg * v])
    return TMVector(A.at, lift_matrix(chart, A.at) @ new)


def _const(c):
    c = np.asarray(c, float)
    return lambda q: c


def nijenhuis(s: IsotropicStructure, chart, at: TMPoint, A, B) -> TMVector:
    """``N(A,B) = [JA,JB] - J[JA,B] - J[A,JB] - [A,B]``.

    ``A``, ``B`` are extended with constant coefficients in the induced chart,
    so ``[A, B] = 0``; N is tensorial so the extension does not matter.
    """
    a = A.components if isinstance(A, TMVector) else np.asarray(A, float)
    b = B.components if isinstance(B, TMVector) else np.asarray(B, float)

    def JA(q):
        return J_matrix(s, chart, q) @ a

    def JB(q):
        return J_matrix(s, chart, q) @ b

    Jm = J_matrix(s, chart, at)
    t1 = bracket_fd(JA, JB, at).components
    t2 = bracket_fd(JA, _const(b), at).components
    t3 = bracket_fd(_const(a), JB, at).components
    return TMVector(at, t1 - Jm @ t2 - Jm @ t3)


def nijenhuis_tensor(s: IsotropicStructure, chart, at: TMPoint) -> np.ndarray:
    """All of N at once: ``[a, i, j] = N(d_i, d_j)^a`` in induced coordinates.

    Uses one central-difference jacobian of the J matrix; agrees with
    :func:`nijenhuis` on coordinate vectors.
    """
    J = J_matrix(s, chart, at)
    try:
        DJ = fd.jacobian(lambda q: J_matrix(s, chart, TMPoint.from_coords(q)), at.coords)  # [a,b,c] = d_c J_ab
    except DomainError as exc:
        raise DomainError(f"Nijenhuis stencil left the domain: {exc}") from exc
    t1 = np.einsum("ajc,ci->aij", DJ, J) - np.einsum("aic,cj->aij", DJ, J)
    t2 = -DJ                                # [J d_i, d_j]
    t3 = np.einsum("aji->aij", DJ)          # [d_i, J d_j]
    return t1 - np.einsum("ab,bij->aij", J, t2 + t3)


def nijenhuis_max(s: IsotropicStructure, chart, at: TMPoint) -> float:
    """Largest component of N over all pairs of coordinate basis vectors."""
    return float(np.max(np.abs(nijenhuis_tensor(s, chart, at))))


def integrability_verdict(value: float) -> Verdict:
    return classify(value, Verdict.INTEGRABLE, Verdict.NOT_INTEGRABLE)


def flat_pde_residual(zf: ComplexFieldZ, x, y) -> np.ndarray:
    """``dz/dx^l + z dz/dy^l`` for each l (zero iff integrable on T R^n)."""
    zx, zy = zf.partials(x, y)
    return zx + zf(x, y)[..., None] * zy


def sphere_pde_residual(zf: ComplexFieldZ, chart: RiemannianChart, x, y, s0: int,
                        literal: bool = False, curvature: float = 1.0):
    """Integrability residual on a conformally flat chart of curvature k, component s0.

    ``sum_i [z_{y^i}(y^s mu_i - mu_s y^i) - z_{y^s} y^i mu_i] + k y^s lambda^2
    + z_{x^s} + z z_{y^s}`` (k = 1 for the unit sphere).  ``literal=True``
    flips the sign of the ``y^s lambda^2`` term (the printed form, which the
    integrable families on the unit sphere do not satisfy).
    """
    lam = chart.conformal
    if lam is None:
        raise ParameterError("sphere_pde_residual needs a conformal chart")
    x = chart.check(x)
    y = np.asarray(y, float)
    mu = lam.mu(x)
    lv = lam.value(x)
    zx, zy = zf.partials(x, y)
    z = zf(x, y)
    ys = y[..., s0]
    mus = mu[..., s0]
    ssum = np.sum(zy * (ys[..., None] * mu - mus[..., None] * y), axis=-1) - zy[..., s0] * np.sum(y * mu, axis=-1)
    sign = -1.0 if literal else 1.0
    return ssum + sign * curvature * ys * lv**2 + zx[..., s0] + z * zy[..., s0]


def z_map(s: IsotropicStructure, chart, at: TMPoint) -> complex:
    a, d, sg = s.values(chart, at)
    return (sg + 1j) / d


def phi_map(u, v, z) -> np.ndarray:
    """``Phi((u, v), z) = v - z u`` for unit ``u`` orthogonal to ``v``."""
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    if abs(u @ u - 1) > 1e-9 or abs(u @ v) > 1e-9:
        raise ParameterError("phi_map needs u.u = 1 and u.v = 0")
    if np.imag(z) <= 0:
        raise ParameterError("phi_map needs Im z > 0")
    return v - z * u
