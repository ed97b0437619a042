"""Induced chart on TM: lifts, connection map, projection, FD Lie brackets.

A point of TM is ``(x, y)`` with ``y`` the components of ``u`` in the
coordinate basis; a tangent vector of TM has ``2n`` components ``(a, b)``
in the induced coordinates ``(x^1..x^n, y^1..y^n)``.

A *TM field* is any callable ``TMPoint -> array(2n)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fd
from .geom_core import RiemannianChart, VectorFieldOnM, christoffel
from .errors import DomainError


@dataclass(frozen=True)
class TMPoint:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))

    @property
    def n(self) -> int:
        return self.x.shape[-1]

    @property
    def coords(self) -> np.ndarray:
        return np.concatenate([self.x, self.y], axis=-1)

    @classmethod
    def from_coords(cls, q):
        q = np.asarray(q, dtype=float)
        n = q.shape[-1] // 2
        return cls(q[..., :n], q[..., n:])


@dataclass(frozen=True)
class TMVector:
    at: TMPoint
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "components", np.asarray(self.components, dtype=float))

    @property
    def dx(self):
        return self.components[..., : self.at.n]

    @property
    def dy(self):
        return self.components[..., self.at.n:]

    def horizontal_part(self, chart):
        """``pi_* A``."""
        return projection(self)

    def vertical_part(self, chart):
        """``K A``."""
        return connection_map(chart, self)


def _comp(A):
    return A.components if isinstance(A, TMVector) else np.asarray(A, dtype=float)


def _gamma_y(chart, at):
    # (Gamma y)^k_j = Gamma^k_ij y^i
    return np.einsum("...kij,...i->...kj", christoffel(chart, at.x), at.y)


def horizontal_lift(chart: RiemannianChart, X, at: TMPoint) -> TMVector:
    X = np.asarray(X, dtype=float)
    return TMVector(at, np.concatenate([X, -np.einsum("...kj,...j->...k", _gamma_y(chart, at), X)], axis=-1))


def vertical_lift(chart: RiemannianChart, X, at: TMPoint) -> TMVector:
    chart.check(at.x)
    X = np.asarray(X, dtype=float)
    return TMVector(at, np.concatenate([np.zeros_like(X), X], axis=-1))


def lift(chart, h, v, at: TMPoint) -> TMVector:
    """``h^h + v^v`` at ``at``."""
    return TMVector(at, horizontal_lift(chart, h, at).components + vertical_lift(chart, v, at).components)


def projection(A: TMVector) -> np.ndarray:
    return A.dx.copy()


def connection_map(chart: RiemannianChart, A: TMVector) -> np.ndarray:
    """``(K A)^k = b^k + Gamma^k_ij y^i a^j``."""
    return A.dy + np.einsum("...kj,...j->...k", _gamma_y(chart, A.at), A.dx)


def split(chart, A: TMVector):
    """``(pi_* A, K A)``; ``A = (pi_* A)^h + (K A)^v``."""
    return projection(A), connection_map(chart, A)


def lift_matrix(chart, at: TMPoint) -> np.ndarray:
    """Columns: horizontal lifts of ``d_i`` then vertical lifts of ``d_i``."""
    n = at.n
    L = np.zeros((2 * n, 2 * n))
    L[:n, :n] = np.eye(n)
    L[n:, :n] = -_gamma_y(chart, at)
    L[n:, n:] = np.eye(n)
    return L


def split_matrix(chart, at: TMPoint) -> np.ndarray:
    """Inverse of :func:`lift_matrix`: coordinates -> (pi_*, K)."""
    n = at.n
    M = np.eye(2 * n)
    M[n:, :n] = _gamma_y(chart, at)
    return M


def lifted_field(chart, X: VectorFieldOnM, kind: str):
    """The TM field ``X^h`` (kind ``"h"``) or ``X^v`` (kind ``"v"``)."""
    if kind == "h":
        return lambda q: horizontal_lift(chart, X(q.x), q).components
    if kind == "v":
        return lambda q: vertical_lift(chart, X(q.x), q).components
    raise ValueError(kind)


def field_jacobian(F, at: TMPoint) -> np.ndarray:
    """``[a, b] = d_b F^a`` by central differences in the 2n coordinates."""
    return fd.jacobian(lambda q: _comp(F(TMPoint.from_coords(q))), at.coords)


def bracket_fd(F, G, at: TMPoint) -> TMVector:
    """``[F, G]^a = F^b d_b G^a - G^b d_b F^a``.

    Stencil points outside the chart domain raise :class:`DomainError`.
    """
    Fv = _comp(F(at))
    Gv = _comp(G(at))
    try:
        DF = field_jacobian(F, at)
        DG = field_jacobian(G, at)
    except DomainError as exc:
        raise DomainError(f"bracket stencil left the domain: {exc}") from exc
    return TMVector(at, DG @ Fv - DF @ Gv)


def liouville_form(chart: RiemannianChart, A: TMVector) -> float:
    """``Theta(A) = g_x(pi_* A, u)``."""
    return chart.inner(A.at.x, projection(A), A.at.y)


def liouville_components(chart, at: TMPoint) -> np.ndarray:
    """Theta in induced coordinates: ``Theta = g_ij y^j dx^i``."""
    return np.concatenate([np.einsum("...ij,...j->...i", chart.g(at.x), at.y), np.zeros(at.n)])


def exterior_liouville(chart, at: TMPoint) -> np.ndarray:
    """Matrix of ``dTheta`` by central differences: ``dTheta(A, B) = A^T W B``.

    Convention ``dTheta(A, B) = A Theta(B) - B Theta(A) - Theta([A, B])``.
    """
    D = fd.jacobian(lambda q: liouville_components(chart, TMPoint.from_coords(q)), at.coords)
    # D[b, a] = d_a Theta_b ; W_ab = d_a Theta_b - d_b Theta_a
    return D.T - D


def energy_function(chart, at: TMPoint):
    """``E(u) = g(u, u) / 2``."""
    return 0.5 * chart.inner(at.x, at.y, at.y)
