"""Green matrices of first-order operators and the selfadjointness criterion.

A first-order operator near a boundary component is written
``C d/dtheta + (zero order)``.  With ``n = +1`` when d/dtheta points inward
and ``n = -1`` otherwise, the Green matrix is ``A = -n C``; for a Dirac
operator ``i gamma_d d_normal`` this is ``-i gamma_d``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .clifford import GammaSet, build_chirality

DEFAULT_TOL = 1e-10


class NotEllipticError(ValueError):
    """Normal coefficient is singular."""


def _as_matrix(a) -> np.ndarray:
    m = np.atleast_2d(np.asarray(a, dtype=complex))
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class FirstOrderOp1D:
    """P = J0 d/dtheta + V(theta) on [a, b]."""

    J0: np.ndarray
    V: Callable[[float], np.ndarray] | None = None
    interval: tuple[float, float] = (-np.pi / 2, np.pi / 2)

    def __post_init__(self):
        J0 = _as_matrix(self.J0)
        object.__setattr__(self, "J0", J0)
        if not np.allclose(J0.conj().T, -J0, atol=1e-14):
            raise ValueError("J0 must be anti-selfadjoint")
        if abs(np.linalg.det(J0)) < 1e-14:
            raise NotEllipticError("not elliptic in normal direction: J0 is singular")
        a, b = self.interval
        if not b > a:
            raise ValueError("interval must satisfy a < b")

    @property
    def rank(self) -> int:
        return self.J0.shape[0]

    def potential(self, theta: float) -> np.ndarray:
        if self.V is None:
            return np.zeros_like(self.J0)
        return _as_matrix(self.V(theta))

    def apply(self, u: Callable, du: Callable, theta: np.ndarray) -> np.ndarray:
        """(P u)(theta) for vector fields u with derivative du, shape (len, rank)."""
        vals = np.array([u(t) for t in theta], dtype=complex)
        dvals = np.array([du(t) for t in theta], dtype=complex)
        out = dvals @ self.J0.T
        if self.V is not None:
            out += np.array([self.potential(t) @ v for t, v in zip(theta, vals)])
        return out


def example_1d() -> FirstOrderOp1D:
    """(0 d/dtheta; -d/dtheta 0) on the half circle [-pi/2, pi/2]."""
    return FirstOrderOp1D(J0=np.array([[0, 1], [-1, 0]]))


@dataclass(frozen=True)
class GreenMatrix:
    A: np.ndarray
    inward_normal_sign: int
    location: float | str | None = None

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A))


@dataclass(frozen=True)
class TraceCondition:
    S: np.ndarray

    def __post_init__(self):
        S = _as_matrix(self.S)
        object.__setattr__(self, "S", S)
        if not (np.allclose(S @ S, S, atol=1e-12) and np.allclose(S, S.conj().T, atol=1e-12)):
            raise ValueError("S must be an orthogonal projector")


def green_matrix_from_coefficient(C, inward_sign: int, location=None) -> GreenMatrix:
    """Green matrix of C d/dt + ... at a component where n*d/dt is inward."""
    C = _as_matrix(C)
    if inward_sign not in (1, -1):
        raise ValueError("inward_sign must be +1 or -1")
    if np.linalg.matrix_rank(C) < C.shape[0]:
        raise NotEllipticError("not elliptic in normal direction")
    return GreenMatrix(-inward_sign * C, inward_sign, location)


def green_matrix(op, component=None) -> GreenMatrix:
    """Green matrix of a 1D operator at an endpoint, or of the Dirac operator.

    ``op`` is a :class:`FirstOrderOp1D` with ``component`` one of the
    interval endpoints (or ``"left"``/``"right"``), or a :class:`GammaSet`
    for the Dirac operator i sum gamma_j d_j, with ``component`` an optional
    inward normal sign.
    """
    if isinstance(op, GammaSet):
        sign = 1 if component is None else int(component)
        # i gamma_d d_normal = C d_normal with inward orientation
        return green_matrix_from_coefficient(1j * sign * op.gammas[-1], 1, location="dirac")
    a, b = op.interval
    if component in ("left", a) or (isinstance(component, float) and np.isclose(component, a)):
        return green_matrix_from_coefficient(op.J0, 1, a)
    if component in ("right", b) or (isinstance(component, float) and np.isclose(component, b)):
        return green_matrix_from_coefficient(op.J0, -1, b)
    raise ValueError(f"{component!r} is not a boundary point of {op.interval}")


@dataclass
class SelfAdjointVerdict:
    verdict: bool
    residuals: tuple[float, float]
    components: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "residuals": list(self.residuals),
            "components": self.components,
        }


def check_selfadjoint(
    A: GreenMatrix | Sequence[GreenMatrix],
    T: TraceCondition | Sequence[TraceCondition],
    tol: float = DEFAULT_TOL,
) -> SelfAdjointVerdict:
    """Criterion (1-S) A (1-S) = 0 and S A^-1 S = 0, per boundary component."""
    As = [A] if isinstance(A, GreenMatrix) else list(A)
    Ts = [T] if isinstance(T, TraceCondition) else list(T)
    if len(Ts) == 1 and len(As) > 1:
        Ts = Ts * len(As)
    if len(As) != len(Ts):
        raise ValueError("one trace condition per boundary component is required")
    comps = []
    for g, t in zip(As, Ts):
        if g.A.shape != t.S.shape:
            raise ValueError(f"shape mismatch: A {g.A.shape} vs S {t.S.shape}")
        if np.linalg.cond(g.A) > 1e12:
            raise np.linalg.LinAlgError("Green matrix is singular; criterion undefined")
        one = np.eye(g.A.shape[0])
        r1 = float(np.linalg.norm((one - t.S) @ g.A @ (one - t.S), 2))
        r2 = float(np.linalg.norm(t.S @ np.linalg.inv(g.A) @ t.S, 2))
        comps.append(
            {"location": g.location, "r1": r1, "r2": r2, "verdict": max(r1, r2) < tol}
        )
    r1 = max(c["r1"] for c in comps)
    r2 = max(c["r2"] for c in comps)
    return SelfAdjointVerdict(all(c["verdict"] for c in comps), (r1, r2), comps)


def chiral_trace_condition(g: GammaSet, normal_sign: int = 1) -> TraceCondition:
    return TraceCondition(build_chirality(g, normal_sign).S)


# -- Green formula -----------------------------------------------------------


def _quadrature(n: int, a: float, b: float, rule: str):
    if rule == "trapezoid":
        x = np.linspace(a, b, n)
        w = np.full(n, (b - a) / (n - 1))
        w[[0, -1]] /= 2
        return x, w
    if rule == "gauss":
        t, w = np.polynomial.legendre.leggauss(n)
        return 0.5 * (b - a) * t + 0.5 * (a + b), 0.5 * (b - a) * w
    raise ValueError(f"unknown quadrature rule {rule!r}")


def green_formula_residual(
    op,
    u: Callable,
    du: Callable,
    v: Callable,
    dv: Callable,
    n_points: int = 10_000,
    rule: str = "trapezoid",
) -> float:
    """|(Pu, v) - (u, Pv) - sum_N (A u, v)| by quadrature.

    ``op`` is a :class:`FirstOrderOp1D` or anything with an ``operator``
    attribute holding one (a discrete realization).  Inner products are
    (u, v) = int u . conj(v).
    """
    op = getattr(op, "operator", op)
    a, b = op.interval
    x, w = _quadrature(n_points, a, b, rule)
    Pu = op.apply(u, du, x)
    Pv = op.apply(v, dv, x)
    uu = np.array([u(t) for t in x], dtype=complex)
    vv = np.array([v(t) for t in x], dtype=complex)
    lhs = np.sum(w * np.sum(Pu * vv.conj(), axis=1)) - np.sum(w * np.sum(uu * Pv.conj(), axis=1))
    boundary = 0.0
    for point in (a, b):
        A = green_matrix(op, point).A
        boundary += np.vdot(np.asarray(v(point), dtype=complex), A @ np.asarray(u(point), dtype=complex))
    return float(abs(lhs - boundary))


# -- the 1D example: algebra and smooth domain --------------------------------


@dataclass(frozen=True)
class TrigPoly:
    """sum_m c_m exp(i m theta) for |m| <= M; ``coeffs[m + M]`` holds c_m."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        if c.ndim != 1 or len(c) % 2 == 0:
            raise ValueError("coefficient array must have odd length 2M+1")
        object.__setattr__(self, "coeffs", c)

    @property
    def M(self) -> int:
        return (len(self.coeffs) - 1) // 2

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    @classmethod
    def from_dict(cls, terms: dict[int, complex]) -> "TrigPoly":
        M = max((abs(int(m)) for m in terms), default=0)
        c = np.zeros(2 * M + 1, dtype=complex)
        for m, val in terms.items():
            c[int(m) + M] += val
        return cls(c)

    @classmethod
    def constant(cls, value: complex = 1.0) -> "TrigPoly":
        return cls([value])

    @classmethod
    def sin(cls, n: int = 1) -> "TrigPoly":
        return cls.from_dict({n: -0.5j, -n: 0.5j})

    @classmethod
    def cos(cls, n: int = 1) -> "TrigPoly":
        return cls.from_dict({n: 0.5, -n: 0.5})

    def _padded(self, M: int) -> np.ndarray:
        return np.pad(self.coeffs, M - self.M)

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        M = max(self.M, other.M)
        return TrigPoly(self._padded(M) + other._padded(M))

    def __mul__(self, other):
        if isinstance(other, TrigPoly):
            return TrigPoly(np.convolve(self.coeffs, other.coeffs))
        return TrigPoly(self.coeffs * other)

    __rmul__ = __mul__

    def conj(self) -> "TrigPoly":
        return TrigPoly(np.conj(self.coeffs[::-1]))

    def derivative_at(self, theta, order: int = 0):
        """Exact p-th derivative from the coefficients."""
        theta = np.asarray(theta, dtype=float)
        m = self.freqs
        factor = (1j * m) ** order * self.coeffs
        return np.exp(1j * np.multiply.outer(theta, m)) @ factor

    def __call__(self, theta):
        return self.derivative_at(theta, 0)

    def derivative_scale(self, order: int) -> float:
        return float(np.sum(np.abs(self.coeffs) * np.abs(self.freqs).astype(float) ** order))


@dataclass(frozen=True)
class MembershipResult:
    member: bool
    first_violation: tuple[int, float] | None = None
    component: int | None = None

    def __bool__(self) -> bool:
        return self.member


HALF_CIRCLE = (-np.pi / 2, np.pi / 2)


def _first_nonvanishing(poly: TrigPoly, orders, points, rtol: float):
    for k, p in orders:
        scale = max(poly.derivative_scale(p), 1.0)
        for x in points:
            if abs(poly.derivative_at(x, p)) > rtol * scale:
                return k, float(x)
    return None


def algebra_membership_1d(
    a: TrigPoly, max_degree: int | None = None, rtol: float = 1e-12
) -> MembershipResult:
    """a belongs to the algebra iff all odd derivatives vanish at +-pi/2.

    For a trig polynomial of degree M the conditions with k = 0..M already
    force all higher ones (Vandermonde system in m**2).
    """
    M = a.M if max_degree is None else max(max_degree, a.M)
    orders = [(k, 2 * k + 1) for k in range(M + 1)]
    # odd derivatives of conj(a) are the conjugates of those of a
    hit = _first_nonvanishing(a, orders, HALF_CIRCLE, rtol)
    if hit is not None:
        return MembershipResult(False, hit)
    return MembershipResult(True)


def smooth_domain_membership_1d(
    psi: tuple[TrigPoly, TrigPoly], max_degree: int | None = None, rtol: float = 1e-12
) -> MembershipResult:
    """Even derivatives of psi_1 and odd derivatives of psi_2 vanish at +-pi/2."""
    p1, p2 = psi
    M = max(p1.M, p2.M) if max_degree is None else max_degree
    hit = _first_nonvanishing(p1, [(k, 2 * k) for k in range(M + 1)], HALF_CIRCLE, rtol)
    if hit is not None:
        return MembershipResult(False, hit, component=1)
    hit = _first_nonvanishing(p2, [(k, 2 * k + 1) for k in range(M + 1)], HALF_CIRCLE, rtol)
    if hit is not None:
        return MembershipResult(False, hit, component=2)
    return MembershipResult(True)
