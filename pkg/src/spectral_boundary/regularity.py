"""Iterated commutator probes delta_1(T) = [H^2, T] (1 + H^2)^(-1/2).

Functions in the algebra of the realization should give norms that stay
bounded under grid refinement; functions violating the boundary parity
rules produce boundary-layer terms whose norm grows with N.  The growth
exponent is the slope of log ||delta_1^k(a)|| against log N.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .boundary_system import TrigPoly
from .discretization import DiscreteRealization, discretize_1d_example, multiplication_operator

MAX_ITERATES = 4
BOUNDED_BELOW = 0.1
GROWING_ABOVE = 0.4


class _Resolvent:
    """(1 + H^2)^(+-1/2) from one eigendecomposition."""

    def __init__(self, H: np.ndarray):
        w, V = np.linalg.eigh(H)
        self.H2 = H @ H
        s = np.sqrt(1.0 + w**2)
        self.inv_sqrt = (V / s) @ V.conj().T
        self.sqrt = (V * s) @ V.conj().T

    def delta1(self, T: np.ndarray) -> np.ndarray:
        return (self.H2 @ T - T @ self.H2) @ self.inv_sqrt


def delta1_iterate(a: np.ndarray, H: np.ndarray | DiscreteRealization, k_max: int = 2) -> list[float]:
    """Operator norms ||delta_1^k(a)|| for k = 0..k_max."""
    if k_max > MAX_ITERATES:
        raise ValueError(f"k_max > {MAX_ITERATES} is too expensive")
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    H = getattr(H, "H", H)
    if not np.allclose(H, H.conj().T, atol=0):
        raise ValueError("H must be Hermitian")
    res = _Resolvent(H)
    norms = []
    T = np.asarray(a)
    for k in range(k_max + 1):
        if k:
            T = res.delta1(T)
        norms.append(float(np.linalg.norm(T, 2)))
    return norms


def product_identity_residual(a: np.ndarray, b: np.ndarray, H: np.ndarray) -> float:
    """Relative defect of delta(ab) = delta(a) (1+H^2)^(1/2) b (1+H^2)^(-1/2) + a delta(b)."""
    res = _Resolvent(H)
    lhs = res.delta1(a @ b)
    rhs = res.delta1(a) @ res.sqrt @ b @ res.inv_sqrt + a @ res.delta1(b)
    return float(np.linalg.norm(lhs - rhs, 2) / max(np.linalg.norm(lhs, 2), 1.0))


def _classify(exponent: float) -> str:
    if exponent < BOUNDED_BELOW:
        return "bounded"
    if exponent > GROWING_ABOVE:
        return "growing"
    return "inconclusive"


@dataclass
class RegularityReport:
    function: str
    levels: list[int]
    norms: list[list[float]]  # norms[level][k]
    exponents: list[float]
    classes: list[str]
    thresholds: dict = field(
        default_factory=lambda: {"bounded_below": BOUNDED_BELOW, "growing_above": GROWING_ABOVE}
    )
    operator: str = "multiplication"

    def to_dict(self) -> dict:
        return {
            "function": self.function,
            "operator": self.operator,
            "levels": self.levels,
            "norms": self.norms,
            "exponents": self.exponents,
            "classification": self.classes,
            "thresholds": self.thresholds,
        }


FUNCTIONS: dict[str, TrigPoly] = {
    "sin": TrigPoly.sin(),
    "cos": TrigPoly.cos(),
    "const": TrigPoly.constant(1.0),
}


def regularity_trend(
    a: TrigPoly | Callable,
    levels: Sequence[int] = (64, 128, 256, 512),
    k_max: int = 2,
    name: str | None = None,
    differential: bool = False,
    realize: Callable[[int], DiscreteRealization] = discretize_1d_example,
) -> RegularityReport:
    """Run delta1_iterate over refinements and fit growth exponents per k.

    With ``differential=True`` the probed operator is da = [H, a] instead of a.
    """
    levels = sorted(int(n) for n in levels)
    if len(levels) < 3:
        raise ValueError("at least three refinement levels are required")
    table = []
    for N in levels:
        R = realize(N)
        T = multiplication_operator(a, R)
        if differential:
            T = R.H @ T - T @ R.H
        table.append(delta1_iterate(T, R.H, k_max))
    arr = np.array(table)
    logN = np.log(levels)
    exps, classes = [], []
    for k in range(k_max + 1):
        col = arr[:, k]
        if np.max(col) < 1e-12:
            e = 0.0
        else:
            e = float(np.polyfit(logN, np.log(np.maximum(col, 1e-300)), 1)[0])
        exps.append(e)
        classes.append(_classify(e))
    return RegularityReport(
        function=name or repr(a),
        levels=levels,
        norms=arr.tolist(),
        exponents=exps,
        classes=classes,
        operator="commutator" if differential else "multiplication",
    )
