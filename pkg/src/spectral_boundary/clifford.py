"""Clifford representations in even dimension, boundary chirality and conjugation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)

MAX_DIM = 8


def _anticommutator(a, b):
    return a @ b + b @ a


def _commutator(a, b):
    return a @ b - b @ a


def _norm(a) -> float:
    return float(np.linalg.norm(a, 2)) if a.size else 0.0


@dataclass(frozen=True)
class GammaSet:
    """d anticommuting selfadjoint unitaries of size 2**(d/2)."""

    d: int
    gammas: tuple[np.ndarray, ...]

    @property
    def size(self) -> int:
        return self.gammas[0].shape[0]

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.size, dtype=complex)

    def relation_residual(self) -> float:
        """Largest violation of gamma_i gamma_j + gamma_j gamma_i = 2 delta_ij."""
        eye = self.identity
        worst = 0.0
        for i, gi in enumerate(self.gammas):
            for j in range(i, self.d):
                target = 2 * eye if i == j else 0 * eye
                worst = max(worst, _norm(_anticommutator(gi, self.gammas[j]) - target))
        return worst

    def hermiticity_residual(self) -> float:
        return max(_norm(g - g.conj().T) for g in self.gammas)

    def unitarity_residual(self) -> float:
        return max(_norm(g @ g.conj().T - self.identity) for g in self.gammas)


def build_gamma(d: int) -> GammaSet:
    """Fixed tensor-product representation of Cl(d), d even.

    d=2 gives (sigma1, sigma2); each step d -> d+2 maps the old generators
    to sigma1 (x) g and appends sigma2 (x) 1, sigma3 (x) 1.  All entries lie in
    {0, +-1, +-i}, and each generator is either real or purely imaginary.
    """
    if not isinstance(d, (int, np.integer)) or isinstance(d, bool):
        raise TypeError(f"dimension must be an integer, got {d!r}")
    if d % 2 or not 2 <= d <= MAX_DIM:
        raise ValueError(f"dimension must be even with 2 <= d <= {MAX_DIM}, got {d}")
    gam = [SIGMA1, SIGMA2]
    while len(gam) < d:
        eye = np.eye(gam[0].shape[0], dtype=complex)
        gam = [np.kron(SIGMA1, g) for g in gam] + [np.kron(SIGMA2, eye), np.kron(SIGMA3, eye)]
    for g in gam:
        g.setflags(write=False)
    return GammaSet(int(d), tuple(gam))


@dataclass(frozen=True)
class ChiralData:
    chi: np.ndarray
    chi_volume: np.ndarray
    pi_plus: np.ndarray
    pi_minus: np.ndarray
    normal: np.ndarray

    @property
    def S(self) -> np.ndarray:
        return self.pi_minus

    def residuals(self, g: GammaSet) -> dict[str, float]:
        eye = g.identity
        chi, vol = self.chi, self.chi_volume
        res = {
            "chi_selfadjoint": _norm(chi - chi.conj().T),
            "chi_involution": _norm(chi @ chi - eye),
            "chi_anticommutes_normal": _norm(_anticommutator(chi, self.normal)),
            "chi_commutes_tangential": max(
                [_norm(_commutator(chi, gn)) for gn in g.gammas[:-1]], default=0.0
            ),
            "projectors_idempotent": max(
                _norm(self.pi_plus @ self.pi_plus - self.pi_plus),
                _norm(self.pi_minus @ self.pi_minus - self.pi_minus),
            ),
            "projectors_selfadjoint": max(
                _norm(self.pi_plus - self.pi_plus.conj().T),
                _norm(self.pi_minus - self.pi_minus.conj().T),
            ),
            "projectors_sum": _norm(self.pi_plus + self.pi_minus - eye),
            "volume_selfadjoint": _norm(vol - vol.conj().T),
            "volume_involution": _norm(vol @ vol - eye),
            "volume_anticommutes": max(_norm(_anticommutator(vol, gi)) for gi in g.gammas),
        }
        return res


def build_chirality(g: GammaSet, normal_sign: int = 1) -> ChiralData:
    """Boundary chirality chi = (-i)^(d/2+1) gamma_1 ... gamma_{d-1}.

    ``normal_sign`` selects the inward normal gamma as ``normal_sign * gamma_d``;
    it enters the volume chirality i chi gamma_d but not chi itself.
    """
    if normal_sign not in (1, -1):
        raise ValueError("normal_sign must be +1 or -1")
    d = g.d
    chi = (-1j) ** (d // 2 + 1) * g.identity
    for gn in g.gammas[:-1]:
        chi = chi @ gn
    normal = normal_sign * g.gammas[-1]
    eye = g.identity
    return ChiralData(
        chi=chi,
        chi_volume=1j * chi @ normal,
        pi_plus=(eye + chi) / 2,
        pi_minus=(eye - chi) / 2,
        normal=normal,
    )


@dataclass(frozen=True)
class ConjugationOp:
    """Antilinear map v -> U conj(v)."""

    U: np.ndarray
    epsilon: int = 1
    epsilon_prime: int = 1
    antilinear: bool = field(default=True, init=False)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.U @ np.conj(v)

    def conjugate(self, op: np.ndarray) -> np.ndarray:
        """Matrix of J op J^-1 (a linear operator)."""
        return self.U @ np.conj(op) @ np.linalg.inv(self.U)

    def compose_right(self, linear: np.ndarray) -> "ConjugationOp":
        """J o L, again antilinear with matrix U conj(L)."""
        return ConjugationOp(self.U @ np.conj(linear), self.epsilon, self.epsilon_prime)


@dataclass(frozen=True)
class Conjugations:
    J: ConjugationOp
    J_tilde: ConjugationOp
    chiral: ChiralData

    @property
    def d(self) -> int:
        return int(np.log2(self.J.U.shape[0])) * 2

    @property
    def J_prime(self) -> ConjugationOp:
        """J for d/2 even, J chi_volume for d/2 odd."""
        return self.J if (self.d // 2) % 2 == 0 else self.J_tilde

    def residuals(self, g: GammaSet) -> dict[str, float]:
        J, chi = self.J, self.chiral
        U = J.U
        eye = g.identity
        jp = self.J_prime
        S = chi.S
        return {
            "J_unitary": _norm(U @ U.conj().T - eye),
            "J_anticommutes_gamma": max(_norm(J.conjugate(gi) + gi) for gi in g.gammas),
            "J_volume_sign": _norm(
                J.conjugate(chi.chi_volume) - J.epsilon_prime * chi.chi_volume
            ),
            "Jprime_commutes_S": _norm(jp.conjugate(S) - S),
        }


def _normalize_phase(U: np.ndarray) -> np.ndarray:
    flat = U.ravel()
    first = flat[np.flatnonzero(np.abs(flat) > 1e-12)[0]]
    return U * (abs(first) / first)


def build_conjugation(g: GammaSet, tol: float = 1e-12) -> Conjugations:
    """Conjugation J with J gamma_i J^-1 = -gamma_i, plus J~ = J chi_volume.

    U is the product of the purely imaginary generators when their number is
    odd, and of the real ones otherwise; one of the two always works.
    """
    real = [gi for gi in g.gammas if np.allclose(gi.imag, 0)]
    imag = [gi for gi in g.gammas if np.allclose(gi.real, 0)]
    if len(real) + len(imag) != g.d:
        raise ValueError("generators must be real or purely imaginary")
    factors = imag if len(imag) % 2 else real
    U = g.identity
    for f in factors:
        U = U @ f
    U = _normalize_phase(U)
    d = g.d
    eps_prime = 1 if (d // 2) % 2 == 0 else -1
    J = ConjugationOp(U, epsilon=1, epsilon_prime=eps_prime)
    bad = max(_norm(J.conjugate(gi) + gi) for gi in g.gammas)
    if bad > tol:
        raise ArithmeticError(f"no conjugation found for this representation (residual {bad:.2e})")
    chi = build_chirality(g)
    # J chi_vol J^-1 = conj(c)/c chi_vol with c = (-i)^(d/2)
    measured = J.conjugate(chi.chi_volume)
    if _norm(measured - eps_prime * chi.chi_volume) > tol:
        raise ArithmeticError("volume chirality sign does not match (-1)^(d/2)")
    # J~ anticommutes with D and flips the sign relation with chi
    J_tilde = ConjugationOp(U @ np.conj(chi.chi_volume), epsilon=-1, epsilon_prime=eps_prime)
    return Conjugations(J=J, J_tilde=J_tilde, chiral=chi)


def check(d: int) -> dict[str, float]:
    """All relation residuals for the fixed representation in dimension d."""
    g = build_gamma(d)
    chi = build_chirality(g)
    conj = build_conjugation(g)
    out = {
        "gamma_relations": g.relation_residual(),
        "gamma_selfadjoint": g.hermiticity_residual(),
        "gamma_unitary": g.unitarity_residual(),
    }
    out.update(chi.residuals(g))
    out.update(conj.residuals(g))
    return out
