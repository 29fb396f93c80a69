"""Exactly Hermitian discretizations of first-order boundary problems.

Two models are provided.

``example1d``
    P = (0 d/dtheta; -d/dtheta 0) on [-pi/2, pi/2] with psi_1 = 0 at both
    ends.  Exact spectrum: the integers, each simple.

``halftorus``
    D = -i(gamma_1 d/dphi + gamma_2 d/dx) on [0, L] x S^1 with the chiral
    condition Pi_- psi = 0 at x = 0, L.  After Fourier transform in phi each
    mode is D_k = -i gamma_2 d/dx + k gamma_1.

Both are assembled on a staggered grid: the component killed by the
boundary condition lives on the N interior nodes, the free component on the
N+1 half nodes, and the derivative across the stagger is a two-point
difference ``D`` whose transpose is (minus) the derivative the other way.
The block matrices are therefore real symmetric by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .boundary_system import (
    FirstOrderOp1D,
    GreenMatrix,
    TraceCondition,
    TrigPoly,
    example_1d,
    green_matrix_from_coefficient,
)
from .clifford import GammaSet, build_chirality, build_gamma

MIN_GRID = 8


@dataclass(frozen=True)
class Grid1D:
    N: int
    a: float
    b: float

    def __post_init__(self):
        if self.N < MIN_GRID:
            raise ValueError(f"grid needs N >= {MIN_GRID} interior points, got {self.N}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.N + 1)

    @property
    def nodes(self) -> np.ndarray:
        """Interior nodes a + j h, j = 1..N."""
        return self.a + self.h * np.arange(1, self.N + 1)

    @property
    def half_nodes(self) -> np.ndarray:
        """Staggered points a + (j + 1/2) h, j = 0..N."""
        return self.a + self.h * (np.arange(self.N + 1) + 0.5)

    def to_dict(self) -> dict:
        return {"N": self.N, "a": self.a, "b": self.b, "h": self.h, "stagger": "nodes/half-nodes"}


def staggered_difference(grid: Grid1D) -> np.ndarray:
    """N x (N+1) matrix of (f[j+1/2] - f[j-1/2]) / h at the interior nodes."""
    N = grid.N
    D = np.zeros((N, N + 1))
    idx = np.arange(N)
    D[idx, idx + 1] = 1.0
    D[idx, idx] = -1.0
    return D / grid.h


@dataclass
class Block:
    """One field component of a realization: its rows and sample points."""

    name: str
    rows: slice
    points: np.ndarray | None
    dirichlet: bool  # boundary values eliminated (identically zero)


@dataclass
class DiscreteRealization:
    H: np.ndarray
    model: str
    backend: str
    grid: Grid1D
    bc: str
    blocks: list[Block]
    fiber_basis: np.ndarray
    operator: FirstOrderOp1D | None = None
    mode: int = 0
    trace_conditions: tuple[TraceCondition, TraceCondition] | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.array_equal(self.H, self.H.conj().T):
            raise AssertionError("assembled matrix is not exactly Hermitian")

    @property
    def size(self) -> int:
        return self.H.shape[0]

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def boundary_trace(self, vec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Fiber values at the left and right endpoints, in the original basis."""
        left, right = [], []
        for b in self.blocks:
            if b.dirichlet:
                left.append(0.0)
                right.append(0.0)
            elif self.backend == "basis":
                vals = self.extra["trace_rows"][b.name] @ vec[b.rows]
                left.append(vals[0])
                right.append(vals[1])
            else:
                f = vec[b.rows]
                left.append(1.5 * f[0] - 0.5 * f[1])
                right.append(1.5 * f[-1] - 0.5 * f[-2])
        Q = self.fiber_basis
        return Q @ np.array(left, dtype=complex), Q @ np.array(right, dtype=complex)

    def boundary_violation(self, vec: np.ndarray) -> float:
        """max ||S psi(boundary)|| / ||psi|| over both components."""
        if self.trace_conditions is None:
            raise ValueError("realization carries no trace condition")
        left, right = self.boundary_trace(vec)
        nrm = np.linalg.norm(vec)
        worst = max(
            np.linalg.norm(t.S @ val) for t, val in zip(self.trace_conditions, (left, right))
        )
        return float(worst / nrm)

    def metadata(self) -> dict:
        return {
            "model": self.model,
            "backend": self.backend,
            "bc": self.bc,
            "mode": self.mode,
            "size": self.size,
            "grid": self.grid.to_dict(),
            "blocks": {b.name: [b.rows.start, b.rows.stop] for b in self.blocks},
        }


# -- 1D example ---------------------------------------------------------------

EXAMPLE_S = np.diag([1.0, 0.0])


def _example_trace_conditions():
    t = TraceCondition(EXAMPLE_S)
    return (t, t)


def discretize_1d_example(N: int, backend: str = "fd") -> DiscreteRealization:
    """Realization of the half-circle example with psi_1(+-pi/2) = 0.

    ``fd``: psi_1 on interior nodes, psi_2 on half nodes, size 2N+1.
    ``basis``: Galerkin with psi_1 in span sin(n s), n=1..N, psi_2 in
    span cos(n s), n=0..N (s = theta + pi/2), size 2N+1.
    """
    op = example_1d()
    grid = Grid1D(N, *op.interval)
    if backend == "fd":
        D = staggered_difference(grid)
        H = np.block([[np.zeros((N, N)), D], [D.T, np.zeros((N + 1, N + 1))]])
        blocks = [
            Block("psi1", slice(0, N), grid.nodes, dirichlet=True),
            Block("psi2", slice(N, 2 * N + 1), grid.half_nodes, dirichlet=False),
        ]
        extra = {}
    elif backend == "basis":
        H, extra = _galerkin_1d(N, op.interval)
        blocks = [
            Block("psi1", slice(0, N), None, dirichlet=False),
            Block("psi2", slice(N, 2 * N + 1), None, dirichlet=False),
        ]
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return DiscreteRealization(
        H=H,
        model="example1d",
        backend=backend,
        grid=grid,
        bc="psi1=0",
        blocks=blocks,
        fiber_basis=np.eye(2),
        operator=op,
        trace_conditions=_example_trace_conditions(),
        extra=extra,
    )


def _basis_functions(M: int, interval):
    a, b = interval
    L = b - a
    n1 = np.arange(1, M + 1)
    n2 = np.arange(0, M + 1)
    norm2 = np.where(n2 == 0, np.sqrt(1 / L), np.sqrt(2 / L))

    def phi(x, deriv=0):
        s = np.multiply.outer(x - a, n1 * np.pi / L)
        k = n1 * np.pi / L
        vals = np.sin(s) if deriv == 0 else k * np.cos(s)
        return np.sqrt(2 / L) * vals

    def chi(x, deriv=0):
        s = np.multiply.outer(x - a, n2 * np.pi / L)
        k = n2 * np.pi / L
        vals = np.cos(s) if deriv == 0 else -k * np.sin(s)
        return norm2 * vals

    return phi, chi


def _galerkin_quadrature(M: int, interval):
    a, b = interval
    t, w = np.polynomial.legendre.leggauss(2 * M + 16)
    x = 0.5 * (b - a) * t + 0.5 * (a + b)
    return x, 0.5 * (b - a) * w


def _galerkin_1d(M: int, interval):
    phi, chi = _basis_functions(M, interval)
    x, w = _galerkin_quadrature(M, interval)
    # row psi1: psi2'; row psi2: -psi1'
    B = phi(x).T @ (w[:, None] * chi(x, 1))
    C = -(chi(x).T @ (w[:, None] * phi(x, 1)))
    if not np.allclose(B.T, C, atol=1e-10):
        raise AssertionError("Galerkin blocks are not adjoint to each other")
    N1, N2 = B.shape
    H = np.block([[np.zeros((N1, N1)), B], [B.T, np.zeros((N2, N2))]])
    a, b = interval
    ends = np.array([a, b])
    extra = {"trace_rows": {"psi1": phi(ends), "psi2": chi(ends)}, "basis": (phi, chi)}
    return H, extra


# -- half torus ---------------------------------------------------------------


def _chiral_rotation(g: GammaSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orthonormal fiber basis [Pi_+ range | Pi_- range] and the two projectors."""
    chi = build_chirality(g)
    w, V = np.linalg.eigh(chi.chi)
    order = np.argsort(-w)  # +1 eigenvectors first
    Q = V[:, order]
    # real representative when possible (d = 2: chi = -sigma_1)
    if np.allclose(Q.imag, 0):
        Q = Q.real
    return Q, chi.pi_plus, chi.pi_minus


@dataclass
class HalfTorusModel:
    N: int
    K: int
    L: float
    gammas: GammaSet
    grid: Grid1D
    fiber_basis: np.ndarray
    realizations: dict[int, DiscreteRealization]
    green: tuple[GreenMatrix, GreenMatrix]
    trace_conditions: tuple[TraceCondition, TraceCondition]

    @property
    def modes(self) -> list[int]:
        return list(range(-self.K, self.K + 1))

    @property
    def block_size(self) -> int:
        return 2 * self.N + 1

    @property
    def size(self) -> int:
        return (2 * self.K + 1) * self.block_size

    def mode_slice(self, k: int) -> slice:
        i = k + self.K
        return slice(i * self.block_size, (i + 1) * self.block_size)

    def full_operator(self) -> sp.csr_matrix:
        """Block-diagonal sparse H over all tangential modes."""
        return sp.block_diag([sp.csr_matrix(self.realizations[k].H) for k in self.modes], format="csr")

    def lift_fiber(self, F: np.ndarray) -> np.ndarray:
        """Fiber matrix F (original basis) as an operator on one mode block.

        F must not couple the nodal and half-node components.
        """
        Fr = self.fiber_basis.conj().T @ F @ self.fiber_basis
        if abs(Fr[0, 1]) > 1e-12 or abs(Fr[1, 0]) > 1e-12:
            raise ValueError("fiber matrix couples the staggered components")
        N = self.N
        return np.diag(np.concatenate([np.full(N + 1, Fr[0, 0]), np.full(N, Fr[1, 1])]))

    def metadata(self) -> dict:
        return {
            "model": "halftorus",
            "N": self.N,
            "K": self.K,
            "L": self.L,
            "block_size": self.block_size,
            "grid": self.grid.to_dict(),
            "fiber_basis": np.asarray(self.fiber_basis).real.tolist(),
        }


def discretize_half_torus(N: int = 256, K: int = 64, L: float = np.pi) -> HalfTorusModel:
    """Per-mode realizations D_k = -i gamma_2 d/dx + k gamma_1 with chiral BC.

    In the fiber basis (e_+, e_-) of chi eigenvectors, with u along e_+ on
    the half nodes and w along e_- on the nodes (w = 0 at both ends),
    D_k(u, w) = (-w' - k u, u' + k w).
    """
    if N < 16:
        raise ValueError(f"half-torus needs N >= 16, got {N}")
    if K < 4:
        raise ValueError(f"half-torus needs K >= 4, got {K}")
    if not L > 0:
        raise ValueError("interval length must be positive")
    g = build_gamma(2)
    grid = Grid1D(N, 0.0, float(L))
    Q, pi_plus, pi_minus = _chiral_rotation(g)
    normal = -1j * g.gammas[1]
    rot_normal = Q.conj().T @ normal @ Q
    rot_tangential = Q.conj().T @ g.gammas[0] @ Q
    # normal coefficient is [[0,-1],[1,0]] and gamma_1 is diag(-1, 1) in this basis
    if not (np.allclose(rot_normal, [[0, -1], [1, 0]]) and np.allclose(rot_tangential, np.diag([-1, 1]))):
        raise AssertionError("unexpected chiral fiber basis")
    D = staggered_difference(grid)
    Dt = D.T
    nu = N + 1
    trace = (TraceCondition(pi_minus), TraceCondition(pi_minus))
    reals = {}
    for k in range(-K, K + 1):
        H = np.block([[-k * np.eye(nu), Dt], [D, k * np.eye(N)]])
        reals[k] = DiscreteRealization(
            H=H,
            model="halftorus",
            backend="fd",
            grid=grid,
            bc="chiral",
            blocks=[
                Block("u", slice(0, nu), grid.half_nodes, dirichlet=False),
                Block("w", slice(nu, nu + N), grid.nodes, dirichlet=True),
            ],
            fiber_basis=Q,
            mode=k,
            trace_conditions=trace,
        )
    green = (
        green_matrix_from_coefficient(normal, 1, location=0.0),
        green_matrix_from_coefficient(normal, -1, location=float(L)),
    )
    return HalfTorusModel(N, K, float(L), g, grid, Q, reals, green, trace)


# -- tangential operator ------------------------------------------------------


@dataclass
class TangentialOperator:
    matrix: np.ndarray
    modes: list[int]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def tangential_operator(m: HalfTorusModel) -> TangentialOperator:
    """Boundary operator I_0 A_0 from D = I_0 (d/dx + A_0) on the mode basis."""
    g = m.gammas
    I0 = -1j * g.gammas[1]
    I0_inv = np.linalg.inv(I0)
    blocks = []
    for k in m.modes:
        # tangential part of D on e^{ik phi}: -i gamma_1 (ik) = k gamma_1
        A0 = I0_inv @ (k * g.gammas[0])
        blocks.append(I0 @ A0)
    mat = np.zeros((2 * len(blocks), 2 * len(blocks)), dtype=complex)
    for i, b in enumerate(blocks):
        mat[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = b
    return TangentialOperator(mat, m.modes)


# -- multiplication operators -------------------------------------------------


@dataclass(frozen=True)
class TangentialFunction:
    """f(x, phi) = radial(x) * sum_m c_m exp(i m phi)."""

    coeffs: TrigPoly
    radial: Callable[[np.ndarray], np.ndarray] | None = None

    @classmethod
    def from_dict(cls, terms: dict[int, complex], radial=None) -> "TangentialFunction":
        return cls(TrigPoly.from_dict(terms), radial)

    def __call__(self, x, phi):
        r = 1.0 if self.radial is None else self.radial(np.asarray(x))
        return r * self.coeffs(phi)


def _sample_blocks(R: DiscreteRealization, f: Callable) -> np.ndarray:
    vals = []
    for b in R.blocks:
        vals.append(np.asarray(f(b.points), dtype=complex) * np.ones(len(b.points)))
    return np.concatenate(vals)


def multiplication_operator(f, m) -> np.ndarray | sp.csr_matrix:
    """Left multiplication by f on a realization or on the half-torus model.

    On a 1D realization ``f`` is a callable or :class:`TrigPoly` of theta;
    the fd backend samples it at each block's points, the basis backend
    uses Galerkin projection.  On a :class:`HalfTorusModel` ``f`` is a
    :class:`TangentialFunction`; the Fourier coefficient c_m maps mode k to
    mode k + m, truncated to |k| <= K.
    """
    if isinstance(m, HalfTorusModel):
        if not isinstance(f, TangentialFunction):
            f = TangentialFunction(TrigPoly.constant(1.0), f)
        diag = np.ones(m.block_size, dtype=complex)
        if f.radial is not None:
            R0 = m.realizations[0]
            diag = _sample_blocks(R0, f.radial)
        c = f.coeffs
        nm = 2 * m.K + 1
        shift = sp.lil_matrix((nm, nm), dtype=complex)
        for j, cm in zip(c.freqs, c.coeffs):
            if cm == 0 or abs(j) >= nm:
                continue
            shift += sp.eye(nm, k=-int(j), dtype=complex, format="lil") * cm
        return sp.kron(shift.tocsr(), sp.diags(diag), format="csr")
    R = m
    if R.backend == "basis":
        phi, chi = R.extra["basis"]
        x, w = _galerkin_quadrature(R.grid.N, R.operator.interval)
        fx = np.asarray(f(x), dtype=complex) * np.ones_like(x)
        Bs = [phi(x), chi(x)]
        blocks = [B.T @ ((w * fx)[:, None] * B) for B in Bs]
        out = np.zeros((R.size, R.size), dtype=complex)
        for b, M in zip(R.blocks, blocks):
            out[b.rows, b.rows] = M
        return out
    return np.diag(_sample_blocks(R, f))


def chirality_volume_operator(m: HalfTorusModel, radial: Callable) -> sp.csr_matrix:
    """radial(x) * chi_volume on every mode, for the d = 2 model.

    chi_volume swaps the staggered components, so it is discretized with
    the averaging map from half nodes to nodes (and its transpose).
    """
    chi_vol = build_chirality(m.gammas).chi_volume
    Fr = m.fiber_basis.conj().T @ chi_vol @ m.fiber_basis
    if not (np.allclose(np.diag(Fr), 0) and np.allclose(Fr, Fr.T.conj())):
        raise AssertionError("expected an off-diagonal volume chirality")
    N = m.N
    avg = np.zeros((N, N + 1))
    idx = np.arange(N)
    avg[idx, idx] = avg[idx, idx + 1] = 0.5
    r = np.asarray(radial(m.grid.nodes), dtype=float) * np.ones(N)
    C = np.diag(r) @ avg * Fr[1, 0].real
    block = np.block([[np.zeros((N + 1, N + 1)), C.T], [C, np.zeros((N, N))]])
    return sp.kron(sp.eye(2 * m.K + 1), sp.csr_matrix(block), format="csr")
