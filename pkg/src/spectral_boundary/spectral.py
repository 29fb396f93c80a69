"""Spectra, zeta sums, residue fits, heat traces, spectral action, tadpoles.

Residues are read off cumulative sums.  If sum_n w_n |lambda_n|^-(sigma+s)
has a simple pole at s = 0 with residue r, the partial sums over
|lambda| <= Lambda grow like r log(Lambda) (plus power terms when the
series diverges faster).  Partial sums are sampled at the distinct |lambda|
values, counting half of each jump, and fitted by least squares on three
log-spaced windows; the spread of r across windows is the error bar.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy import integrate, special

from .boundary_system import TrigPoly, algebra_membership_1d
from .clifford import ConjugationOp
from .discretization import (
    DiscreteRealization,
    HalfTorusModel,
    TangentialFunction,
    multiplication_operator,
)

EPS = np.finfo(float).eps
THREADS_ENV = "SPECTRAL_BOUNDARY_THREADS"
DEFAULT_TRUST_RTOL = 1e-2
UNTRUSTED_SPREAD = 0.2
KERNEL_FACTOR = 1000
WINDOW_SLACK = 1e-9


class UntrustedRegionError(ValueError):
    """Requested cutoff lies outside the resolved part of the spectrum."""


class DegenerateFitError(ValueError):
    pass


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def parallel_map(fn: Callable, items: Sequence, threads: int | None = None) -> list:
    """Ordered map; eigensolvers release the GIL so threads scale."""
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- spectral data ------------------------------------------------------------


@dataclass
class SpectralData:
    """Eigenvalues sorted by |lambda|.

    ``eigenvectors[i]`` (when present) belongs to ``eigenvalues[i]`` for
    i < len(eigenvectors); for mode-decomposed models each vector lives in
    the block of ``modes[i]``.
    """

    eigenvalues: np.ndarray
    modes: np.ndarray
    kernel_tol: float
    trusted: float
    dimension: int
    eigenvectors: np.ndarray | None = None
    model: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def kernel_mask(self) -> np.ndarray:
        return np.abs(self.eigenvalues) < self.kernel_tol

    @property
    def kernel_dim(self) -> int:
        return int(self.kernel_mask.sum())

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.eigenvalues)

    def window_mask(self, cutoff: float | None = None) -> np.ndarray:
        """Nonzero eigenvalues with |lambda| <= cutoff (default: trusted window).

        A small relative slack keeps +-lambda partners that straddle the
        cutoff by roundoff on the same side of it.
        """
        cutoff = self.trusted if cutoff is None else cutoff
        return (~self.kernel_mask) & (self.abs <= cutoff * (1 + WINDOW_SLACK))

    @property
    def n_vectors(self) -> int:
        return 0 if self.eigenvectors is None else len(self.eigenvectors)

    def summary(self) -> dict:
        return {
            "model": self.model,
            "count": int(len(self.eigenvalues)),
            "kernel_dim": self.kernel_dim,
            "kernel_tol": self.kernel_tol,
            "trusted_window": self.trusted,
            "dimension": self.dimension,
            **self.meta,
        }


def _order(eigs: np.ndarray, modes: np.ndarray) -> np.ndarray:
    return np.lexsort((modes, eigs, np.abs(eigs)))


def trusted_window(R: DiscreteRealization | HalfTorusModel, rtol: float = DEFAULT_TRUST_RTOL) -> float:
    """Largest |lambda| whose discretization error is below ``rtol`` (relative).

    The staggered stencil turns an exact radial frequency n into
    (2/h) sin(nh/2), i.e. a relative error of (nh)^2/24.
    """
    if isinstance(R, HalfTorusModel):
        return float(min(R.K / 2, math.sqrt(24 * rtol) / R.grid.h))
    if R.backend == "basis":
        return float(R.grid.N / 2)
    return float(math.sqrt(24 * rtol) / R.grid.h)


def solve(
    R: DiscreteRealization,
    vectors: bool = True,
    trust_rtol: float = DEFAULT_TRUST_RTOL,
) -> SpectralData:
    """Dense Hermitian eigensolve of one realization."""
    if vectors:
        w, V = sla.eigh(R.H)
    else:
        w, V = sla.eigh(R.H, eigvals_only=True), None
    modes = np.full(len(w), R.mode)
    idx = _order(w, modes)
    norm = float(np.max(np.abs(w)))
    return SpectralData(
        eigenvalues=w[idx],
        modes=modes[idx],
        kernel_tol=KERNEL_FACTOR * EPS * norm,
        trusted=trusted_window(R, trust_rtol),
        dimension=1,
        eigenvectors=None if V is None else V[:, idx].T,
        model=R.model,
        meta={"backend": R.backend, "N": R.grid.N},
    )


def solve_half_torus(
    m: HalfTorusModel,
    vectors: bool = True,
    vector_cutoff: float | None = None,
    trust_rtol: float = DEFAULT_TRUST_RTOL,
    threads: int | None = None,
) -> SpectralData:
    """Eigenpairs of every mode D_k, merged in deterministic order.

    Eigenvectors are kept for |lambda| <= ``vector_cutoff`` (default: the
    trusted window).
    """
    trusted = trusted_window(m, trust_rtol)
    cut = trusted if vector_cutoff is None else vector_cutoff

    def one(k):
        H = m.realizations[k].H
        if vectors:
            w, V = sla.eigh(H)
            keep = np.abs(w) <= cut * (1 + WINDOW_SLACK)
            return w, V[:, keep].T, w[keep]
        return sla.eigh(H, eigvals_only=True), None, None

    results = parallel_map(one, m.modes, threads)
    eigs = np.concatenate([r[0] for r in results])
    modes = np.concatenate([np.full(len(r[0]), k) for k, r in zip(m.modes, results)])
    idx = _order(eigs, modes)
    norm = float(np.max(np.abs(eigs)))
    sd = SpectralData(
        eigenvalues=eigs[idx],
        modes=modes[idx],
        kernel_tol=KERNEL_FACTOR * EPS * norm,
        trusted=trusted,
        dimension=2,
        model="halftorus",
        meta={"N": m.N, "K": m.K, "L": m.L},
    )
    if vectors:
        vecs = np.concatenate([r[1] for r in results])
        vw = np.concatenate([r[2] for r in results])
        vm = np.concatenate([np.full(len(r[2]), k) for k, r in zip(m.modes, results)])
        vidx = _order(vw, vm)
        n = len(vidx)
        if not (np.array_equal(vw[vidx], sd.eigenvalues[:n]) and np.array_equal(vm[vidx], sd.modes[:n])):
            raise AssertionError("eigenvector ordering does not match eigenvalue ordering")
        sd.eigenvectors = vecs[vidx]
    return sd


def richardson_1d(N: int, n_eigs: int = 20, backend: str = "fd") -> tuple[np.ndarray, np.ndarray]:
    """The n_eigs smallest-|lambda| nonzero eigenvalues, sorted by value, with
    error estimates.

    The refined run uses 2N+1 interior points, which halves h exactly; the
    scheme is second order so the error of the coarse value is
    4/3 (lambda_N - lambda_2N+1).
    """
    from .discretization import discretize_1d_example

    out = []
    for n in (N, 2 * N + 1):
        sd = solve(discretize_1d_example(n, backend), vectors=False)
        nz = sd.eigenvalues[~sd.kernel_mask]
        # +-lambda partners may come out in either order; sort by value
        out.append(np.sort(nz[:n_eigs]))
    coarse, fine = out
    return coarse, 4.0 / 3.0 * np.abs(coarse - fine)


# -- zeta sums and residue fits -------------------------------------------------


def zeta_partial(sd: SpectralData, s: float, cutoff: float) -> float:
    """sum over 0 < |lambda| <= cutoff of |lambda|^-s."""
    if cutoff > sd.trusted * (1 + 1e-12):
        raise UntrustedRegionError(
            f"cutoff {cutoff} exceeds the trusted window {sd.trusted:.4g}"
        )
    lam = sd.abs[sd.window_mask(cutoff)]
    return float(np.sum(lam ** (-float(s))))


def cumulative_midpoints(values: np.ndarray, terms: np.ndarray, rtol: float = 1e-9):
    """Distinct |lambda| values and partial sums counting half of each jump."""
    order = np.argsort(values, kind="stable")
    v, t = values[order], terms[order]
    if len(v) == 0:
        return v, t
    new = np.concatenate([[True], np.diff(v) > rtol * np.maximum(v[1:], 1.0)])
    group = np.cumsum(new) - 1
    jumps = np.bincount(group, weights=t.real) + 1j * np.bincount(group, weights=t.imag)
    points = v[new]
    F = np.cumsum(jumps) - 0.5 * jumps
    if np.all(np.isreal(terms)):
        F = F.real
    return points, F


MODELS = {
    "log": "c + r log(L)",
    "linear_log": "c1 L + r log(L) + c0",
}


def _design(points: np.ndarray, model: str, growth: float | None = None):
    """Columns of the least-squares design; the log column is always index 0."""
    logp = np.log(points)
    if model == "log":
        cols, names = [logp, np.ones_like(points)], ["r", "c0"]
    elif model == "linear_log":
        cols, names = [logp, points, np.ones_like(points)], ["r", "c1", "c0"]
    elif model == "power":
        cols, names = [logp], ["r"]
        p = growth
        while p is not None and p > 1e-12:
            cols.append(points**p)
            names.append(f"L^{p:g}")
            p -= 1
        cols.append(np.ones_like(points))
        names.append("c0")
    else:
        raise ValueError(f"unknown fit model {model!r}")
    return np.column_stack(cols), names


def _auto_model(dimension: int, sigma: float) -> tuple[str, float]:
    growth = dimension - sigma
    if growth <= 1e-12:
        return "log", growth
    if abs(growth - 1) < 1e-12:
        return "linear_log", growth
    return "power", growth


def default_windows(trusted: float, n: int = 3) -> list[tuple[float, float]]:
    """n log-spaced windows covering [trusted/8, trusted/2]."""
    edges = np.geomspace(trusted / 8, trusted / 2, n + 1)
    return [(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])]


@dataclass
class ResidueFit:
    model: str
    r: float
    r_windows: list[float]
    windows: list[tuple[float, float]]
    spread: float
    coefficients: dict[str, float]
    goodness: float
    n_points: int
    atol: float = 0.0

    @property
    def trusted(self) -> bool:
        return self.spread <= max(UNTRUSTED_SPREAD * abs(self.r), self.atol)

    def to_dict(self) -> dict:
        return {
            "model": MODELS.get(self.model, self.model),
            "r": self.r,
            "r_windows": self.r_windows,
            "windows": [list(w) for w in self.windows],
            "spread": self.spread,
            "coefficients": self.coefficients,
            "goodness": self.goodness,
            "n_points": self.n_points,
            "trusted": self.trusted,
        }


def _lstsq(points, F, model, growth):
    X, names = _design(points, model, growth)
    if len(points) < X.shape[1] + 1:
        raise DegenerateFitError(
            f"{len(points)} sample points cannot determine {X.shape[1]} parameters"
        )
    scale = np.max(np.abs(X), axis=0)
    Xs = X / scale
    if np.linalg.matrix_rank(Xs, tol=1e-10) < X.shape[1]:
        raise DegenerateFitError("collinear fit design")
    coef, *_ = np.linalg.lstsq(Xs, F, rcond=None)
    coef = coef / scale
    resid = F - X @ coef
    return coef, names, resid


def residue_fit(
    sd: SpectralData,
    weights: np.ndarray | None = None,
    sigma: float = 1.0,
    model: str = "auto",
    windows: list[tuple[float, float]] | None = None,
    growth: float | None = None,
    atol: float = 0.0,
) -> ResidueFit:
    """Fit partial sums of w_n |lambda_n|^-sigma against ``model``.

    ``weights`` is aligned with ``sd.eigenvalues`` (it may be shorter, as
    long as it covers the trusted window).  ``atol`` is an absolute spread
    below which the fit counts as trusted even when r is near zero.
    """
    mask = sd.window_mask()
    if weights is None:
        w = np.ones(mask.sum())
    else:
        weights = np.asarray(weights)
        n = len(weights)
        if mask[n:].any():
            raise ValueError("weights do not cover the trusted window")
        w = weights[mask[:n]]
    lam = sd.abs[mask]
    if model == "auto":
        model, auto_growth = _auto_model(sd.dimension, sigma)
        growth = auto_growth if growth is None else growth
    elif growth is None:
        growth = sd.dimension - sigma
    points, F = cumulative_midpoints(lam, w * lam ** (-float(sigma)))
    windows = default_windows(sd.trusted) if windows is None else windows
    if len(windows) < 3:
        raise ValueError("at least three windows are required")
    if np.iscomplexobj(F):
        if np.max(np.abs(F.imag)) > 1e-8 * max(1.0, np.max(np.abs(F.real))):
            raise ValueError("weighted sums are not real")
        F = F.real
    lo, hi = windows[0][0], windows[-1][1]
    sel = (points >= lo) & (points <= hi)
    r_windows = []
    for a, b in windows:
        s = (points >= a) & (points <= b)
        try:
            r_windows.append(float(_lstsq(points[s], F[s], model, growth)[0][0]))
        except DegenerateFitError as exc:
            raise DegenerateFitError(
                f"fit window [{a:.4g}, {b:.4g}]: {exc}; refine the grid or widen the windows"
            ) from exc
    coef, names, resid = _lstsq(points[sel], F[sel], model, growth)
    scale = max(np.max(np.abs(F[sel])), np.finfo(float).tiny)
    return ResidueFit(
        model=model,
        r=float(coef[0]),
        r_windows=r_windows,
        windows=[tuple(w_) for w_ in windows],
        spread=float(max(r_windows) - min(r_windows)),
        coefficients={k: float(v) for k, v in zip(names, coef)},
        goodness=float(np.sqrt(np.mean(resid**2)) / scale),
        n_points=int(sel.sum()),
        atol=atol,
    )


def counting_fit(sd: SpectralData, windows=None) -> dict:
    """Fit N(L) = #{0 < |lambda| <= L} by sum_j c_j L^j + c0, j = d..1."""
    lam = sd.abs[sd.window_mask()]
    points, F = cumulative_midpoints(lam, np.ones_like(lam))
    windows = default_windows(sd.trusted) if windows is None else windows
    sel = (points >= windows[0][0]) & (points <= windows[-1][1])
    cols = [points[sel] ** j for j in range(sd.dimension, 0, -1)] + [np.ones(sel.sum())]
    X = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(X, F[sel], rcond=None)
    names = [f"L^{j}" for j in range(sd.dimension, 0, -1)] + ["c0"]
    return dict(zip(names, map(float, coef)))


def zeta_at_zero(sd: SpectralData, windows=None) -> dict:
    """zeta(0) estimate: counting-fit intercept plus the kernel dimension.

    With the convention |D|^-s := (|D| + P0)^-s each kernel vector adds
    1^-s = 1.  Only an estimate: log and oscillatory terms are ignored.
    """
    coef = counting_fit(sd, windows)
    return {
        "value": coef["c0"] + sd.kernel_dim,
        "intercept": coef["c0"],
        "kernel_dim": sd.kernel_dim,
        "coefficients": coef,
        "estimate_only": True,
    }


def weyl_slope(sd: SpectralData, windows=None) -> dict:
    """Slope of log N(L) against log L over the fit windows."""
    lam = sd.abs[sd.window_mask()]
    points, F = cumulative_midpoints(lam, np.ones_like(lam))
    windows = default_windows(sd.trusted) if windows is None else windows
    sel = (points >= windows[0][0]) & (points <= windows[-1][1])
    slope, intercept = np.polyfit(np.log(points[sel]), np.log(F[sel]), 1)
    return {"slope": float(slope), "intercept": float(intercept), "window": [windows[0][0], windows[-1][1]]}


# -- heat trace -----------------------------------------------------------------


def _check_heat_t(sd: SpectralData, t: float, tol: float = 1e-10):
    tail = len(sd.eigenvalues) * math.exp(-t * sd.trusted**2)
    if tail > tol:
        raise UntrustedRegionError(
            f"t = {t:g} too small: unresolved eigenvalues contribute up to {tail:.2e}"
        )


def heat_trace(sd: SpectralData, t: float) -> float:
    """kernel_dim + sum over the trusted nonzero eigenvalues of exp(-t lambda^2)."""
    _check_heat_t(sd, t)
    lam = sd.abs[sd.window_mask()]
    return float(sd.kernel_dim + np.sum(np.exp(-t * lam**2)))


def heat_t_range(sd: SpectralData, tol: float = 1e-10) -> tuple[float, float]:
    """Smallest admissible t and a default upper end ten times larger."""
    t_min = math.log(len(sd.eigenvalues) / tol) / sd.trusted**2 * 1.01
    return t_min, 10 * t_min


def fit_heat_coefficients(sd: SpectralData, t_grid: Sequence[float], n_terms: int = 3) -> dict:
    """Least-squares a_k in Tr exp(-t D^2) ~ sum_k a_k t^((k - d)/2)."""
    t = np.asarray(t_grid, dtype=float)
    vals = np.array([heat_trace(sd, ti) for ti in t])
    d = sd.dimension
    X = np.column_stack([t ** ((k - d) / 2) for k in range(n_terms)])
    coef, *_ = np.linalg.lstsq(X, vals, rcond=None)
    resid = vals - X @ coef
    return {
        "coefficients": {f"a{k}": float(c) for k, c in enumerate(coef)},
        "relative_residual": float(np.max(np.abs(resid) / vals)),
        "t_range": [float(t.min()), float(t.max())],
    }


# -- spectral action ------------------------------------------------------------


@dataclass(frozen=True)
class CutoffFunction:
    name: str
    phi: Callable[[np.ndarray], np.ndarray]
    support: float = math.inf

    def moment(self, k: float) -> float:
        """Phi_k = 1/2 int_0^inf Phi(t) t^(k/2 - 1) dt."""
        f = lambda t: float(self.phi(np.asarray(t))) * t ** (k / 2 - 1)
        if math.isinf(self.support):
            head, _ = integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-12, limit=200)
            tail, _ = integrate.quad(f, 1, math.inf, epsabs=0, epsrel=1e-12, limit=200)
            return 0.5 * (head + tail)
        val, _ = integrate.quad(f, 0, self.support, epsabs=0, epsrel=1e-12, limit=200)
        return 0.5 * val

    def closed_form_moment(self, k: float) -> float | None:
        if self.name == "gaussian":
            return 0.5 * special.gamma(k / 2)
        return None

    @property
    def at_zero(self) -> float:
        return float(self.phi(np.asarray(0.0)))


def _bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = t < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside]))
    return out if out.ndim else float(out)


CUTOFFS = {
    "gaussian": CutoffFunction("gaussian", lambda t: np.exp(-np.asarray(t, dtype=float))),
    "compact": CutoffFunction("compact", _bump, support=1.0),
}


def cutoff_function(name: str) -> CutoffFunction:
    try:
        return CUTOFFS[name]
    except KeyError:
        raise ValueError(f"unknown cutoff {name!r}; choose from {sorted(CUTOFFS)}") from None


def spectral_action(sd: SpectralData, phi: CutoffFunction, cutoff: float, tol: float = 1e-6) -> float:
    """Tr Phi(D^2 / Lambda^2), kernel included as Phi(0) per vector."""
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    edge = (sd.trusted / cutoff) ** 2
    if edge < phi.support and float(phi.phi(np.asarray(edge))) > tol:
        raise UntrustedRegionError(
            f"Phi does not decay inside the trusted window at Lambda = {cutoff}"
        )
    lam = sd.abs[sd.window_mask()]
    return float(sd.kernel_dim * phi.at_zero + np.sum(phi.phi(lam**2 / cutoff**2)))


def action_series(
    sd: SpectralData,
    phi: CutoffFunction,
    cutoff: float,
    residues: dict[int, float] | None = None,
    zeta0: float | None = None,
) -> dict:
    """sum_k Phi_k Lambda^k (nc-integral of |D|^-k) + Phi(0) zeta(0), k = d..1."""
    d = sd.dimension
    fits = {}
    if residues is None:
        residues = {}
        for k in range(d, 0, -1):
            fits[k] = residue_fit(sd, sigma=k)
            residues[k] = fits[k].r
    if zeta0 is None:
        zeta0 = zeta_at_zero(sd)["value"]
    terms = {k: phi.moment(k) * cutoff**k * residues[k] for k in residues}
    value = sum(terms.values()) + phi.at_zero * zeta0
    return {
        "value": float(value),
        "terms": {str(k): float(v) for k, v in terms.items()},
        "zeta0": float(zeta0),
        "residues": {str(k): float(v) for k, v in residues.items()},
        "fits": {str(k): f.to_dict() for k, f in fits.items()},
    }


# -- one-forms and tadpoles -----------------------------------------------------


class NotInAlgebraError(ValueError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class OneForm:
    A: np.ndarray | sp.spmatrix
    pairs: list
    selfadjointized: bool = True

    def scaled(self, c: float) -> "OneForm":
        return OneForm(self.A * c, self.pairs, self.selfadjointized)


def _collar_constant(f: TangentialFunction, m: HalfTorusModel, collar: float = 0.1) -> bool:
    if f.radial is None:
        return True
    x = np.concatenate([m.grid.nodes, m.grid.half_nodes])
    vals = np.asarray(f.radial(x), dtype=complex) * np.ones_like(x)
    near0 = x <= collar * m.L
    nearL = x >= (1 - collar) * m.L
    v0, vL = f.radial(np.array([0.0])), f.radial(np.array([m.L]))
    return bool(np.allclose(vals[near0], v0, atol=1e-12) and np.allclose(vals[nearL], vL, atol=1e-12))


def _operator(R):
    if isinstance(R, HalfTorusModel):
        return R.full_operator()
    return R.H


def build_one_form(pairs: Sequence[tuple], R: DiscreteRealization | HalfTorusModel) -> OneForm:
    """A = 1/2 (X + X*), X = sum a_i [H, b_i].

    On the 1D example every a_i, b_i must be a :class:`TrigPoly` in the
    algebra (odd derivatives vanish at the boundary).  On the half-torus they
    must be :class:`TangentialFunction` objects whose radial factor is
    constant near both boundary components.
    """
    H = _operator(R)
    X = None
    for a, b in pairs:
        for f in (a, b):
            if isinstance(R, HalfTorusModel):
                if not isinstance(f, TangentialFunction):
                    raise NotInAlgebraError(f"{f!r} is not a tangential function")
                if not _collar_constant(f, R):
                    raise NotInAlgebraError("radial factor is not constant near the boundary")
            else:
                if not isinstance(f, TrigPoly):
                    raise NotInAlgebraError(f"{f!r} is not a trigonometric polynomial")
                rep = algebra_membership_1d(f)
                if not rep.member:
                    raise NotInAlgebraError(
                        f"function violates the boundary condition at derivative order "
                        f"{2 * rep.first_violation[0] + 1}, theta = {rep.first_violation[1]:.6g}",
                        rep,
                    )
        ma = multiplication_operator(a, R)
        mb = multiplication_operator(b, R)
        term = ma @ (H @ mb - mb @ H)
        X = term if X is None else X + term
    if X is None:
        raise ValueError("a one-form needs at least one pair")
    A = 0.5 * (X + X.conj().T)
    if sp.issparse(A):
        A = A.tocsr()
        A.eliminate_zeros()
    return OneForm(A, list(pairs))


def first_order_residual(a, b, R) -> float:
    """||[[H, b], a]|| for multiplication operators a, b.

    On the half-torus the mode truncation |k| <= K spoils products of
    multiplication operators near the cutoff, so the norm is taken over
    the modes whose neighbours (up to the combined Fourier degree of a and
    b) are all retained.
    """
    H = _operator(R)
    ma = multiplication_operator(a, R)
    mb = multiplication_operator(b, R)
    db = H @ mb - mb @ H
    C = db @ ma - ma @ db
    if isinstance(R, HalfTorusModel):
        inner = R.K - a.coeffs.M - b.coeffs.M
        if inner < 0:
            raise ValueError("mode cutoff too small for these functions")
        keep = slice(R.mode_slice(-inner).start, R.mode_slice(inner).stop)
        C = C[keep, keep]
        if not C.nnz:
            return 0.0
        # sqrt(||C||_1 ||C||_inf) bounds the operator norm
        return float(np.sqrt(sp.linalg.norm(C, 1) * sp.linalg.norm(C, np.inf)))
    return float(np.linalg.norm(C, 2))


def _mode_block(A, model: HalfTorusModel, k: int, kp: int | None = None):
    kp = k if kp is None else kp
    blk = A[model.mode_slice(k), model.mode_slice(kp)]
    return blk.toarray() if sp.issparse(blk) else blk


def expectation_weights(sd: SpectralData, A, model: HalfTorusModel | None = None) -> np.ndarray:
    """<psi_n, A psi_n> for every stored eigenvector."""
    if sd.eigenvectors is None:
        raise ValueError("eigenvectors are required")
    V = sd.eigenvectors
    A = A.A if isinstance(A, OneForm) else A
    if model is None:
        AV = A @ V.T
        return np.einsum("ij,ji->i", V.conj(), AV).real
    out = np.empty(len(V))
    for k in np.unique(sd.modes[: len(V)]):
        rows = np.flatnonzero(sd.modes[: len(V)] == k)
        blk = _mode_block(A, model, int(k))
        Vk = V[rows]
        out[rows] = np.einsum("ij,ji->i", Vk.conj(), blk @ Vk.T).real
    return out


@dataclass
class TadpoleResult:
    order: int
    fit: ResidueFit
    value: float
    max_partial_sum: float
    roundoff_bound: float

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "value": self.value,
            "r": self.fit.r,
            "spread": self.fit.spread,
            "windows": [list(w) for w in self.fit.windows],
            "trusted": self.fit.trusted,
            "max_partial_sum": self.max_partial_sum,
            "roundoff_bound": self.roundoff_bound,
            "fit": self.fit.to_dict(),
        }


def _norm(A) -> float:
    if sp.issparse(A):
        return float(sp.linalg.norm(A, 1)) if A.nnz else 0.0
    return float(np.linalg.norm(A, 2)) if A.size else 0.0


def tadpole(
    sd: SpectralData,
    A: OneForm | np.ndarray,
    order: int = 0,
    model: HalfTorusModel | None = None,
    atol: float = 0.0,
    windows: list[tuple[float, float]] | None = None,
) -> TadpoleResult:
    """Tadpole of order j = d - k from the partial sums of w_n sign(lambda_n) |lambda_n|^-(j+1).

    Tad(0) = -r, Tad(j) = -j r for j >= 1, with r the log-coefficient.
    """
    if sd.eigenvectors is None:
        raise ValueError("tadpoles need eigenvectors")
    if order < 0:
        raise ValueError("order must be non-negative")
    Aop = A.A if isinstance(A, OneForm) else A
    w = expectation_weights(sd, Aop, model)
    n = len(w)
    w = w * np.sign(sd.eigenvalues[:n])
    sigma = order + 1
    fit = residue_fit(sd, w, sigma=sigma, atol=atol, windows=windows)
    mask = sd.window_mask()[:n]
    lam = sd.abs[:n][mask]
    # partial sums at each distinct |lambda| (a +-lambda pair enters together)
    _, mid = cumulative_midpoints(lam, w[mask] * lam ** (-float(sigma)))
    _, half = cumulative_midpoints(lam, 0.5 * w[mask] * lam ** (-float(sigma)))
    partial = mid + half
    value = -fit.r if order == 0 else -order * fit.r
    bound = float(mask.sum() * EPS * _norm(Aop))
    return TadpoleResult(order, fit, float(value), float(np.max(np.abs(partial), initial=0.0)), bound)


def symmetry_broken_control(model: HalfTorusModel):
    """x/L times the volume chirality: selfadjoint, anticommutes with J'."""
    from .discretization import chirality_volume_operator

    return chirality_volume_operator(model, lambda x: x / model.L)


# -- conjugation --------------------------------------------------------------


def lift_conjugation(J: ConjugationOp, R: DiscreteRealization) -> np.ndarray:
    """Matrix M of the grid conjugation psi -> M conj(psi).

    In the realization's fiber basis Q the fiber map is Q* U conj(Q); it must
    not mix the staggered components.
    """
    Q = R.fiber_basis
    F = Q.conj().T @ J.U @ np.conj(Q)
    nb = len(R.blocks)
    off = F - np.diag(np.diag(F))
    if np.max(np.abs(off), initial=0.0) > 1e-12 or F.shape[0] != nb:
        raise ValueError("conjugation mixes the staggered components")
    diag = np.concatenate([np.full(b.rows.stop - b.rows.start, F[i, i]) for i, b in enumerate(R.blocks)])
    return np.diag(diag)


def conjugation_check(
    J: ConjugationOp,
    R: DiscreteRealization,
    partner: DiscreteRealization | None = None,
    sign: int | None = None,
) -> dict:
    """||M conj(H) - sign H' M||_F and boundary compatibility ||J S - S J||.

    ``partner`` is the realization J maps into (D_-k for D_k), defaulting to
    R itself; ``sign`` defaults to J.epsilon.
    """
    partner = R if partner is None else partner
    sign = J.epsilon if sign is None else sign
    M = lift_conjugation(J, R)
    # Frobenius norm: an upper bound for the operator norm, much cheaper
    res = float(np.linalg.norm(M @ np.conj(R.H) - sign * partner.H @ M))
    bres = 0.0
    if R.trace_conditions is not None:
        for t in R.trace_conditions:
            bres = max(bres, float(np.linalg.norm(J.U @ np.conj(t.S) - t.S @ J.U, 2)))
    return {"residual": res, "boundary_residual": bres, "sign": sign}


def half_torus_conjugation_residuals(J: ConjugationOp, m: HalfTorusModel) -> dict:
    """max over k of ||J' D_k + D_-k J'||, plus the boundary residual."""
    worst, bworst = 0.0, 0.0
    for k in m.modes:
        c = conjugation_check(J, m.realizations[k], m.realizations[-k], sign=-1)
        worst = max(worst, c["residual"])
        bworst = max(bworst, c["boundary_residual"])
    return {"residual": worst, "boundary_residual": bworst, "modes": len(m.modes)}


def pairing_check(sd: SpectralData, J: ConjugationOp, m: HalfTorusModel, A) -> dict:
    """For each stored eigenpair (lambda, psi) in mode k, test that J' psi is an
    eigenvector of D_-k for -lambda and carries the same A-expectation."""
    if sd.eigenvectors is None:
        raise ValueError("pairing check needs eigenvectors")
    A = A.A if isinstance(A, OneForm) else A
    M = lift_conjugation(J, m.realizations[0])
    V = sd.eigenvectors
    n = len(V)
    lam, modes = sd.eigenvalues[:n], sd.modes[:n]
    eig_res, weight_res, partner_gap = 0.0, 0.0, 0.0
    blocks = {k: _mode_block(A, m, k) for k in np.unique(modes)}
    blocks.update({-k: _mode_block(A, m, -k) for k in np.unique(modes) if -k not in blocks})
    for k in np.unique(modes):
        rows = np.flatnonzero(modes == k)
        Vk = V[rows]
        Pk = np.conj(Vk) @ M.T  # rows are J' psi
        Hm = m.realizations[-int(k)].H
        r = Pk @ Hm.T + lam[rows, None] * Pk
        eig_res = max(eig_res, float(np.max(np.linalg.norm(r, axis=1))))
        w = np.einsum("ij,ji->i", Vk.conj(), blocks[int(k)] @ Vk.T)
        wp = np.einsum("ij,ji->i", Pk.conj(), blocks[-int(k)] @ Pk.T)
        weight_res = max(weight_res, float(np.max(np.abs(w - wp))))
        target = sd.eigenvalues[sd.modes == -k]
        gaps = np.min(np.abs(target[None, :] + lam[rows, None]), axis=1)
        partner_gap = max(partner_gap, float(np.max(gaps)))
    sym = symmetric_spectrum_residual(sd)
    return {
        "eigen_residual": eig_res,
        "weight_residual": weight_res,
        "partner_gap": partner_gap,
        "spectrum_symmetry": sym,
        "pairs": int(n),
    }


def symmetric_spectrum_residual(sd: SpectralData) -> float:
    """max | sort(lambda) + sort(-lambda) reversed |, i.e. {lambda} = {-lambda}."""
    s = np.sort(sd.eigenvalues)
    return float(np.max(np.abs(s + s[::-1])))


# -- zeta(0) correction ---------------------------------------------------------


def _eigen_matrix(sd: SpectralData, A, model: HalfTorusModel | None, rows: np.ndarray):
    """Sparse <psi_m, A psi_n> restricted to ``rows``."""
    V = sd.eigenvectors[rows]
    if model is None:
        return sp.csr_matrix(V.conj() @ (A @ V.T))
    bs = model.block_size
    modes = sd.modes[rows]
    r_idx = (modes + model.K)[:, None] * bs + np.arange(bs)[None, :]
    E = sp.csr_matrix(
        (V.ravel(), (r_idx.ravel(), np.repeat(np.arange(len(rows)), bs))),
        shape=(model.size, len(rows)),
    )
    A = sp.csr_matrix(A)
    return (E.conj().T @ (A @ E)).tocsr()


def zeta_zero_estimate(
    sd: SpectralData,
    A: OneForm | np.ndarray,
    model: HalfTorusModel | None = None,
    atol: float = 0.0,
) -> dict:
    """sum_{q=1}^d (-1)^q / q times the nc-integral of (A D^-1)^q.

    Each nc-integral is fitted from the diagonal of (A D^-1)^q in the basis
    of trusted nonzero eigenvectors (D^-1 vanishes on the kernel).
    """
    if sd.eigenvectors is None:
        raise ValueError("eigenvectors are required")
    Aop = A.A if isinstance(A, OneForm) else A
    n = sd.n_vectors
    rows = np.flatnonzero(sd.window_mask()[:n])
    lam = sd.eigenvalues[rows]
    Ahat = _eigen_matrix(sd, Aop, model, rows)
    B = Ahat @ sp.diags(1.0 / lam)
    d = sd.dimension
    terms, fits = {}, {}
    P = sp.identity(len(rows), format="csr")
    for q in range(1, d + 1):
        P = (P @ B).tocsr()
        diag = np.asarray(P.diagonal())
        w = np.zeros(n, dtype=complex)
        w[rows] = diag
        fit = residue_fit(sd, w.real, sigma=0.0, growth=d - q, model=_auto_model(d, q)[0], atol=atol)
        fits[q] = fit
        terms[q] = (-1) ** q / q * fit.r
    return {
        "correction": float(sum(terms.values())),
        "terms": {str(q): float(v) for q, v in terms.items()},
        "fits": {str(q): f.to_dict() for q, f in fits.items()},
    }
