import numpy as np
import pytest
import scipy.sparse as sp

from spectral_boundary.boundary_system import TrigPoly
from spectral_boundary.clifford import build_chirality
from spectral_boundary.discretization import (
    Grid1D,
    TangentialFunction,
    chirality_volume_operator,
    discretize_1d_example,
    discretize_half_torus,
    multiplication_operator,
    staggered_difference,
    tangential_operator,
)


def fd_oracle(N):
    """Nonzero eigenvalues of the staggered scheme: +-(2/h) sin(n h/2)."""
    h = np.pi / (N + 1)
    n = np.arange(1, N + 1)
    mu = 2 / h * np.sin(n * h / 2)
    return np.sort(np.concatenate([mu, -mu, [0.0]]))


@pytest.mark.parametrize("N", [8, 33, 128])
def test_fd_spectrum_closed_form(N):
    R = discretize_1d_example(N)
    assert R.H.shape == (2 * N + 1,) * 2
    np.testing.assert_array_equal(R.H, R.H.T)
    np.testing.assert_allclose(np.linalg.eigvalsh(R.H), fd_oracle(N), atol=1e-11)


def test_basis_spectrum_integers():
    R = discretize_1d_example(40, "basis")
    w = np.linalg.eigvalsh(R.H)
    np.testing.assert_allclose(w, np.arange(-40, 41), atol=1e-9)


def test_grid():
    g = Grid1D(10, 0.0, 11.0)
    assert g.h == 1.0
    np.testing.assert_allclose(g.nodes, np.arange(1, 11))
    np.testing.assert_allclose(g.half_nodes, np.arange(11) + 0.5)
    with pytest.raises(ValueError):
        Grid1D(4, 0, 1)


def test_staggered_difference_exact_on_linear():
    g = Grid1D(20, 0.0, 1.0)
    D = staggered_difference(g)
    # D maps half-node values to node values, exactly differentiating linear data
    np.testing.assert_allclose(D @ (3 * g.half_nodes), 3 * np.ones(20), atol=1e-12)


def test_bad_backend():
    with pytest.raises(ValueError):
        discretize_1d_example(16, "spectral")


def test_boundary_violation_of_eigenvectors(fd512):
    R, sd = fd512
    # psi_1 is eliminated at the ends, so extrapolated traces stay O(h) small
    for v in sd.eigenvectors[1:11]:
        assert R.boundary_violation(v) < 0.05
    psi1_end = sd.eigenvectors[1][R.block("psi1").rows][[0, -1]]
    assert np.max(np.abs(psi1_end)) < 0.01


def test_metadata_serializable():
    import json

    R = discretize_1d_example(16)
    json.dumps(R.metadata())
    m = discretize_half_torus(16, 4)
    json.dumps(m.metadata())


def test_half_torus_mode_spectrum():
    m = discretize_half_torus(32, 6)
    mu = fd_oracle(32)
    mu = mu[mu > 0] * 1.0
    for k in (-3, 0, 2, 6):
        w = np.sort(np.linalg.eigvalsh(m.realizations[k].H))
        expect = np.sort(np.concatenate([[-k], np.sqrt(k**2 + mu**2), -np.sqrt(k**2 + mu**2)]))
        np.testing.assert_allclose(w, expect, atol=1e-10)


def test_half_torus_guards():
    with pytest.raises(ValueError):
        discretize_half_torus(8, 8)
    with pytest.raises(ValueError):
        discretize_half_torus(32, 2)


def test_full_operator_block_diagonal():
    m = discretize_half_torus(16, 4)
    H = m.full_operator()
    assert sp.issparse(H)
    assert H.shape == (m.size, m.size)
    blk = H[m.mode_slice(2), m.mode_slice(2)].toarray()
    np.testing.assert_array_equal(blk, m.realizations[2].H)
    assert H[m.mode_slice(2), m.mode_slice(3)].nnz == 0


def test_tangential_operator_spectrum():
    m = discretize_half_torus(16, 5)
    t = tangential_operator(m)
    expect = np.sort(np.concatenate([np.arange(-5, 6), -np.arange(-5, 6)]))
    np.testing.assert_allclose(t.eigenvalues(), expect, atol=1e-12)


def test_multiplication_torus_products():
    m = discretize_half_torus(16, 8)
    a = TangentialFunction.from_dict({1: 1.0, -2: 0.5j})
    b = TangentialFunction.from_dict({-1: 2.0})
    ab = TangentialFunction(a.coeffs * b.coeffs)
    Ma, Mb, Mab = (multiplication_operator(f, m) for f in (a, b, ab))
    # exact away from the mode cutoff
    inner = slice(m.mode_slice(-5).start, m.mode_slice(5).stop)
    diff = (Ma @ Mb - Mab)[inner, inner]
    assert abs(diff).max() < 1e-14
    # real function -> Hermitian operator
    c = TangentialFunction(TrigPoly.cos(2))
    Mc = multiplication_operator(c, m)
    assert abs(Mc - Mc.conj().T).max() < 1e-15


def test_multiplication_1d_fd_and_basis():
    R = discretize_1d_example(16)
    M = multiplication_operator(TrigPoly.sin(), R)
    np.testing.assert_allclose(np.diag(M)[:16], np.sin(R.grid.nodes), atol=1e-14)
    Rb = discretize_1d_example(8, "basis")
    Mb = multiplication_operator(TrigPoly.constant(2.0), Rb)
    np.testing.assert_allclose(Mb, 2 * np.eye(Rb.size), atol=1e-12)


def test_volume_chirality_operator():
    m = discretize_half_torus(16, 4)
    C = chirality_volume_operator(m, lambda x: x / m.L)
    assert abs(C - C.conj().T).max() < 1e-15
    chi = build_chirality(m.gammas).chi_volume
    F = m.fiber_basis.conj().T @ chi @ m.fiber_basis
    assert np.allclose(np.diag(F), 0)
