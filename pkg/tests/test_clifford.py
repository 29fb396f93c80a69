import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_boundary.clifford import (
    MAX_DIM,
    SIGMA1,
    SIGMA3,
    build_chirality,
    build_conjugation,
    build_gamma,
    check,
)

DIMS = [2, 4, 6, 8]


@pytest.mark.parametrize("d", DIMS)
def test_all_relations_exact(d):
    res = check(d)
    assert max(res.values()) < 1e-12, res


@pytest.mark.parametrize("d", DIMS)
def test_gamma_shape_and_entries(d):
    g = build_gamma(d)
    assert len(g.gammas) == d
    for gi in g.gammas:
        assert gi.shape == (2 ** (d // 2),) * 2
        # entries in {0, +-1, +-i}
        vals = set(np.round(gi[np.abs(gi) > 0], 12).tolist())
        assert vals <= {1, -1, 1j, -1j}


def test_d2_representation():
    g = build_gamma(2)
    chi = build_chirality(g)
    np.testing.assert_array_equal(g.gammas[0], SIGMA1)
    np.testing.assert_allclose(chi.chi, -SIGMA1, atol=1e-15)
    np.testing.assert_allclose(chi.chi_volume, SIGMA3, atol=1e-15)


def test_d2_conjugation_matrix():
    conj = build_conjugation(build_gamma(2))
    np.testing.assert_allclose(conj.J.U, [[0, 1], [-1, 0]], atol=1e-15)
    # d/2 = 1 is odd, so J' is J composed with the volume chirality
    assert conj.J_prime is conj.J_tilde
    np.testing.assert_allclose(conj.J_prime.U, -SIGMA1, atol=1e-15)


@pytest.mark.parametrize("d", DIMS)
def test_epsilon_signs(d):
    conj = build_conjugation(build_gamma(d))
    assert conj.J.epsilon == 1
    assert conj.J.epsilon_prime == (-1) ** (d // 2)
    assert conj.J_tilde.epsilon == -1
    expect_prime = conj.J if (d // 2) % 2 == 0 else conj.J_tilde
    assert conj.J_prime is expect_prime


@pytest.mark.parametrize("d", DIMS)
def test_projectors(d):
    chi = build_chirality(build_gamma(d))
    one = np.eye(chi.chi.shape[0])
    np.testing.assert_allclose(chi.pi_plus + chi.pi_minus, one, atol=1e-14)
    np.testing.assert_allclose(chi.pi_plus @ chi.pi_minus, 0, atol=1e-14)
    assert np.trace(chi.pi_minus).real == pytest.approx(one.shape[0] / 2)
    np.testing.assert_array_equal(chi.S, chi.pi_minus)


@pytest.mark.parametrize("bad", [0, 3, 5, -2, 10])
def test_bad_dimension(bad):
    with pytest.raises(ValueError):
        build_gamma(bad)


def test_dimension_type():
    with pytest.raises(TypeError):
        build_gamma(2.0)
    assert MAX_DIM == 8


def _complex_vectors(n):
    floats = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
    return st.lists(st.tuples(floats, floats), min_size=n, max_size=n).map(
        lambda xs: np.array([complex(a, b) for a, b in xs])
    )


@settings(max_examples=40, deadline=None)
@given(d=st.sampled_from([2, 4, 6]), data=st.data())
def test_J_antiunitary(d, data):
    conj = build_conjugation(build_gamma(d))
    n = 2 ** (d // 2)
    v = data.draw(_complex_vectors(n))
    w = data.draw(_complex_vectors(n))
    Jv, Jw = conj.J.apply(v), conj.J.apply(w)
    # isometry and antiunitarity: <Jv, Jw> = conj <v, w>
    assert np.linalg.norm(Jv) == pytest.approx(np.linalg.norm(v), abs=1e-9)
    assert np.vdot(Jv, Jw) == pytest.approx(np.conj(np.vdot(v, w)), abs=1e-8)
    c = complex(1.5, -0.5)
    np.testing.assert_allclose(conj.J.apply(c * v), np.conj(c) * Jv, atol=1e-9)


@pytest.mark.parametrize("d", [2, 4, 6])
def test_J_squared(d):
    conj = build_conjugation(build_gamma(d))
    U = conj.J.U
    JJ = U @ np.conj(U)
    # J^2 is a sign times the identity
    assert np.allclose(JJ, JJ[0, 0] * np.eye(len(U)), atol=1e-14)
    assert abs(abs(JJ[0, 0]) - 1) < 1e-14
