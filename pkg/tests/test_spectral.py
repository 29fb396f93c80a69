import math

import numpy as np
import pytest
from scipy.special import gamma as Gamma
from scipy.special import polygamma

from spectral_boundary.boundary_system import TrigPoly
from spectral_boundary.clifford import build_conjugation
from spectral_boundary.discretization import TangentialFunction, discretize_1d_example
from spectral_boundary.io import read_eigvecs, read_spectrum_csv, write_eigvecs, write_spectrum_csv
from spectral_boundary.spectral import (
    CUTOFFS,
    DegenerateFitError,
    NotInAlgebraError,
    UntrustedRegionError,
    action_series,
    build_one_form,
    cumulative_midpoints,
    cutoff_function,
    expectation_weights,
    first_order_residual,
    fit_heat_coefficients,
    half_torus_conjugation_residuals,
    heat_t_range,
    heat_trace,
    pairing_check,
    residue_fit,
    richardson_1d,
    solve_half_torus,
    spectral_action,
    symmetric_spectrum_residual,
    symmetry_broken_control,
    tadpole,
    weyl_slope,
    zeta_at_zero,
    zeta_partial,
    zeta_zero_estimate,
)

THETA3_AT_1 = 1.7726372048266521  # sum over all integers of exp(-n^2)


def test_kernel_and_order(fd512):
    _, sd = fd512
    assert sd.kernel_dim == 1
    lam = sd.abs
    assert np.all(np.diff(lam) >= -1e-12)
    assert sd.trusted == pytest.approx(math.sqrt(0.24) / (math.pi / 513))
    assert sd.eigenvectors.shape == (1025, 1025)


def test_zeta_partial_basis_oracle(basis128):
    _, sd = basis128
    # eigenvalues are exactly +-1..+-N: 2 zeta(2) minus the tail 2 psi'(L+1)
    val = zeta_partial(sd, 2, 60)
    assert val == pytest.approx(math.pi**2 / 3 - 2 * polygamma(1, 61), rel=1e-12)
    assert zeta_partial(sd, 0, 10) == 20


def test_zeta_partial_untrusted(fd512):
    _, sd = fd512
    with pytest.raises(UntrustedRegionError):
        zeta_partial(sd, 1, 2 * sd.trusted)


def test_residue_basis_exact(basis128):
    _, sd = basis128
    fit = residue_fit(sd, sigma=1)
    assert fit.model == "log"
    # midpoint sums of 1/n carry a 1/n^2 correction that shifts r slightly
    assert fit.r == pytest.approx(2, abs=5e-3)
    assert fit.trusted


def test_residue_fd(fd512):
    _, sd = fd512
    fit = residue_fit(sd, sigma=1)
    assert fit.r == pytest.approx(2, abs=0.05)
    assert fit.spread < 0.02
    d = fit.to_dict()
    assert set(d) >= {"r", "spread", "windows", "trusted"}


def test_alternating_weights(basis128):
    _, sd = basis128
    # weight (-1)^(n+1) on |lambda| = n: no log growth, sum -> 2 log 2
    n = np.rint(sd.abs).astype(int)
    w = np.where(n % 2 == 1, 1.0, -1.0)
    fit = residue_fit(sd, w, sigma=1, atol=1e-2)
    assert abs(fit.r) < 1e-2
    lam = sd.abs[sd.window_mask()]
    pts, F = cumulative_midpoints(lam, w[sd.window_mask()] / lam)
    assert F[-1] == pytest.approx(2 * math.log(2), abs=0.05)


def test_cumulative_midpoints_groups():
    pts, F = cumulative_midpoints(np.array([1.0, 1.0, 2.0, 3.0]), np.array([1.0, 1.0, 1.0, 1.0]))
    np.testing.assert_allclose(pts, [1, 2, 3])
    np.testing.assert_allclose(F, [1.0, 2.5, 3.5])


def test_degenerate_windows(fd512):
    _, sd = fd512
    with pytest.raises(DegenerateFitError):
        residue_fit(sd, windows=[(1.5, 1.6), (1.6, 1.7), (1.7, 1.8)])
    with pytest.raises(ValueError):
        residue_fit(sd, windows=[(10, 20), (20, 40)])


def test_zeta_at_zero(basis128, fd512):
    z = zeta_at_zero(basis128[1])
    assert z["value"] == pytest.approx(0, abs=1e-6)
    assert z["kernel_dim"] == 1
    assert abs(zeta_at_zero(fd512[1])["value"]) < 0.2


def test_heat_theta_function(basis128):
    _, sd = basis128
    assert heat_trace(sd, 1.0) == pytest.approx(THETA3_AT_1, rel=1e-12)
    with pytest.raises(UntrustedRegionError):
        heat_trace(sd, 1e-4)


def test_heat_a0(fd512):
    _, sd = fd512
    tmin, tmax = heat_t_range(sd)
    fit = fit_heat_coefficients(sd, np.geomspace(tmin, tmax, 20))
    assert fit["coefficients"]["a0"] == pytest.approx(math.sqrt(math.pi), rel=0.01)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_gaussian_moments(k):
    phi = cutoff_function("gaussian")
    assert phi.moment(k) == pytest.approx(0.5 * Gamma(k / 2), rel=1e-9)
    assert phi.closed_form_moment(k) == pytest.approx(0.5 * Gamma(k / 2), rel=1e-12)
    assert phi.at_zero == 1.0


def test_compact_cutoff():
    phi = CUTOFFS["compact"]
    assert phi.support < math.inf
    assert phi.moment(1) > 0
    with pytest.raises(ValueError):
        cutoff_function("lorentzian")


def test_action_series_converges(basis128):
    _, sd = basis128
    phi = cutoff_function("gaussian")
    errs = []
    for L in (5, 10, 15):
        direct = spectral_action(sd, phi, L)
        series = action_series(sd, phi, L, residues={1: 2.0}, zeta0=0.0)["value"]
        errs.append(abs(direct - series) / direct)
    # exact spectrum: the theta function differs from sqrt(pi) L by exp(-pi^2 L^2)
    assert max(errs) < 1e-8


def test_action_cutoff_guards(fd512):
    _, sd = fd512
    phi = cutoff_function("gaussian")
    with pytest.raises(UntrustedRegionError):
        spectral_action(sd, phi, sd.trusted)
    with pytest.raises(ValueError):
        spectral_action(sd, phi, -1)


def test_richardson_estimates():
    lam, est = richardson_1d(64, 10)
    n = np.rint(lam)
    np.testing.assert_array_equal(n, [-5, -4, -3, -2, -1, 1, 2, 3, 4, 5])
    # the estimate tracks the true error to leading order
    np.testing.assert_allclose(est, np.abs(lam - n), rtol=0.02)


def test_one_form_1d_membership():
    R = discretize_1d_example(32)
    with pytest.raises(NotInAlgebraError):
        build_one_form([(TrigPoly.cos(), TrigPoly.sin())], R)
    A = build_one_form([(TrigPoly.sin(), TrigPoly.cos(2))], R)
    np.testing.assert_allclose(A.A, A.A.conj().T, atol=1e-14)


def test_first_order_torus(small_torus):
    m, _ = small_torus
    a = TangentialFunction.from_dict({-1: 1.0, 2: 0.3j})
    b = TangentialFunction.from_dict({1: 1.0})
    assert first_order_residual(a, b, m) < 1e-10


def test_one_form_rejects_non_tangential(small_torus):
    m, _ = small_torus
    f = TangentialFunction.from_dict({1: 1.0}, radial=lambda x: x)
    with pytest.raises(NotInAlgebraError):
        build_one_form([(f, f)], m)


def test_weyl_small_torus(small_torus):
    _, sd = small_torus
    assert weyl_slope(sd)["slope"] == pytest.approx(2, abs=0.3)


def test_conjugation_small_torus(small_torus):
    m, _ = small_torus
    J = build_conjugation(m.gammas).J_prime
    res = half_torus_conjugation_residuals(J, m)
    assert res["residual"] < 1e-12 and res["boundary_residual"] < 1e-12


def test_pairing_and_tadpole_small_torus(small_torus):
    m, sd = small_torus
    J = build_conjugation(m.gammas).J_prime
    A = build_one_form([(TangentialFunction.from_dict({-1: 1.0, 1: 0.5}), TangentialFunction.from_dict({1: 1.0}))], m)
    pc = pairing_check(sd, J, m, A)
    assert pc["weight_residual"] < 1e-10 and pc["eigen_residual"] < 1e-10
    assert symmetric_spectrum_residual(sd) < 1e-10
    w = expectation_weights(sd, A, m)
    assert np.abs(w).max() > 0.1  # a nontrivial one-form
    tp = tadpole(sd, A, 0, model=m, atol=1e-8)
    assert abs(tp.fit.r) < 1e-8
    assert tp.max_partial_sum < 1e-10
    ctrl = tadpole(sd, symmetry_broken_control(m), 0, model=m)
    assert abs(ctrl.fit.r) > 0.1
    tp1 = tadpole(sd, A, 1, model=m, atol=1e-8)
    assert tp1.value == pytest.approx(-tp1.fit.r)


def test_tadpole_needs_vectors(small_torus):
    m, sd = small_torus
    bare = solve_half_torus(m, vectors=False)
    with pytest.raises(ValueError):
        tadpole(bare, symmetry_broken_control(m), 0, model=m)
    with pytest.raises(ValueError):
        tadpole(sd, symmetry_broken_control(m), -1, model=m)


def test_zeta_zero_correction_small(small_torus):
    m, sd = small_torus
    A = build_one_form([(TangentialFunction.from_dict({-1: 1.0}), TangentialFunction.from_dict({1: 1.0}))], m)
    out = zeta_zero_estimate(sd, A, m)
    assert set(out["terms"]) == {"1", "2"}
    assert abs(out["terms"]["1"]) < 1e-8  # the q = 1 term is the tadpole


def test_parallel_deterministic():
    from spectral_boundary.discretization import discretize_half_torus

    m = discretize_half_torus(24, 6)
    a = solve_half_torus(m, threads=1)
    b = solve_half_torus(m, threads=3)
    np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)
    np.testing.assert_array_equal(a.modes, b.modes)
    np.testing.assert_array_equal(a.eigenvectors, b.eigenvectors)


def test_io_roundtrip(tmp_path, small_torus):
    _, sd = small_torus
    write_spectrum_csv(tmp_path / "s.csv", sd)
    back = read_spectrum_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(back["eigenvalue"], sd.eigenvalues)
    np.testing.assert_array_equal(back["mode"], sd.modes)
    np.testing.assert_array_equal(back["kernel_flag"], sd.kernel_mask)
    write_eigvecs(tmp_path / "v.bin", sd.eigenvectors)
    raw = (tmp_path / "v.bin").read_bytes()
    m, count = np.frombuffer(raw[:16], "<i8")
    assert (count, m) == sd.eigenvectors.shape
    np.testing.assert_array_equal(read_eigvecs(tmp_path / "v.bin"), sd.eigenvectors)
    with pytest.raises(ValueError):
        write_eigvecs(tmp_path / "c.bin", 1j * np.ones((2, 2)))
