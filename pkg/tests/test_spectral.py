"""Tests for eigenspectra, Stieltjes transforms, and the eta-solver."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confstrength import (
    InvalidInput,
    NoSolution,
    SingularPoint,
    Spectrum,
    eta_derivative,
    min_norm_regress,
    solve_eta,
    spectrum_of_gram,
    stieltjes,
)
from confstrength.spectral import kernel_spectrum


class TestSpectrum:
    def test_sorted_ascending(self):
        s = Spectrum(eigenvalues=np.array([3.0, 1.0, 2.0]), size=3)
        assert np.array_equal(s.eigenvalues, [1.0, 2.0, 3.0])

    def test_implicit_zero_count(self):
        s = Spectrum(eigenvalues=np.array([1.0, 2.0]), size=5)
        assert s.n_implicit_zeros == 3
        assert s.has_zero_mass()

    def test_no_zero_mass(self):
        s = Spectrum(eigenvalues=np.array([1.0, 2.0]), size=2)
        assert not s.has_zero_mass()

    def test_rejects_negative(self):
        with pytest.raises(InvalidInput):
            Spectrum(eigenvalues=np.array([-1.0, 2.0]), size=2)

    def test_rejects_overfull(self):
        with pytest.raises(InvalidInput):
            Spectrum(eigenvalues=np.array([1.0, 2.0, 3.0]), size=2)

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidInput):
            Spectrum(eigenvalues=np.array([np.inf]), size=1)


class TestSpectrumOfGram:
    def test_identity_gram(self):
        s = spectrum_of_gram(np.eye(2), scale=0.5)
        assert s.size == 2
        np.testing.assert_allclose(s.eigenvalues, [0.5, 0.5])

    def test_rank_one(self):
        s = spectrum_of_gram(np.array([[1.0, 0.0], [0.0, 0.0]]), scale=1.0)
        np.testing.assert_allclose(s.eigenvalues, [0.0, 1.0])

    def test_cov_kernel_share_nonzero_eigenvalues(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((50, 200))
        cov = spectrum_of_gram(X, scale=1 / 200, orient="cov")
        ker = spectrum_of_gram(X, scale=1 / 200, orient="kernel")
        assert cov.size == 50 and ker.size == 200
        assert ker.n_implicit_zeros + np.sum(ker.eigenvalues == 0) == 150
        np.testing.assert_allclose(cov.nonzero, ker.nonzero, rtol=1e-8)

    def test_rejects_bad_inputs(self):
        with pytest.raises(InvalidInput):
            spectrum_of_gram(np.array([[np.nan]]), scale=1.0)
        with pytest.raises(InvalidInput):
            spectrum_of_gram(np.eye(2), scale=0.0)
        with pytest.raises(InvalidInput):
            spectrum_of_gram(np.eye(2), scale=1.0, orient="rows")


class TestStieltjes:
    def test_point_mass_at_one(self):
        s = Spectrum(eigenvalues=np.array([1.0, 1.0, 1.0]), size=3)
        assert stieltjes(s, -1.0, order=1) == pytest.approx(0.5)

    def test_two_atoms_at_zero(self):
        s = Spectrum(eigenvalues=np.array([1.0, 3.0]), size=2)
        assert stieltjes(s, 0.0, order=1) == pytest.approx(2 / 3)

    def test_second_order(self):
        s = Spectrum(eigenvalues=np.array([1.0, 1.0]), size=2)
        assert stieltjes(s, -1.0, order=2) == pytest.approx(0.25)

    def test_implicit_zeros_counted(self):
        # {0, 0, 1, 3} as size-4 spectrum with two implicit zeros
        s = Spectrum(eigenvalues=np.array([1.0, 3.0]), size=4)
        expected = (1 / 2 + 1 / 4 + 2 * 1.0) / 4
        assert stieltjes(s, -1.0, order=1) == pytest.approx(expected)

    def test_rejects_evaluation_on_spectrum(self):
        s = Spectrum(eigenvalues=np.array([1.0, 3.0]), size=2)
        with pytest.raises(SingularPoint):
            stieltjes(s, 1.0)
        with pytest.raises(SingularPoint):
            stieltjes(Spectrum(eigenvalues=np.array([1.0]), size=2), 0.0)

    def test_order_two_matches_finite_difference(self):
        rng = np.random.default_rng(1)
        s = Spectrum(eigenvalues=np.sort(rng.uniform(0.5, 3.0, 20)), size=20)
        h = 1e-5
        fd = (stieltjes(s, -1.0 + h) - stieltjes(s, -1.0 - h)) / (2 * h)
        assert stieltjes(s, -1.0, order=2) == pytest.approx(fd, rel=1e-6)

    @given(st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=25, deadline=None)
    def test_monotone_increasing_on_negative_axis(self, seed):
        rng = np.random.default_rng(seed)
        s = Spectrum(eigenvalues=np.sort(rng.uniform(0.0, 4.0, 10)), size=12)
        pts = [-5.0, -2.0, -1.0, -0.5, -0.1]
        vals = [stieltjes(s, p) for p in pts]
        assert all(a < b for a, b in zip(vals, vals[1:]))


class TestSolveEta:
    def test_two_point_closed_form(self):
        # spectrum {0, 1}: (1/2)(1/(1-eta) - 1/eta) = 1 at eta = -1/sqrt(2)
        s = Spectrum(eigenvalues=np.array([0.0, 1.0]), size=2)
        assert solve_eta(s, theta=1.0) == pytest.approx(-1 / math.sqrt(2), abs=1e-10)

    def test_monotone_in_theta(self):
        s = Spectrum(eigenvalues=np.array([0.0, 1.0]), size=2)
        assert solve_eta(s, 100.0) < solve_eta(s, 1.0)

    def test_residual_on_gaussian_sample(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((100, 400))
        ker = spectrum_of_gram(X, scale=1 / 400, orient="kernel")
        eta = solve_eta(ker, theta=0.5)
        assert eta < 0
        assert stieltjes(ker, eta) == pytest.approx(2.0, abs=1e-10 * 2.0)

    def test_rejects_nonpositive_theta(self):
        s = Spectrum(eigenvalues=np.array([0.0, 1.0]), size=2)
        with pytest.raises(InvalidInput):
            solve_eta(s, 0.0)

    def test_no_solution_without_zero_mass(self):
        # sup of the transform on the negative axis is 1 here; 1/theta = 2 > 1
        s = Spectrum(eigenvalues=np.array([1.0, 1.0]), size=2)
        with pytest.raises(NoSolution):
            solve_eta(s, theta=0.5)

    @given(st.floats(min_value=0.05, max_value=50.0))
    @settings(max_examples=30, deadline=None)
    def test_residual_always_within_tolerance(self, theta):
        s = Spectrum(eigenvalues=np.array([0.0, 0.4, 1.0, 2.5]), size=4)
        eta = solve_eta(s, theta)
        assert eta < 0
        assert abs(stieltjes(s, eta) - 1 / theta) <= 1e-10 / theta


class TestEtaDerivative:
    def test_positive(self):
        s = Spectrum(eigenvalues=np.array([0.0, 1.0]), size=2)
        eta = solve_eta(s, 1.0)
        assert eta_derivative(s, 1.0, eta) > 0

    def test_two_point_value_vs_finite_difference(self):
        # analytic check: eta' = 1/(theta^2 m~'(eta)) and d(eta)/d(theta) = -eta'
        s = Spectrum(eigenvalues=np.array([0.0, 1.0]), size=2)
        eta = solve_eta(s, 1.0)
        m2 = 0.5 * (1.0 / (1.0 - eta) ** 2 + 1.0 / eta**2)
        assert eta_derivative(s, 1.0, eta) == pytest.approx(1.0 / m2, rel=1e-10)
        h = 1e-6
        fd = (solve_eta(s, 1.0 + h) - solve_eta(s, 1.0 - h)) / (2 * h)
        assert eta_derivative(s, 1.0, eta) == pytest.approx(-fd, rel=1e-4)

    def test_gaussian_sample_vs_finite_difference(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((100, 400))
        ker = spectrum_of_gram(X, scale=1 / 400, orient="kernel")
        theta, h = 0.5, 1e-5
        eta = solve_eta(ker, theta)
        fd = (solve_eta(ker, theta + h) - solve_eta(ker, theta - h)) / (2 * h)
        assert eta_derivative(ker, theta, eta) == pytest.approx(-fd, rel=1e-4)


class TestMinNormRegress:
    def test_identity_design(self):
        Y = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(min_norm_regress(np.eye(3), Y), Y)

    def test_min_norm_on_rank_deficient_design(self):
        X = np.array([[1.0, 1.0], [0.0, 0.0]])
        Y = np.array([1.0, 1.0])
        np.testing.assert_allclose(min_norm_regress(X, Y), [1.0, 0.0], atol=1e-12)

    def test_residual_orthogonal_to_row_space(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((5, 20))
        Y = rng.standard_normal(20)
        beta = min_norm_regress(X, Y)
        resid = Y - X.T @ beta
        np.testing.assert_allclose(X @ resid, np.zeros(5), atol=1e-10)

    def test_recovers_row_space_coefficients(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((5, 20))
        b = rng.standard_normal(5)
        np.testing.assert_allclose(min_norm_regress(X, X.T @ b), b, atol=1e-10)

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidInput):
            min_norm_regress(np.array([[np.nan]]), np.array([1.0]))


def test_cov_kernel_transform_identity():
    # m_cov(z) = m_ker(z)/gamma + (1 - gamma)/(gamma z) for d < n
    rng = np.random.default_rng(6)
    X = rng.standard_normal((40, 160))
    cov = spectrum_of_gram(X, scale=1 / 160, orient="cov")
    ker = kernel_spectrum(cov, 160)
    gamma = 40 / 160
    z = -0.7
    lhs = stieltjes(cov, z)
    rhs = stieltjes(ker, z) / gamma + (1 - gamma) / (gamma * z)
    assert lhs == pytest.approx(rhs, rel=1e-12)
