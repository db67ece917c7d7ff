import math

import mpmath
import numpy as np
import pytest

from app.errors import ToleranceError
from app.models.lattice import Characteristic, ShapeParameter
from app.models.series import QuadratureGrid, ThetaSeriesParams
from app.services.quadrature_oracle import cell_points
from app.services.theta import (
    NormalizedCellFunction,
    abs2_fourier_coefficient,
    annihilator_residual,
    cauchy_riemann_residual,
    covariant_derivative,
    landau_levels,
    params_for,
    phi_k,
    quasi_periodicity_defect,
    theta_q,
    truncation_residual,
)


def jacobi_theta3(z: complex, tau: ShapeParameter) -> complex:
    nome = mpmath.exp(1j * mpmath.pi * tau.value)
    return complex(mpmath.jtheta(3, mpmath.pi * z, nome))


class TestThetaSeries:

    def test_matches_mpmath(self, hex_tau, square_tau):
        for tau in (hex_tau, square_tau, ShapeParameter(0.3, 2.2)):
            for z in (0.0, 0.31 + 0.2j, -0.4 + 0.7j, 1.7 - 0.3j):
                value = theta_q(z, tau, Characteristic(0.0, 0.0))
                assert abs(value - jacobi_theta3(z, tau)) <= 1e-10 * max(1.0, abs(value))

    def test_b_shift(self, hex_tau):
        z = 0.2 + 0.1j
        value = theta_q(z, hex_tau, Characteristic(0.0, 0.25))
        assert abs(value - jacobi_theta3(z + 0.25, hex_tau)) < 1e-10

    def test_entire(self, hex_tau):
        z = np.array([0.1 + 0.2j, 0.6 + 0.5j, -0.3 + 0.1j])
        residual = cauchy_riemann_residual(z, hex_tau, Characteristic(0.2, -0.1))
        assert np.all(residual < 1e-8)

    def test_short_window_raises(self, hex_tau):
        with pytest.raises(ToleranceError) as info:
            theta_q(0.1, hex_tau, Characteristic(0.0, 0.0), ThetaSeriesParams(m_max=1))
        assert info.value.achievable_bound > 1e-12

    def test_params_for_meets_target(self, hex_tau):
        params = params_for(hex_tau, 1e-12)
        assert params.m_max >= 2
        NormalizedCellFunction.build(hex_tau, Characteristic(0.1, 0.2), params)


class TestPhi:

    def test_normalized(self, hex_tau, square_tau):
        for tau in (hex_tau, square_tau):
            X = cell_points(tau, QuadratureGrid(64, 64))
            for q in (Characteristic(0.0, 0.0), Characteristic(0.3, -0.2), Characteristic(0.5, 0.5)):
                assert np.mean(np.abs(phi_k(X, tau, q)) ** 2) == pytest.approx(1.0, abs=1e-10)

    def test_annihilated(self, hex_tau):
        for q in (Characteristic(0.0, 0.0), Characteristic(1 / 3, -1 / 3)):
            assert annihilator_residual(hex_tau, q) < 1e-9

    def test_quasi_periodicity(self, hex_tau, square_tau):
        for tau in (hex_tau, square_tau):
            q = Characteristic(0.21, 0.4)
            assert quasi_periodicity_defect(tau, q) < 1e-10

    def test_defect_does_not_depend_on_window(self, hex_tau):
        q = Characteristic(0.21, 0.4)
        assert quasi_periodicity_defect(hex_tau, q, ThetaSeriesParams(m_max=1, target_tol=1.0)) < 1e-10

    def test_truncation_residual_grows_with_short_window(self, hex_tau, square_tau):
        q = Characteristic(0.21, 0.4)
        for tau in (hex_tau, square_tau):
            residuals = [truncation_residual(tau, q, ThetaSeriesParams(m_max=m, target_tol=1.0)) for m in (1, 2)]
            full = truncation_residual(tau, q)
            assert residuals[0] > 1e-5
            assert residuals[0] > 100 * residuals[1]
            assert full < 1e-12

    def test_scalar_and_array(self, hex_tau):
        q = Characteristic(0.1, 0.2)
        x = 0.7 + 0.4j
        assert phi_k(x, hex_tau, q) == pytest.approx(phi_k(np.array([x]), hex_tau, q)[0])

    def test_abs2_fourier_coefficients(self, hex_tau):
        n = 32
        X = cell_points(hex_tau, QuadratureGrid(n, n))
        for q in (Characteristic(0.0, 0.0), Characteristic(0.3, -0.15)):
            spectrum = np.fft.fft2(np.abs(phi_k(X, hex_tau, q)) ** 2) / n ** 2
            for j1, j2 in ((0, 0), (1, 0), (0, 1), (1, 1), (-1, 2), (2, -1)):
                expected = abs2_fourier_coefficient(hex_tau, q, j1, j2)
                assert abs(spectrum[j1 % n, j2 % n] - expected) < 1e-10


class TestLandauLevels:

    def test_first_level_is_covariant_derivative(self, hex_tau):
        q = Characteristic(0.2, -0.3)
        X = cell_points(hex_tau, QuadratureGrid(16, 16), centered=True).ravel()
        levels = landau_levels(X, hex_tau, q, 1)
        assert np.allclose(levels[0], phi_k(X, hex_tau, q), atol=1e-10)
        assert np.allclose(levels[1], -covariant_derivative(X, hex_tau, q), atol=1e-9)

    def test_norms(self, hex_tau, square_tau):
        for tau in (hex_tau, square_tau):
            X = cell_points(tau, QuadratureGrid(96, 96)).ravel()
            levels = landau_levels(X, tau, Characteristic(0.1, 0.25), 4)
            norms = np.mean(np.abs(levels) ** 2, axis=1)
            expected = [2 ** n * math.factorial(n) for n in range(5)]
            assert np.allclose(norms, expected, rtol=1e-8)

    def test_levels_are_orthogonal(self, hex_tau):
        X = cell_points(hex_tau, QuadratureGrid(96, 96)).ravel()
        levels = landau_levels(X, hex_tau, Characteristic(0.0, 0.0), 3)
        gram = levels.conj() @ levels.T / X.size
        off = gram - np.diag(np.diag(gram))
        assert np.max(np.abs(off)) < 1e-8

    def test_shape(self, hex_tau):
        X = np.zeros((3, 5), dtype=complex)
        assert landau_levels(X, hex_tau, Characteristic(0.0, 0.0), 2).shape == (3, 3, 5)
