import numpy as np
import pytest

from app.errors import QuadratureError
from app.models.lattice import Characteristic, ShapeParameter
from app.models.series import QuadratureGrid
from app.services.lattice_sums import LatticeSumEvaluator
from app.services.quadrature_oracle import (
    avg_abs2_abs2,
    avg_abs4,
    avg_cross,
    cell_points,
    compare_with_lattice_sums,
    oracle_gamma_k,
    oracle_integrals,
)
from app.services.scan_runner import random_characteristic, random_reduced_tau
from app.services.stability_functions import gamma_k

from tests.conftest import HEX_VERTEX


class TestCellAverages:

    def test_abs4_is_beta(self, hex_tau, square_tau):
        assert avg_abs4(hex_tau) == pytest.approx(1.1595953, abs=1e-7)
        assert avg_abs4(square_tau) == pytest.approx(1.18034060, abs=1e-8)

    def test_abs2_abs2_matches_gamma_q1(self, hex_tau):
        q = Characteristic(0.27, -0.11)
        expected = LatticeSumEvaluator(hex_tau, 1e-12).gamma_q1_value(q.a, q.b)
        assert avg_abs2_abs2(hex_tau, q) == pytest.approx(expected, abs=1e-10)

    def test_cross_modulus_matches_gamma_q2(self, hex_tau):
        q = Characteristic(0.27, -0.11)
        expected = LatticeSumEvaluator(hex_tau, 1e-12).gamma_q2_value(q.a, q.b)
        assert abs(avg_cross(hex_tau, q)) == pytest.approx(abs(expected), abs=1e-10)

    def test_origin(self, hex_tau):
        integrals = oracle_integrals(hex_tau, Characteristic(0.0, 0.0))
        assert integrals.a_integral == pytest.approx(integrals.c_integral, abs=1e-10)
        assert abs(integrals.b_integral) == pytest.approx(integrals.c_integral, abs=1e-10)
        assert integrals.gamma_k == pytest.approx(2 * integrals.c_integral, abs=1e-9)

    def test_cell_points_shape(self, hex_tau):
        X = cell_points(hex_tau, QuadratureGrid(16, 32))
        assert X.shape == (16, 32)
        assert X[0, 0] == 0


class TestOracleComparison:

    def test_hexagonal_vertex(self, hex_tau):
        report = compare_with_lattice_sums(hex_tau, HEX_VERTEX)
        assert report['passed']
        assert oracle_gamma_k(hex_tau, HEX_VERTEX) == pytest.approx(0.68114748, abs=1e-7)

    def test_random_samples(self, rng):
        for _ in range(4):
            tau = ShapeParameter(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(0.9, 2.0)))
            q = Characteristic(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(-0.5, 0.5)))
            report = compare_with_lattice_sums(tau, q)
            assert report['passed'], report['residuals']
            assert set(report['residuals']) == {'gamma_q1', 'abs_gamma_q2', 'gamma_01', 'gamma_k'}

    def test_unreduced_input(self):
        tau = ShapeParameter(-1.2, 0.7)
        q = Characteristic(0.1, 0.4)
        expected = gamma_k(tau, q, 1e-12).gamma_k.value
        assert oracle_gamma_k(tau, q) == pytest.approx(expected, abs=1e-9)


class TestQuadratureFailures:

    def test_grid_too_coarse(self, hex_tau):
        with pytest.raises(QuadratureError):
            avg_abs4(hex_tau, grid=QuadratureGrid(8, 8))

    def test_no_convergence(self):
        # Im τ grande: |φ|² se concentra en franjas estrechas en u₂ y 32 nodos no bastan
        elongated = ShapeParameter(0.0, 10.0)
        with pytest.raises(QuadratureError) as info:
            avg_abs2_abs2(elongated, Characteristic(0.3, 0.1), max_grid=32)
        assert 'last_difference' in info.value.details


@pytest.mark.slow
class TestRandomOracleEquivalence:

    @pytest.mark.parametrize('seed', range(50))
    def test_matches_lattice_sums(self, seed):
        rng = np.random.default_rng(3000 + seed)
        tau = random_reduced_tau(rng, im_max=2.0)
        q = random_characteristic(rng)
        report = compare_with_lattice_sums(tau, q)
        assert report['passed'], report['residuals']
