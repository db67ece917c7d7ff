import math

import numpy as np
import pytest
from scipy.optimize import brentq

from app.errors import DomainError, PrecisionError
from app.models.lattice import Characteristic, ShapeParameter, periodic_distance
from app.models.stability import StabilityKind
from app.services.lattice_geometry import wigner_seitz_vertices
from app.services.scan_runner import random_characteristic, random_reduced_tau
from app.services.stability_functions import (
    b_closeness_ratio,
    beta,
    classify,
    critical_point_residuals,
    gamma,
    gamma_k,
    kappa_c,
    kappa_c_from_beta,
    monotonicity_report,
    symmetry_residuals,
    tau_derivatives,
)

from tests.conftest import HEX_VERTEX, SQUARE_VERTEX


class TestGammaMinimum:

    def test_hexagonal(self, hex_tau):
        result = gamma(hex_tau, 1e-10)
        assert result.value.value == pytest.approx(0.68114748, abs=1e-5)
        assert result.value.remainder_bound <= 1e-10
        distance = min(periodic_distance(result.argmin_q, HEX_VERTEX),
                       periodic_distance(result.argmin_q, HEX_VERTEX.negated()))
        assert distance < 1e-2
        assert any(entry.converged for entry in result.multistart_trace)

    def test_square(self, square_tau):
        result = gamma(square_tau, 1e-10)
        assert result.value.value == pytest.approx(0.4889130843, abs=1e-5)
        assert periodic_distance(result.argmin_q, SQUARE_VERTEX) < 1e-2

    def test_minimum_below_sampled_values(self, hex_tau, rng):
        minimum = gamma(hex_tau, 1e-8).value.value
        for _ in range(20):
            q = Characteristic(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(-0.5, 0.5)))
            assert gamma_k(hex_tau, q, 1e-8).gamma_k.value >= minimum - 1e-8

    def test_wigner_seitz_domain(self, hex_tau):
        cell = gamma(hex_tau, 1e-8)
        folded = gamma(hex_tau, 1e-8, domain='wigner_seitz')
        assert folded.value.value == pytest.approx(cell.value.value, abs=1e-6)
        vertex_norm = abs(wigner_seitz_vertices(hex_tau)[0].k(hex_tau))
        assert abs(folded.argmin_q.k(hex_tau)) <= vertex_norm + 1e-6
        assert folded.domain == 'wigner_seitz'

    def test_unknown_domain(self, hex_tau):
        with pytest.raises(ValueError):
            gamma(hex_tau, 1e-8, domain='sphere')

    def test_unreduced_input(self):
        shifted = gamma(ShapeParameter(1.5, math.sqrt(3) / 2), 1e-8)
        assert shifted.value.value == pytest.approx(0.68114748, abs=1e-5)
        assert shifted.tau.re == pytest.approx(0.5)

    def test_imaginary_axis_root(self):
        f = lambda t: gamma(ShapeParameter(0.0, t), 1e-8).value.value
        assert f(3.0) < 0
        root = brentq(f, 1.2, 2.5, xtol=1e-4)
        assert root == pytest.approx(math.sqrt(3), abs=0.01)


class TestBetaAndKappa:

    def test_beta(self, hex_tau):
        value = beta(hex_tau, 1e-12)
        assert value.value == pytest.approx(1.1595953, abs=1e-7)
        assert value.value >= 1

    def test_kappa_c(self, hex_tau):
        value = kappa_c(hex_tau, 1e-12)
        assert value.value == pytest.approx(0.262327, abs=1e-6)
        assert value.remainder_bound < 1e-10

    def test_kappa_c_propagates_bound(self):
        value = kappa_c_from_beta(1.2, 1e-4)
        low, high = value.interval()
        assert low <= math.sqrt(0.5 * (1 - 1 / (1.2 - 1e-4)))
        assert high >= math.sqrt(0.5 * (1 - 1 / (1.2 + 1e-4)))

    def test_precision_errors(self):
        with pytest.raises(PrecisionError):
            kappa_c_from_beta(0.99)
        with pytest.raises(PrecisionError):
            kappa_c_from_beta(1.0000001, 1e-6)

    def test_b_closeness_ratio(self):
        assert b_closeness_ratio(1.0, 0.99, 1.1595953) == pytest.approx(0.01 / 2.1595953)
        assert b_closeness_ratio(0.1, 0.005, 1.16) == math.inf


class TestClassify:

    def test_stable_hexagonal(self, hex_tau):
        verdict = classify(hex_tau, 1.0, 0.99, 1e-8)
        assert verdict.verdict == StabilityKind.ASYMPTOTICALLY_STABLE
        assert verdict.diagnostics['gamma_sign'] == 1
        assert verdict.diagnostics['mu_star_sign'] == 1
        assert verdict.diagnostics['epsilon'] == pytest.approx(math.sqrt(0.01 / 2.1595953), rel=1e-5)

    def test_type_one_is_unstable(self, hex_tau):
        verdict = classify(hex_tau, 0.6, 0.35, 1e-8)
        assert verdict.verdict == StabilityKind.ENERGETICALLY_UNSTABLE
        assert verdict.diagnostics['kappa2_minus_half_sign'] == -1

    def test_elongated_lattice_is_unstable(self):
        verdict = classify(ShapeParameter(0.0, 3.0), 1.0, 0.99, 1e-8)
        assert verdict.verdict == StabilityKind.ENERGETICALLY_UNSTABLE
        assert verdict.diagnostics['gamma_sign'] == -1

    def test_outside_regime(self, hex_tau):
        verdict = classify(hex_tau, 1.0, 0.1, 1e-8)
        assert verdict.verdict == StabilityKind.OUTSIDE_REGIME
        assert verdict.diagnostics['b_closeness_ratio'] > 0.1
        assert 'gamma' not in verdict.diagnostics

    def test_ratio_threshold_is_configurable(self, hex_tau):
        verdict = classify(hex_tau, 1.0, 0.1, 1e-8, b_cond_ratio=1.0)
        assert verdict.verdict == StabilityKind.ASYMPTOTICALLY_STABLE

    def test_invalid_parameters(self, hex_tau):
        with pytest.raises(DomainError):
            classify(hex_tau, 0.0, 0.9, 1e-8)
        with pytest.raises(DomainError):
            classify(hex_tau, 1.0, -0.5, 1e-8)

    def test_serializes(self, hex_tau):
        data = classify(hex_tau, 1.0, 0.1, 1e-8).to_dict()
        assert data['verdict'] == 'OutsideRegime'


class TestSymmetries:

    def test_symmetry_residuals(self, hex_tau, square_tau, rng):
        for tau in (hex_tau, square_tau, ShapeParameter(0.21, 1.4)):
            for _ in range(3):
                q = Characteristic(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(-0.5, 0.5)))
                residuals = symmetry_residuals(tau, q, 1e-10)
                failed = {name: entry for name, entry in residuals.items() if not entry['passed']}
                assert not failed

    def test_half_lattice_gradients_vanish(self, hex_tau, square_tau):
        for tau in (hex_tau, square_tau, ShapeParameter(-0.3, 1.2)):
            report = critical_point_residuals(tau, include_tau_points=False)
            assert len(report['half_lattice']) == 4
            assert all(entry['gradient_norm'] <= 1e-6 for entry in report['half_lattice'])
            assert 'tau_points' not in report

    def test_monotonicity_report(self):
        report = monotonicity_report(0.0, [1.0, 2.0, 2.5], 1e-8)
        assert len(report['points']) == 3
        assert report['points'][0]['gamma'] > report['points'][-1]['gamma']

    @pytest.mark.slow
    def test_tau_critical_points(self, hex_tau, square_tau):
        hexagonal = tau_derivatives(hex_tau)
        assert abs(hexagonal['re_central']) <= 1e-3
        assert hexagonal['gradient_norm'] <= 1e-3
        square = tau_derivatives(square_tau)
        assert abs(square['re_central']) <= 1e-3
        assert abs(square['im_central']) <= 1e-3


@pytest.mark.slow
class TestRandomSymmetries:

    @pytest.mark.parametrize('seed', range(200))
    def test_identities_hold_to_bounds(self, seed):
        rng = np.random.default_rng(4000 + seed)
        residuals = symmetry_residuals(random_reduced_tau(rng, im_max=2.0), random_characteristic(rng), 1e-10)
        failed = {name: entry for name, entry in residuals.items() if not entry['passed']}
        assert not failed
