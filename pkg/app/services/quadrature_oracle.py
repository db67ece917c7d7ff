# app/services/quadrature_oracle.py
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np

from app.errors import QuadratureError
from app.models.lattice import Characteristic, ShapeParameter
from app.models.series import QuadratureGrid, ThetaSeriesParams
from app.services.lattice_geometry import ensure_reduced, frame, transport_characteristic
from app.services.lattice_sums import LatticeSumEvaluator
from app.services.theta import params_for, phi_k

logger = logging.getLogger(__name__)

MIN_GRID = 16
DEFAULT_MAX_GRID = 512
DEFAULT_TOL = 1e-12

ABS2_ABS2 = 'abs2_abs2'
CROSS = 'cross'
ABS4 = 'abs4'
ALL_KINDS = (ABS2_ABS2, CROSS, ABS4)


def cell_points(tau: ShapeParameter, grid: QuadratureGrid, centered: bool = False) -> np.ndarray:
    """Nodos x = ω(u₁ + u₂τ) de la regla del trapecio periódica sobre la celda"""
    shift = 0.5 if centered else 0.0
    u1 = (np.arange(grid.n1) + shift) / grid.n1
    u2 = (np.arange(grid.n2) + shift) / grid.n2
    U1, U2 = np.meshgrid(u1, u2, indexing='ij')
    return frame(tau).omega * (U1 + U2 * tau.value)


def _estimate(X: np.ndarray, tau: ShapeParameter, q: Characteristic, params: ThetaSeriesParams,
              kinds: Sequence[str]) -> np.ndarray:
    """
    Medias de celda normalizadas por las normas calculadas en la misma malla:
    A = ⟨|φ₀|²|φ_q|²⟩/(n₀n_q), B = ⟨φ₀²φ̄_qφ̄_{−q}⟩/(n₀√(n_q n_{−q})), C = ⟨|φ₀|⁴⟩/n₀²
    """
    phi0 = phi_k(X, tau, Characteristic(0.0, 0.0), params)
    abs0 = np.abs(phi0) ** 2
    n0 = np.mean(abs0)
    out = []
    phiq = phimq = None
    for kind in kinds:
        if kind in (ABS2_ABS2, CROSS) and phiq is None:
            phiq = phi_k(X, tau, q, params)
        if kind == ABS2_ABS2:
            absq = np.abs(phiq) ** 2
            out.append(np.mean(abs0 * absq) / (n0 * np.mean(absq)))
        elif kind == CROSS:
            if phimq is None:
                phimq = phi_k(X, tau, q.negated(), params)
            nq = np.mean(np.abs(phiq) ** 2)
            nmq = np.mean(np.abs(phimq) ** 2)
            out.append(np.mean(phi0 ** 2 * np.conj(phiq) * np.conj(phimq)) / (n0 * math.sqrt(nq * nmq)))
        elif kind == ABS4:
            out.append(np.mean(abs0 ** 2) / n0 ** 2)
        else:
            raise ValueError(f"Integral desconocida: {kind}")
    return np.array(out, dtype=complex)


def _converged(tau: ShapeParameter, q: Characteristic, kinds: Sequence[str],
               grid: Optional[QuadratureGrid], params: Optional[ThetaSeriesParams],
               tol: float, max_grid: int):
    """
    Duplica la malla hasta que dos estimaciones consecutivas difieran ≤ tol (relativo).

    Raises:
        QuadratureError: si la malla inicial es menor que 16² o no converge antes de max_grid
    """
    grid = grid or QuadratureGrid(MIN_GRID, MIN_GRID)
    if min(grid.n1, grid.n2) < MIN_GRID:
        raise QuadratureError(f"Malla demasiado gruesa: {grid.n1}x{grid.n2} < {MIN_GRID}x{MIN_GRID}")
    reduced, g = ensure_reduced(tau)
    q = transport_characteristic(q, g).centered()
    params = params or params_for(reduced, 1e-12)

    previous = _estimate(cell_points(reduced, grid), reduced, q, params, kinds)
    difference = math.inf
    current = grid
    while max(current.n1, current.n2) < max_grid:
        current = current.doubled()
        estimate = _estimate(cell_points(reduced, current), reduced, q, params, kinds)
        difference = float(np.max(np.abs(estimate - previous)))
        if difference <= tol * max(1.0, float(np.max(np.abs(estimate)))):
            logger.debug(f"🔎 Quadrature converged on {current.n1}x{current.n2} for τ={reduced}")
            return estimate, current, difference
        previous = estimate
    raise QuadratureError(
        f"La cuadratura no convergió a {tol:g} con malla {max_grid} (τ={reduced})",
        details={'last_difference': difference},
    )


def avg_abs2_abs2(tau: ShapeParameter, q: Characteristic, grid: Optional[QuadratureGrid] = None,
                  theta_params: Optional[ThetaSeriesParams] = None,
                  tol: float = DEFAULT_TOL, max_grid: int = DEFAULT_MAX_GRID) -> float:
    """⟨|φ₀|²|φ_q|²⟩ normalizado"""
    estimate, _, _ = _converged(tau, q, (ABS2_ABS2,), grid, theta_params, tol, max_grid)
    return float(estimate[0].real)


def avg_cross(tau: ShapeParameter, q: Characteristic, grid: Optional[QuadratureGrid] = None,
              theta_params: Optional[ThetaSeriesParams] = None,
              tol: float = DEFAULT_TOL, max_grid: int = DEFAULT_MAX_GRID) -> complex:
    """⟨φ₀² φ̄_q φ̄_{−q}⟩ normalizado"""
    estimate, _, _ = _converged(tau, q, (CROSS,), grid, theta_params, tol, max_grid)
    return complex(estimate[0])


def avg_abs4(tau: ShapeParameter, grid: Optional[QuadratureGrid] = None,
             theta_params: Optional[ThetaSeriesParams] = None,
             tol: float = DEFAULT_TOL, max_grid: int = DEFAULT_MAX_GRID) -> float:
    """⟨|φ₀|⁴⟩ normalizado = β(τ)"""
    estimate, _, _ = _converged(tau, Characteristic(0.0, 0.0), (ABS4,), grid, theta_params, tol, max_grid)
    return float(estimate[0].real)


@dataclass(frozen=True)
class OracleIntegrals:
    a_integral: float
    b_integral: complex
    c_integral: float
    grid: int
    difference: float

    @property
    def gamma_k(self) -> float:
        return 2 * self.a_integral + abs(self.b_integral) - self.c_integral

    def to_dict(self) -> Dict[str, Any]:
        return {
            'A': self.a_integral,
            'B': {'re': self.b_integral.real, 'im': self.b_integral.imag},
            'C': self.c_integral,
            'gamma_k': self.gamma_k,
            'grid': self.grid,
            'difference': self.difference,
        }


def oracle_integrals(tau: ShapeParameter, q: Characteristic, tol: float = DEFAULT_TOL,
                     grid: Optional[QuadratureGrid] = None, max_grid: int = DEFAULT_MAX_GRID,
                     params: Optional[ThetaSeriesParams] = None) -> OracleIntegrals:
    """Las tres medias en una sola pasada de mallas"""
    estimate, used, difference = _converged(tau, q, ALL_KINDS, grid, params, tol, max_grid)
    return OracleIntegrals(
        a_integral=float(estimate[0].real),
        b_integral=complex(estimate[1]),
        c_integral=float(estimate[2].real),
        grid=used.n1,
        difference=difference,
    )


def oracle_gamma_k(tau: ShapeParameter, q: Characteristic, tol: float = DEFAULT_TOL,
                   grid: Optional[QuadratureGrid] = None, max_grid: int = DEFAULT_MAX_GRID) -> float:
    """γ_k(τ) = 2A + |B| − C por cuadratura directa de las funciones φ"""
    return oracle_integrals(tau, q, tol, grid, max_grid).gamma_k


def compare_with_lattice_sums(tau: ShapeParameter, q: Characteristic, tol: float = 1e-10) -> Dict[str, Any]:
    """Diferencias entre las medias de celda y las sumas de red certificadas"""
    reduced, g = ensure_reduced(tau)
    c = transport_characteristic(q, g).centered()
    integrals = oracle_integrals(reduced, c)
    evaluator = LatticeSumEvaluator(reduced, tol / 4)
    q1 = evaluator.gamma_q1_value(c.a, c.b)
    q2 = evaluator.gamma_q2_value(c.a, c.b)
    g01 = evaluator.gamma_01_value()
    slack = 4 * evaluator.bound + 1e-9
    residuals = {
        'gamma_q1': abs(integrals.a_integral - q1),
        'abs_gamma_q2': abs(abs(integrals.b_integral) - abs(q2)),
        'gamma_01': abs(integrals.c_integral - g01),
        'gamma_k': abs(integrals.gamma_k - (2 * q1 + abs(q2) - g01)),
    }
    return {
        'residuals': residuals,
        'bound': slack,
        'passed': all(v <= slack for v in residuals.values()),
        'grid': integrals.grid,
    }
