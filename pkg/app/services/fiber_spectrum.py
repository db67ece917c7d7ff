# app/services/fiber_spectrum.py
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from app.errors import RegimeError
from app.models.certified import CertifiedValue
from app.models.lattice import Characteristic, ShapeParameter
from app.models.series import QuadratureGrid
from app.models.stability import F2Matrix, MuPair, PerturbationParams
from app.services.lattice_geometry import ensure_reduced, frame, transport_characteristic
from app.services.lattice_sums import LatticeSumEvaluator
from app.services.quadrature_oracle import cell_points
from app.services.stability_functions import beta as beta_of, gamma as gamma_min
from app.services.theta import abs2_fourier_coefficient, covariant_derivative, params_for, phi_k

logger = logging.getLogger(__name__)

DEFAULT_A1_SHELLS = 6
A1_TEST_GRID = 32


def epsilon_of(kappa: float, b_field: float, beta: float) -> float:
    """
    ε = √((κ² − b)/(κ²[(2κ² − 1)β + 1]))

    Raises:
        RegimeError: si el radicando es negativo (b y κ² del lado equivocado de κ_c)
    """
    k2 = kappa * kappa
    numerator = k2 - b_field
    denominator = k2 * ((2 * k2 - 1) * beta + 1)
    if numerator == 0:
        return 0.0
    if denominator == 0 or numerator / denominator < 0:
        raise RegimeError(
            f"Radicando negativo para ε (κ={kappa}, b={b_field}, β={beta}): "
            f"si κ > κ_c se requiere b < κ²",
            details={'kappa': kappa, 'b_field': b_field, 'beta': beta},
        )
    return math.sqrt(numerator / denominator)


def lambda1_of(kappa: float, beta: float) -> float:
    """λ¹ = ½ + (κ² − ½)β, con ⟨|φ₀|²⟩ = 1"""
    return 0.5 + (kappa * kappa - 0.5) * beta


def perturbation_params(tau: ShapeParameter, kappa: float, b_field: float, tol: float = 1e-10) -> PerturbationParams:
    beta = beta_of(tau, tol).value
    return PerturbationParams(
        kappa=kappa,
        b_field=b_field,
        beta=beta,
        epsilon=epsilon_of(kappa, b_field, beta),
        lambda1=lambda1_of(kappa, beta),
    )


@dataclass(frozen=True)
class A1Fourier:
    """
    a¹ complexificado, a¹ = a₁ − ia₂ = Σ α_T e^{iT·x}, con α_T = c_T(|φ₀|²)/(2T) y α₀ = 0.
    Resuelve i∂̄a¹ = ½(1 − |φ₀|²) y Δa¹ = (i/2)φ̄₀∂_{a⁰}φ₀.
    """
    tau: ShapeParameter
    j1: np.ndarray
    j2: np.ndarray
    dual_points: np.ndarray
    coefficients: np.ndarray

    def evaluate(self, x) -> np.ndarray:
        X = np.asarray(x, dtype=complex)
        phases = np.exp(1j * np.real(np.conj(self.dual_points)[:, None] * X.ravel()[None, :]))
        return (self.coefficients @ phases).reshape(X.shape)

    def i_dbar(self, x) -> np.ndarray:
        """i∂̄a¹, con ∂̄e^{iT·x} = iT e^{iT·x}"""
        X = np.asarray(x, dtype=complex)
        phases = np.exp(1j * np.real(np.conj(self.dual_points)[:, None] * X.ravel()[None, :]))
        return ((-self.dual_points * self.coefficients) @ phases).reshape(X.shape)

    def laplacian(self, x) -> np.ndarray:
        X = np.asarray(x, dtype=complex)
        phases = np.exp(1j * np.real(np.conj(self.dual_points)[:, None] * X.ravel()[None, :]))
        return ((-np.abs(self.dual_points) ** 2 * self.coefficients) @ phases).reshape(X.shape)

    def coefficient(self, j1: int, j2: int) -> complex:
        mask = (self.j1 == j1) & (self.j2 == j2)
        return complex(self.coefficients[mask][0]) if mask.any() else 0j

    def as_dict(self) -> Dict[tuple, complex]:
        return {(int(a), int(b)): complex(c) for a, b, c in zip(self.j1, self.j2, self.coefficients)}


def a1_fourier(tau: ShapeParameter, shell_cutoff: int = DEFAULT_A1_SHELLS) -> A1Fourier:
    if shell_cutoff < 1:
        raise ValueError(f"shell_cutoff debe ser ≥ 1: {shell_cutoff}")
    reduced, _ = ensure_reduced(tau)
    lattice_frame = frame(reduced)
    idx = np.arange(-shell_cutoff, shell_cutoff + 1)
    J1, J2 = np.meshgrid(idx, idx, indexing='ij')
    j1, j2 = J1.ravel(), J2.ravel()
    dual = j2 * lattice_frame.dual_basis[0] + j1 * lattice_frame.dual_basis[1]
    c = abs2_fourier_coefficient(reduced, Characteristic(0.0, 0.0), j1, j2)
    coefficients = np.zeros(dual.shape, dtype=complex)
    nonzero = (j1 != 0) | (j2 != 0)
    coefficients[nonzero] = c[nonzero] / (2 * dual[nonzero])
    return A1Fourier(tau=reduced, j1=j1, j2=j2, dual_points=dual, coefficients=coefficients)


def a1_residuals(tau: ShapeParameter, shell_cutoff: int = DEFAULT_A1_SHELLS,
                 grid: int = A1_TEST_GRID) -> Dict[str, float]:
    """
    Residuos máximos en una malla de prueba de i∂̄a¹ + ½(|φ₀|² − 1) y de
    Δa¹ − (i/2)φ̄₀∂_{a⁰}φ₀, con φ₀ evaluada por la serie theta.
    """
    a1 = a1_fourier(tau, shell_cutoff)
    reduced = a1.tau
    X = cell_points(reduced, QuadratureGrid(grid, grid), centered=True).ravel()
    params = params_for(reduced)
    zero = Characteristic(0.0, 0.0)
    phi0 = phi_k(X, reduced, zero, params)
    d_phi0 = covariant_derivative(X, reduced, zero, params)
    values = a1.evaluate(X)
    return {
        'curl_equation': float(np.max(np.abs(a1.i_dbar(X) + 0.5 * (np.abs(phi0) ** 2 - 1)))),
        'laplace_equation': float(np.max(np.abs(a1.laplacian(X) - 0.5j * np.conj(phi0) * d_phi0))),
        'mean': float(abs(np.mean(values))),
    }


def _prepared(tau: ShapeParameter, q: Characteristic):
    reduced, g = ensure_reduced(tau)
    return reduced, transport_characteristic(q, g).centered()


def f2_matrix(tau: ShapeParameter, q: Characteristic, kappa: float, tol: float = 1e-10) -> F2Matrix:
    """
    Bloque de segundo orden en la base (v⁰₁, v⁰₂) del núcleo de K⁰_k:
    diagonal (κ² − ½)(2⟨|φ₀|²|φ_k|²⟩ − β) + δ_{k,0}, fuera de la diagonal (κ² − ½)⟨φ₀²φ̄_kφ̄_{−k}⟩.
    """
    reduced, c = _prepared(tau, q)
    evaluator = LatticeSumEvaluator(reduced, tol / 4)
    a_value = evaluator.gamma_q1(c)
    b_value = evaluator.gamma_q2(c)
    beta = evaluator.gamma_01()
    factor = kappa * kappa - 0.5
    delta = 1.0 if c.is_origin() else 0.0

    diagonal = factor * (2 * a_value.value - beta.value) + delta
    off = factor * b_value.value
    entries = np.array([[diagonal, off], [np.conj(off), diagonal]], dtype=complex)
    return F2Matrix(
        entries=entries,
        diagonal_bound=abs(factor) * (2 * a_value.remainder_bound + beta.remainder_bound),
        off_diagonal_bound=abs(factor) * b_value.remainder_bound,
        delta_k0=delta,
    )


def mu_pm(tau: ShapeParameter, q: Characteristic, kappa: float, tol: float = 1e-10) -> MuPair:
    """
    Autovalores ordenados μ₋ ≤ μ₊ de F₂:
    (κ² − ½)(2⟨|φ₀|²|φ_k|²⟩ − β) + δ_{k,0} ∓ |κ² − ½| |⟨φ₀²φ̄_kφ̄_{−k}⟩|.

    Para κ² < ½ la rama "+" de la fórmula es el menor (MuPair.formula_plus).
    """
    f2 = f2_matrix(tau, q, kappa, tol)
    factor = kappa * kappa - 0.5
    diagonal = float(f2.entries[0, 0].real)
    split = abs(f2.entries[0, 1])
    return MuPair(
        minus=diagonal - split,
        plus=diagonal + split,
        bound=f2.diagonal_bound + f2.off_diagonal_bound,
        delta_k0=f2.delta_k0,
        type_one=factor < 0,
    )


def mu_star(tau: ShapeParameter, kappa: float, b_field: float, tol: float = 1e-10) -> CertifiedValue:
    """μ(ω, κ) ≈ b(κ² − ½)γ(τ)ε² (término dominante)"""
    reduced, _ = ensure_reduced(tau)
    beta = beta_of(reduced, tol).value
    epsilon = epsilon_of(kappa, b_field, beta)
    g = gamma_min(reduced, tol)
    prefactor = b_field * (kappa * kappa - 0.5) * epsilon ** 2
    return CertifiedValue(prefactor * g.value.value, abs(prefactor) * g.value.remainder_bound,
                          g.value.truncation_radius)


def mu_pm_report(tau: ShapeParameter, q: Characteristic, kappa: float,
                 tol: float = 1e-10, gamma_k_value: Optional[float] = None) -> Dict[str, Any]:
    """μ± con y sin δ_{k,0}, junto con la identidad μ₊ = (κ² − ½)γ_k + δ_{k,0}"""
    pair = mu_pm(tau, q, kappa, tol)
    report = pair.to_dict()
    if gamma_k_value is not None:
        expected = (kappa * kappa - 0.5) * gamma_k_value + pair.delta_k0
        report['identity_residual'] = abs(pair.formula_plus - expected)
    return report
