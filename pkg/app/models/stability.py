# app/models/stability.py
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from app.models.certified import CertifiedValue
from app.models.lattice import Characteristic, ShapeParameter


@dataclass(frozen=True)
class GammaResult:
    """γ_k(τ) = 2γ_q1 + |γ_q2| − γ_01 con cota compuesta 2r₁ + r₂ + r₀"""
    gamma_k: CertifiedValue
    tau: ShapeParameter
    q: Characteristic
    gamma_q1: CertifiedValue
    gamma_q2: CertifiedValue
    gamma_01: CertifiedValue

    def to_dict(self) -> Dict[str, Any]:
        return {
            'gamma_k': self.gamma_k.to_dict(),
            'tau': self.tau.to_dict(),
            'q': self.q.to_dict(),
            'gamma_q1': self.gamma_q1.to_dict(),
            'gamma_q2': self.gamma_q2.to_dict(),
            'gamma_01': self.gamma_01.to_dict(),
        }


@dataclass(frozen=True)
class MultistartEntry:
    start: Tuple[float, float]
    value: float
    argmin: Tuple[float, float]
    converged: bool
    evaluations: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'start': list(self.start),
            'value': self.value,
            'argmin': list(self.argmin),
            'converged': self.converged,
            'evaluations': self.evaluations,
        }


@dataclass(frozen=True)
class GammaMin:
    """γ(τ) = inf_k γ_k(τ) con el rastro de los multistarts"""
    value: CertifiedValue
    argmin_q: Characteristic
    multistart_trace: List[MultistartEntry]
    tau: ShapeParameter
    grid_minimum: float
    domain: str = 'cell'

    def to_dict(self) -> Dict[str, Any]:
        return {
            'gamma': self.value.to_dict(),
            'argmin': self.argmin_q.to_dict(),
            'tau': self.tau.to_dict(),
            'grid_minimum': self.grid_minimum,
            'domain': self.domain,
            'multistart_trace': [entry.to_dict() for entry in self.multistart_trace],
        }


class StabilityKind(str, Enum):
    ASYMPTOTICALLY_STABLE = 'AsymptoticallyStable'
    ENERGETICALLY_UNSTABLE = 'EnergeticallyUnstable'
    OUTSIDE_REGIME = 'OutsideRegime'


@dataclass(frozen=True)
class StabilityVerdict:
    """Veredicto (None si el signo no se pudo certificar) y diagnósticos"""
    verdict: Optional[StabilityKind]
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def indeterminate(self) -> bool:
        return self.verdict is None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'verdict': self.verdict.value if self.verdict else None,
            'diagnostics': self.diagnostics,
        }


@dataclass(frozen=True)
class PerturbationParams:
    """κ, b, β y los derivados ε (distancia a h_c2) y λ¹"""
    kappa: float
    b_field: float
    beta: float
    epsilon: float
    lambda1: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kappa': self.kappa,
            'b_field': self.b_field,
            'beta': self.beta,
            'epsilon': self.epsilon,
            'lambda1': self.lambda1,
        }


@dataclass(frozen=True)
class F2Matrix:
    """Bloque 2×2 hermítico de segundo orden; cotas por entrada"""
    entries: np.ndarray
    diagonal_bound: float
    off_diagonal_bound: float
    delta_k0: float = 0.0

    @property
    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'entries': [[{'re': float(v.real), 'im': float(v.imag)} for v in row] for row in self.entries],
            'diagonal_bound': self.diagonal_bound,
            'off_diagonal_bound': self.off_diagonal_bound,
            'delta_k0': self.delta_k0,
        }


@dataclass(frozen=True)
class MuPair:
    """
    Autovalores μ₋ ≤ μ₊ de F₂, ordenados.

    La rama de la fórmula (κ²−½)(2⟨|φ₀|²|φ_k|²⟩ + |⟨φ₀²φ̄_kφ̄_{−k}⟩| − β) + δ_{k,0} es
    μ₊ si κ² ≥ ½ y μ₋ si κ² < ½; queda en formula_plus.
    """
    minus: float
    plus: float
    bound: float
    delta_k0: float
    type_one: bool = False

    @property
    def minus_without_delta(self) -> float:
        return self.minus - self.delta_k0

    @property
    def plus_without_delta(self) -> float:
        return self.plus - self.delta_k0

    @property
    def formula_plus(self) -> float:
        return self.minus if self.type_one else self.plus

    def sorted(self) -> Tuple[float, float]:
        return self.minus, self.plus

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mu_minus': {'value': self.minus, 'bound': self.bound},
            'mu_plus': {'value': self.plus, 'bound': self.bound},
            'mu_minus_without_delta': self.minus_without_delta,
            'mu_plus_without_delta': self.plus_without_delta,
            'mu_formula_plus': self.formula_plus,
            'delta_k0': self.delta_k0,
        }


@dataclass(frozen=True)
class GalerkinSpectrum:
    """Espectro truncado de K_k = K⁰ + εW¹ + ε²W²"""
    eigenvalues: np.ndarray
    lowest_pair: Tuple[float, float]
    epsilon: float
    dimension: int
    f1_max: float
    hermiticity_defect: float
    truncation_estimate: float
    matrix: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    pair_indices: Tuple[int, int] = (0, 0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'eigenvalues': [float(v) for v in self.eigenvalues],
            'lowest_pair': list(self.lowest_pair),
            'epsilon': self.epsilon,
            'dimension': self.dimension,
            'f1_max': self.f1_max,
            'hermiticity_defect': self.hermiticity_defect,
            'truncation_estimate': self.truncation_estimate,
        }
