# app/services/lattice_sums.py
import logging
import math
from typing import Optional, Tuple

import numpy as np

from app.errors import ToleranceError
from app.models.certified import CertifiedValue
from app.models.lattice import Characteristic, ShapeParameter
from app.services.lattice_geometry import ensure_reduced, transport_characteristic
from config.settings import get_max_radius

logger = logging.getLogger(__name__)

# Convención de fase fijada por la equivalencia con la cuadratura: cos 2π(bm − an)
STANDARD = 'standard'
# La otra lectura, cos 2π(bm + an), solo para comparar
ALTERNATE = 'alternate'

_EPS = np.finfo(float).eps


def form_min_eigenvalue(tau: ShapeParameter) -> float:
    """
    Menor autovalor de la forma |u − vτ|² = u² − 2τ₁uv + |τ|²v².
    Vale ≥ ½ en el dominio fundamental.
    """
    t2 = abs(tau.value) ** 2
    return 0.5 * ((1 + t2) - math.sqrt((t2 - 1) ** 2 + 4 * tau.re ** 2))


def _gauss_tail(h: float, start: float) -> float:
    """Σ_{j≥0} exp(−h (start + j)²) para start ≥ 0"""
    total = 0.0
    j = 0
    while True:
        d = start + j
        term = math.exp(-h * d * d)
        total += term
        if term < 1e-300 or (j > 0 and term < 1e-18 * total):
            return total
        j += 1


def _full_line_sum(h: float, delta: float) -> float:
    """Cota de Σ_n exp(−h (n + s)²) para |s| ≤ delta"""
    core = 2 * math.ceil(delta) + 1
    return core + 2 * _gauss_tail(h, 1.0)


def tail_bound(radius: int, tau: ShapeParameter, delta: float = 0.5) -> float:
    """
    Cota rigurosa de los términos con max(|n|,|m|) > radius.

    Con λ el menor autovalor de la forma y h = πλ/τ₂, cada término está acotado por
    exp(−h((n+b)² + (m+a)²)); con |a|, |b| ≤ delta la unión de las dos franjas da
    ≤ 2·T_N·S, T_N = 2Σ_{j≥N+1} exp(−h(j − delta)²), S = cota de la suma completa.
    """
    h = math.pi * form_min_eigenvalue(tau) / tau.im
    strip = 2.0 * _gauss_tail(h, radius + 1 - delta)
    return 2.0 * strip * _full_line_sum(h, delta)


def float_headroom(tau: ShapeParameter, delta: float = 0.5) -> float:
    """Margen por redondeo, independiente del radio"""
    h = math.pi * form_min_eigenvalue(tau) / tau.im
    return 64 * _EPS * _full_line_sum(h, delta) ** 2


def certified_bound(radius: int, tau: ShapeParameter, delta: float = 0.5) -> float:
    return tail_bound(radius, tau, delta) + float_headroom(tau, delta)


def truncation_radius_for(tol: float, tau: ShapeParameter, delta: float = 0.5) -> int:
    """
    Menor radio N cuya cota certificada es ≤ tol.

    Raises:
        ToleranceError: si N superaría el tope (ABRIKOSOV_MAX_RADIUS, 64 por defecto)
    """
    if tol <= 0:
        raise ValueError(f"tol debe ser positiva: {tol}")
    cap = get_max_radius()
    for radius in range(1, cap + 1):
        if certified_bound(radius, tau, delta) <= tol:
            return radius
    achievable = certified_bound(cap, tau, delta)
    raise ToleranceError(
        f"Tolerancia {tol:g} inalcanzable con radio máximo {cap} para τ={tau}",
        achievable_bound=achievable,
    )


class LatticeSumEvaluator:
    """
    Sumas de red γ_q1, γ_q2, γ_01 sobre el cuadrado |n|, |m| ≤ N con cota certificada.

    Las sumas se acumulan por capas cuadradas, de la exterior a la interior, con suma
    compensada (math.fsum), lo que da resultados deterministas.
    """

    def __init__(self, tau: ShapeParameter, tol: Optional[float] = None, radius: Optional[int] = None,
                 convention: str = STANDARD, delta: float = 0.5):
        if convention not in (STANDARD, ALTERNATE):
            raise ValueError(f"Convención desconocida: {convention}")
        if tol is None and radius is None:
            raise ValueError("Se requiere tol o radius")
        self.tau = tau
        self.convention = convention
        self.delta = delta
        self.radius = radius if radius is not None else truncation_radius_for(tol, tau, delta)
        self.bound = certified_bound(self.radius, tau, delta)

        idx = np.arange(-self.radius, self.radius + 1)
        n, m = np.meshgrid(idx, idx, indexing='ij')
        shell = np.maximum(np.abs(n), np.abs(m)).ravel()
        # Orden fijo: capa exterior primero
        order = np.argsort(-shell, kind='stable')
        self._n = n.ravel()[order].astype(float)
        self._m = m.ravel()[order].astype(float)
        self._lattice = self._n - self._m * tau.value
        self._base_weights = np.exp(-(math.pi / tau.im) * np.abs(self._lattice) ** 2)
        self._gamma_01: Optional[float] = None

    def _certified(self, value) -> CertifiedValue:
        return CertifiedValue(value, self.bound, self.radius)

    def _phase(self, a: float, b: float) -> np.ndarray:
        if self.convention == STANDARD:
            return 2 * math.pi * (b * self._m - a * self._n)
        return 2 * math.pi * (b * self._m + a * self._n)

    def accumulate_q1(self, a: float, b: float) -> complex:
        """Σ w·e^{iθ} sin tomar parte real (la parte imaginaria se cancela por simetría)"""
        phase = self._phase(a, b)
        real = math.fsum(self._base_weights * np.cos(phase))
        imag = math.fsum(self._base_weights * np.sin(phase))
        return complex(real, imag)

    def gamma_q1_value(self, a: float, b: float) -> float:
        return math.fsum(self._base_weights * np.cos(self._phase(a, b)))

    def gamma_q2_value(self, a: float, b: float) -> complex:
        q = b - a * self.tau.value
        weights = np.exp(-(math.pi / self.tau.im) * np.abs(self._lattice + q) ** 2)
        phase = -self._phase(a, b)
        return complex(math.fsum(weights * np.cos(phase)), math.fsum(weights * np.sin(phase)))

    def gamma_01_value(self) -> float:
        if self._gamma_01 is None:
            self._gamma_01 = math.fsum(self._base_weights)
        return self._gamma_01

    def gamma_k_value(self, a: float, b: float) -> float:
        """2γ_q1 + |γ_q2| − γ_01 sin certificar (para el minimizador)"""
        return 2 * self.gamma_q1_value(a, b) + abs(self.gamma_q2_value(a, b)) - self.gamma_01_value()

    def gamma_q1(self, q: Characteristic) -> CertifiedValue:
        return self._certified(self.gamma_q1_value(q.a, q.b))

    def gamma_q2(self, q: Characteristic) -> CertifiedValue:
        return self._certified(self.gamma_q2_value(q.a, q.b))

    def gamma_01(self) -> CertifiedValue:
        return self._certified(self.gamma_01_value())

    @property
    def gamma_k_bound(self) -> float:
        return 4 * self.bound


def _prepare(tau: ShapeParameter, q: Characteristic) -> Tuple[ShapeParameter, Characteristic]:
    """Reduce τ, transporta q y centra (a, b)"""
    reduced, g = ensure_reduced(tau)
    return reduced, transport_characteristic(q, g).centered()


def gamma_q1(tau: ShapeParameter, q: Characteristic, tol: float,
             convention: str = STANDARD) -> CertifiedValue:
    """γ_q1(τ) = Σ e^{−(π/τ₂)|n−mτ|²} cos 2π(bm − an)"""
    reduced, q = _prepare(tau, q)
    return LatticeSumEvaluator(reduced, tol, convention=convention).gamma_q1(q)


def gamma_q2(tau: ShapeParameter, q: Characteristic, tol: float,
             convention: str = STANDARD) -> CertifiedValue:
    """
    γ_q2(τ) = Σ e^{−(π/τ₂)|n−mτ+q|² − 2πi(bm − an)}.

    Para τ no reducido se devuelve el valor en la característica transportada; el módulo
    es invariante, la fase global puede diferir.
    """
    reduced, q = _prepare(tau, q)
    return LatticeSumEvaluator(reduced, tol, convention=convention).gamma_q2(q)


def gamma_01(tau: ShapeParameter, tol: float) -> CertifiedValue:
    """γ_01(τ) = Σ e^{−(π/τ₂)|n−mτ|²} = β(τ)"""
    reduced, _ = ensure_reduced(tau)
    return LatticeSumEvaluator(reduced, tol).gamma_01()


# Aproximantes de pocos términos

def _third_neighbor(tau: ShapeParameter) -> Tuple[int, float]:
    """Signo σ del tercer vecino más corto |1 − στ| y su peso"""
    sigma = 1 if tau.re >= 0 else -1
    weight = math.exp(-math.pi * abs(1 - sigma * tau.value) ** 2 / tau.im)
    return sigma, weight


def gamma_q1_approx(tau: ShapeParameter, q: Characteristic) -> float:
    """
    1 + 2(e^{−π/τ₂}cos 2πa + e^{−π|τ|²/τ₂}cos 2πb + e^{−π|1−στ|²/τ₂}cos 2π(σb − a)).

    El tercer término entra con signo +, que es lo que da la suma de red.
    """
    sigma, w3 = _third_neighbor(tau)
    w1 = math.exp(-math.pi / tau.im)
    w2 = math.exp(-math.pi * abs(tau.value) ** 2 / tau.im)
    return 1 + 2 * (w1 * math.cos(2 * math.pi * q.a)
                    + w2 * math.cos(2 * math.pi * q.b)
                    + w3 * math.cos(2 * math.pi * (sigma * q.b - q.a)))


def gamma_01_approx(tau: ShapeParameter) -> float:
    return gamma_q1_approx(tau, Characteristic(0.0, 0.0))


FIVE_TERM_SHIFTS = ((0, 0), (0, 1), (0, -1), (1, 0), (-1, 0))


def gamma_q2_approx(tau: ShapeParameter, q: Characteristic) -> complex:
    """
    Forma de cinco exponenciales: (n, m) ∈ {(0,0), (0,±1), (±1,0)} de γ_q2.
    Solo es fiel cerca de la esquina hexagonal del dominio fundamental.
    """
    qv = q.b - q.a * tau.value
    total = 0j
    for n, m in FIVE_TERM_SHIFTS:
        weight = math.exp(-(math.pi / tau.im) * abs(n - m * tau.value + qv) ** 2)
        total += weight * complex(math.cos(2 * math.pi * (q.b * m - q.a * n)),
                                  -math.sin(2 * math.pi * (q.b * m - q.a * n)))
    return total


def gamma_approx(tau: ShapeParameter, q: Characteristic) -> float:
    return 2 * gamma_q1_approx(tau, q) + abs(gamma_q2_approx(tau, q)) - gamma_01_approx(tau)


def square_truncation(tau: ShapeParameter, q: Characteristic, radius: int = 2) -> Tuple[float, complex, float]:
    """(γ_q1, γ_q2, γ_01) truncadas a |n|, |m| ≤ radius"""
    evaluator = LatticeSumEvaluator(tau, radius=radius)
    q = q.centered()
    return evaluator.gamma_q1_value(q.a, q.b), evaluator.gamma_q2_value(q.a, q.b), evaluator.gamma_01_value()
