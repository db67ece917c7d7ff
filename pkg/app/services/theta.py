# app/services/theta.py
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.errors import ToleranceError
from app.models.lattice import Characteristic, ShapeParameter
from app.models.series import ThetaSeriesParams
from app.services.lattice_geometry import frame

logger = logging.getLogger(__name__)

# Puntos por bloque al evaluar series sobre mallas grandes
CHUNK_SIZE = 65536
CR_STEP = 1e-3
# Términos extra de la serie de referencia en truncation_residual
REFERENCE_EXTRA_TERMS = 12


def normalization_constant(tau: ShapeParameter, q: Optional[Characteristic] = None) -> float:
    """
    c₀ tal que ⟨|φ_q|²⟩ = 1.

    El modo cero de los coeficientes de Fourier de |φ_q|² vale c₀²/√(2τ₂) para toda
    característica q, así que c₀ = (2τ₂)^{1/4} no depende de q.
    """
    return (2.0 * tau.im) ** 0.25


def theta_tail_bound(tau: ShapeParameter, m_max: int, shift: float = 0.0) -> float:
    """Cota de la cola gaussiana: 2 Σ_{j≥0} exp(−πτ₂(m_max − shift + j)²)"""
    total = 0.0
    j = 0
    while True:
        d = m_max - shift + j
        term = math.exp(-math.pi * tau.im * d * d) if d > 0 else 1.0
        total += term
        if term < 1e-300 or (j > 0 and term < 1e-18 * total):
            break
        j += 1
    return 2.0 * total


def phi_tail_bound(tau: ShapeParameter, params: ThetaSeriesParams) -> float:
    """Cota absoluta del error de truncamiento de φ_k (ventana centrada punto a punto)"""
    return normalization_constant(tau) * theta_tail_bound(tau, params.m_max, shift=0.5)


def theta_cell_tail_bound(tau: ShapeParameter, params: ThetaSeriesParams) -> float:
    """Cota del error de θ_q para z en la celda fundamental"""
    return math.exp(math.pi * tau.im) * theta_tail_bound(tau, params.m_max)


def params_for(tau: ShapeParameter, target_tol: float = 1e-12, max_m: int = 64) -> ThetaSeriesParams:
    """Menor m_max cuya cola cumple target_tol para θ y φ"""
    for m_max in range(2, max_m + 1):
        params = ThetaSeriesParams(m_max=m_max, target_tol=target_tol)
        if max(theta_cell_tail_bound(tau, params), phi_tail_bound(tau, params)) <= target_tol:
            return params
    params = ThetaSeriesParams(m_max=max_m, target_tol=target_tol)
    raise ToleranceError(
        f"La serie theta no alcanza {target_tol:g} con m_max={max_m}",
        achievable_bound=theta_cell_tail_bound(tau, params),
    )


def _window(m_max: int) -> np.ndarray:
    return np.arange(-m_max, m_max + 1)


def _split_cell(z: np.ndarray, tau: complex) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """z = z₀ + n + mτ con z₀ en la celda fundamental"""
    m = np.floor(z.imag / tau.imag)
    x = z.real - m * tau.real
    n = np.floor(x)
    return z - n - m * tau, n, m


def theta_q(z, tau: ShapeParameter, q: Characteristic, params: ThetaSeriesParams = ThetaSeriesParams()):
    """
    θ_q(z, τ) = Σ_m exp(πi(m−a)²τ + 2πi(m−a)(z+b)).

    z se reduce a la celda fundamental y se reaplica el factor de cuasi-periodicidad
    θ(z+n+mτ) = e^{−2πian} e^{−2πibm − πim²τ − 2πimz} θ(z).

    Para q = 0 los ceros quedan en ℤ + τℤ + ½ + ½τ; no se verifica aquí.

    Raises:
        ToleranceError: si m_max no alcanza target_tol (lleva la cota alcanzable)
    """
    bound = theta_cell_tail_bound(tau, params)
    if bound > params.target_tol:
        raise ToleranceError(
            f"m_max={params.m_max} no alcanza la tolerancia {params.target_tol:g} (cota {bound:.3e})",
            achievable_bound=bound,
        )

    t = tau.value
    scalar = np.isscalar(z)
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    z0, n, m = _split_cell(z_arr.ravel(), t)

    m_center = math.floor(q.a)
    indices = m_center + _window(params.m_max)
    mu = indices - q.a

    out = np.empty(z0.shape, dtype=complex)
    for start in range(0, z0.size, CHUNK_SIZE):
        zc = z0[start:start + CHUNK_SIZE, None]
        exponent = 1j * math.pi * mu ** 2 * t + 2j * math.pi * mu * (zc + q.b)
        out[start:start + CHUNK_SIZE] = np.exp(exponent).sum(axis=1)

    factor = np.exp(-2j * math.pi * q.a * n - 2j * math.pi * q.b * m
                    - 1j * math.pi * m ** 2 * t - 2j * math.pi * m * z0)
    result = (factor * out).reshape(z_arr.shape)
    return complex(result[0]) if scalar else result


def _phi_terms(X: np.ndarray, tau: ShapeParameter, q: Characteristic, params: ThetaSeriesParams,
               derivatives: bool = False):
    """Suma de exp(E_m) con la ventana centrada en m ≈ a − y/τ₂ para cada punto"""
    omega = math.sqrt(2 * math.pi / tau.im)
    t = tau.value
    c0 = normalization_constant(tau, q)
    window = _window(params.m_max)
    z = X / omega

    value = np.empty(z.shape, dtype=complex)
    d_z = np.empty(z.shape, dtype=complex) if derivatives else None
    for start in range(0, z.size, CHUNK_SIZE):
        zc = z[start:start + CHUNK_SIZE]
        center = np.floor(q.a - zc.imag / tau.im + 0.5)
        mu = (center[:, None] + window[None, :]) - q.a
        zc2 = zc[:, None]
        exponent = ((math.pi / (2 * tau.im)) * (zc2 ** 2 - np.abs(zc2) ** 2)
                    + 1j * math.pi * mu ** 2 * t
                    + 2j * math.pi * mu * (zc2 + q.b))
        terms = np.exp(exponent)
        value[start:start + CHUNK_SIZE] = c0 * terms.sum(axis=1)
        if derivatives:
            # ∂_z E_m = (π/2τ₂)(2z − z̄) + 2πi(m−a)
            dz_exp = (math.pi / (2 * tau.im)) * (2 * zc2 - np.conj(zc2)) + 2j * math.pi * mu
            d_z[start:start + CHUNK_SIZE] = c0 * (dz_exp * terms).sum(axis=1)
    if not derivatives:
        return value
    # ∂_z̄ E_m = −(π/2τ₂) z para todos los términos
    d_zbar = -(math.pi / (2 * tau.im)) * z * value
    return value, d_z / omega, d_zbar / omega


def phi_k(x, tau: ShapeParameter, q: Characteristic, params: ThetaSeriesParams = ThetaSeriesParams()):
    """
    φ_k(x) = c₀ e^{(π/2τ₂)(z² − |z|²)} θ_q(z, τ) con z = (x₁ + ix₂)/ω.

    x se da como complejo x₁ + ix₂ (escalar o arreglo).
    """
    scalar = np.isscalar(x)
    X = np.atleast_1d(np.asarray(x, dtype=complex))
    value = _phi_terms(X.ravel(), tau, q, params).reshape(X.shape)
    return complex(value[0]) if scalar else value


def phi_with_derivatives(x, tau: ShapeParameter, q: Characteristic,
                         params: ThetaSeriesParams = ThetaSeriesParams()):
    """(φ, ∂_X φ, ∂_X̄ φ) con derivación analítica de la serie truncada"""
    X = np.atleast_1d(np.asarray(x, dtype=complex))
    value, d_x, d_xbar = _phi_terms(X.ravel(), tau, q, params, derivatives=True)
    return value.reshape(X.shape), d_x.reshape(X.shape), d_xbar.reshape(X.shape)


def covariant_derivative(x, tau: ShapeParameter, q: Characteristic,
                         params: ThetaSeriesParams = ThetaSeriesParams()):
    """∂_{a⁰}φ = (∂₁ − i∂₂ − ½(x₁ − ix₂))φ = −c*φ, con a⁰ = ½(−x₂, x₁)"""
    X = np.atleast_1d(np.asarray(x, dtype=complex))
    value, d_x, _ = phi_with_derivatives(X, tau, q, params)
    return 2 * d_x - 0.5 * np.conj(X) * value


def landau_levels(x, tau: ShapeParameter, q: Characteristic, n_max: int,
                  params: ThetaSeriesParams = ThetaSeriesParams()) -> np.ndarray:
    """
    (c*)ⁿφ_k para n = 0..n_max, sin normalizar (‖(c*)ⁿφ_k‖² = 2ⁿ n!).

    Sobre cada término e^{E_m}, (c*)ⁿ e^{E_m} = (−2/ω)ⁿ Pₙ(w) e^{E_m} con
    w = 2πi(Im z/τ₂ + m − a), P₀ = 1, P₁ = w y P_{j+1} = wP_j + (π/τ₂) j P_{j−1}.
    """
    omega = math.sqrt(2 * math.pi / tau.im)
    t = tau.value
    c0 = normalization_constant(tau, q)
    # Pₙ crece polinómicamente: ventana algo más ancha que la de φ
    window = _window(params.m_max + 2)
    X = np.atleast_1d(np.asarray(x, dtype=complex))
    z = X.ravel() / omega
    scale = math.pi / tau.im

    out = np.empty((n_max + 1, z.size), dtype=complex)
    for start in range(0, z.size, CHUNK_SIZE):
        zc = z[start:start + CHUNK_SIZE]
        center = np.floor(q.a - zc.imag / tau.im + 0.5)
        mu = (center[:, None] + window[None, :]) - q.a
        zc2 = zc[:, None]
        terms = np.exp((math.pi / (2 * tau.im)) * (zc2 ** 2 - np.abs(zc2) ** 2)
                       + 1j * math.pi * mu ** 2 * t
                       + 2j * math.pi * mu * (zc2 + q.b))
        w = 2j * math.pi * (zc2.imag / tau.im + mu)
        previous, current = np.zeros_like(w), np.ones_like(w)
        for n in range(n_max + 1):
            out[n, start:start + CHUNK_SIZE] = c0 * (-2 / omega) ** n * (current * terms).sum(axis=1)
            previous, current = current, w * current + scale * n * previous
    return out.reshape((n_max + 1,) + X.shape)


def quasi_periodicity_factor(x, n: int, m: int, tau: ShapeParameter, q: Characteristic):
    """
    φ_k(x + s) = e^{(i/2)(s₁x₂ − s₂x₁)} (−1)^{nm} e^{−ik·s} φ_k(x), s = ω(n + mτ),
    con k·s = 2π(an + bm).
    """
    s = frame(tau).lattice_point(n, m)
    X = np.asarray(x, dtype=complex)
    phase = 0.5 * (s.real * X.imag - s.imag * X.real)
    sign = -1.0 if (n * m) % 2 else 1.0
    return sign * np.exp(1j * phase - 2j * math.pi * (q.a * n + q.b * m))


def _cell_test_points(tau: ShapeParameter, n: int = 16) -> np.ndarray:
    u = (np.arange(n) + 0.5) / n
    u1, u2 = np.meshgrid(u, u, indexing='ij')
    return frame(tau).omega * (u1 + u2 * tau.value).ravel()


def annihilator_residual(tau: ShapeParameter, q: Characteristic,
                         params: ThetaSeriesParams = ThetaSeriesParams()) -> float:
    """
    max |cφ_k| / max |φ_k| sobre una malla de prueba, c = ∂₁ + i∂₂ + ½(x₁ + ix₂).
    """
    X = _cell_test_points(tau)
    value, d_x, d_xbar = phi_with_derivatives(X, tau, q, params)
    d1 = d_x + d_xbar
    d2 = 1j * (d_x - d_xbar)
    c_phi = d1 + 1j * d2 + 0.5 * X * value
    return float(np.max(np.abs(c_phi)) / np.max(np.abs(value)))


def quasi_periodicity_defect(tau: ShapeParameter, q: Characteristic,
                             params: ThetaSeriesParams = ThetaSeriesParams(),
                             shifts: Tuple[Tuple[int, int], ...] = ((1, 0), (0, 1), (1, 1), (-2, 1))) -> float:
    """
    Máximo defecto relativo de φ(x+s) − factor·φ(x).

    La ventana se centra punto a punto, así que la serie truncada es cuasi-periódica
    para cualquier m_max; la sensibilidad al truncamiento la mide truncation_residual.
    """
    X = _cell_test_points(tau, 8)
    base = phi_k(X, tau, q, params)
    scale = float(np.max(np.abs(base)))
    lattice_frame = frame(tau)
    worst = 0.0
    for n, m in shifts:
        shifted = phi_k(X + lattice_frame.lattice_point(n, m), tau, q, params)
        expected = quasi_periodicity_factor(X, n, m, tau, q) * base
        worst = max(worst, float(np.max(np.abs(shifted - expected))) / scale)
    return worst


def truncation_residual(tau: ShapeParameter, q: Characteristic,
                        params: ThetaSeriesParams = ThetaSeriesParams()) -> float:
    """
    max |φ_k(m_max) − φ_k(m_max + 12)| / max |φ_k| sobre la malla de prueba.

    Decrece como exp(−πτ₂(m_max + ½)²) al ampliar la ventana.
    """
    X = _cell_test_points(tau)
    reference_params = ThetaSeriesParams(m_max=params.m_max + REFERENCE_EXTRA_TERMS,
                                         target_tol=params.target_tol)
    reference = phi_k(X, tau, q, reference_params)
    value = phi_k(X, tau, q, params)
    return float(np.max(np.abs(value - reference)) / np.max(np.abs(reference)))


def cauchy_riemann_residual(z, tau: ShapeParameter, q: Characteristic,
                            params: ThetaSeriesParams = ThetaSeriesParams(), h: float = CR_STEP):
    """
    |D_x θ + i D_y θ| / max(1, |θ|) con diferencias centradas de cuarto orden; ≈ 0 para θ entera.
    """
    z = np.asarray(z, dtype=complex)

    def derivative(direction: complex):
        f = lambda k: theta_q(z + k * h * direction, tau, q, params)
        return (-f(2) + 8 * f(1) - 8 * f(-1) + f(-2)) / (12 * h)

    value = theta_q(z, tau, q, params)
    residual = np.abs(derivative(1.0) + 1j * derivative(1j))
    return residual / np.maximum(1.0, np.abs(value))


def abs2_fourier_coefficient(tau: ShapeParameter, q: Characteristic, j1, j2):
    """
    Coeficiente del modo e^{2πi(j1·u₁ + j2·u₂)} de |φ_q|²:
    exp(−(π/2τ₂)|j2 − j1τ|²) · e^{2πi(b·j1 − a·j2)} · (−1)^{j1·j2}
    """
    j1 = np.asarray(j1)
    j2 = np.asarray(j2)
    gauss = np.exp(-(math.pi / (2 * tau.im)) * np.abs(j2 - j1 * tau.value) ** 2)
    sign = np.where((j1 * j2) % 2 == 0, 1.0, -1.0)
    return gauss * sign * np.exp(2j * math.pi * (q.b * j1 - q.a * j2))


@dataclass(frozen=True)
class NormalizedCellFunction:
    """φ_k normalizada en la celda; inmutable y compartible entre hilos"""
    tau: ShapeParameter
    q: Characteristic
    c0: float
    params: ThetaSeriesParams

    @classmethod
    def build(cls, tau: ShapeParameter, q: Characteristic,
              params: Optional[ThetaSeriesParams] = None) -> 'NormalizedCellFunction':
        params = params or params_for(tau)
        bound = phi_tail_bound(tau, params)
        if bound > params.target_tol:
            raise ToleranceError(
                f"m_max={params.m_max} no alcanza la tolerancia {params.target_tol:g} para φ_k",
                achievable_bound=bound,
            )
        return cls(tau=tau, q=q, c0=normalization_constant(tau, q), params=params)

    def __call__(self, x):
        return phi_k(x, self.tau, self.q, self.params)

    def on_grid(self, X: np.ndarray) -> np.ndarray:
        return phi_k(X, self.tau, self.q, self.params)
