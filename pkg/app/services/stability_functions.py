# app/services/stability_functions.py
import logging
import math
from typing import Any, Dict, Iterable, List, Tuple

import mpmath
import numpy as np
from scipy.optimize import minimize

from app.errors import ConvergenceError, DomainError, PrecisionError, ToleranceError
from app.models.certified import CertifiedValue
from app.models.lattice import Characteristic, ShapeParameter
from app.models.stability import GammaMin, GammaResult, MultistartEntry, StabilityKind, StabilityVerdict
from app.services.lattice_geometry import (
    ensure_reduced,
    fold_to_wigner_seitz,
    half_lattice_points,
    transport_characteristic,
    transport_matrix,
    wigner_seitz_vertices,
)
from app.services.lattice_sums import LatticeSumEvaluator

logger = logging.getLogger(__name__)

DEFAULT_GRID = 24
DEFAULT_B_COND_RATIO = 0.1
NM_OPTIONS = {'xatol': 1e-10, 'fatol': 1e-13, 'maxiter': 4000}
NM_SIMPLEX_STEP = 0.02
# Tolerancia más fina que se intenta al certificar un signo
MIN_SIGN_TOL = 1e-14

HEXAGONAL_TAU = ShapeParameter(0.5, math.sqrt(3) / 2)
SQUARE_TAU = ShapeParameter(0.0, 1.0)

# SL(2,ℤ) usados en la auditoría de covarianza
COVARIANCE_MATRICES = (
    np.array([[1, 0], [1, 1]], dtype=np.int64),
    np.array([[2, 1], [1, 1]], dtype=np.int64),
)


def _center(x: float) -> float:
    return x - math.ceil(x - 0.5)


def _gamma_result(evaluator: LatticeSumEvaluator, tau: ShapeParameter, q: Characteristic) -> GammaResult:
    c = q.centered()
    q1 = evaluator.gamma_q1(c)
    q2 = evaluator.gamma_q2(c)
    g01 = evaluator.gamma_01()
    value = 2 * q1.value + abs(q2.value) - g01.value
    bound = 2 * q1.remainder_bound + q2.remainder_bound + g01.remainder_bound
    return GammaResult(
        gamma_k=CertifiedValue(value, bound, evaluator.radius),
        tau=tau, q=q, gamma_q1=q1, gamma_q2=q2, gamma_01=g01,
    )


def gamma_k(tau: ShapeParameter, q: Characteristic, tol: float) -> GammaResult:
    """γ_k(τ) = 2γ_q1 + |γ_q2| − γ_01 certificado (cada suma a tol/4)"""
    reduced, g = ensure_reduced(tau)
    transported = transport_characteristic(q, g)
    evaluator = LatticeSumEvaluator(reduced, tol / 4)
    return _gamma_result(evaluator, reduced, transported)


def beta(tau: ShapeParameter, tol: float) -> CertifiedValue:
    """β(τ) = ⟨|φ₀|⁴⟩ = γ_01(τ) ≥ 1"""
    reduced, _ = ensure_reduced(tau)
    value = LatticeSumEvaluator(reduced, tol).gamma_01()
    # El término (0,0) vale 1 y los demás son positivos
    assert value.value >= 1.0, f"β < 1 para τ={tau}"
    return value


def kappa_c_from_beta(beta_value: float, bound: float = 0.0, radius: int = 0) -> CertifiedValue:
    """κ_c = √(½(1 − 1/β)) con la cota propagada desde [β − r, β + r]"""
    if beta_value < 1:
        raise PrecisionError(f"β = {beta_value} < 1")
    if bound > 0 and beta_value - bound < 1:
        raise PrecisionError(
            f"El intervalo certificado de β [{beta_value - bound}, {beta_value + bound}] baja de 1"
        )
    kc = lambda b: math.sqrt(0.5 * (1 - 1 / b))
    center = kc(beta_value)
    if bound == 0:
        return CertifiedValue(center, 0.0, radius)
    spread = max(abs(kc(beta_value + bound) - center), abs(center - kc(beta_value - bound)))
    return CertifiedValue(center, spread, radius)


def kappa_c(tau: ShapeParameter, tol: float) -> CertifiedValue:
    b = beta(tau, tol)
    return kappa_c_from_beta(b.value, b.remainder_bound, b.truncation_radius)


def _starts(tau: ShapeParameter, best_grid: Tuple[float, float]) -> List[Tuple[float, float]]:
    starts = [best_grid]
    for p in wigner_seitz_vertices(tau) + half_lattice_points(tau):
        c = p.centered()
        starts.append((c.a, c.b))
    unique: List[Tuple[float, float]] = []
    for s in starts:
        if all(math.hypot(_center(s[0] - u[0]), _center(s[1] - u[1])) > 1e-9 for u in unique):
            unique.append(s)
    return unique


def gamma(tau: ShapeParameter, tol: float, grid: int = DEFAULT_GRID, domain: str = 'cell') -> GammaMin:
    """
    γ(τ) = inf_k γ_k(τ).

    Malla gruesa grid×grid sobre la celda centrada, luego Nelder-Mead desde el mejor punto
    de la malla, los vértices de Wigner-Seitz y los puntos de media red.

    Args:
        domain: 'cell' (celda Ω*) o 'wigner_seitz' (argmin reportado en la celda WS)

    Raises:
        ConvergenceError: si ningún multistart converge
    """
    if domain not in ('cell', 'wigner_seitz'):
        raise ValueError(f"Dominio desconocido: {domain}")
    reduced, _ = ensure_reduced(tau)
    evaluator = LatticeSumEvaluator(reduced, tol / 4)

    def objective(x: np.ndarray) -> float:
        return evaluator.gamma_k_value(_center(float(x[0])), _center(float(x[1])))

    nodes = -0.5 + (np.arange(grid) + 1.0) / grid
    best_grid = (0.0, 0.0)
    grid_minimum = math.inf
    for a in nodes:
        for b in nodes:
            point = (float(a), float(b))
            if domain == 'wigner_seitz':
                folded = fold_to_wigner_seitz(Characteristic(*point), reduced)
                point = (folded.a, folded.b)
            value = evaluator.gamma_k_value(_center(point[0]), _center(point[1]))
            if value < grid_minimum:
                grid_minimum, best_grid = value, (_center(point[0]), _center(point[1]))

    trace: List[MultistartEntry] = []
    best_value, best_point = grid_minimum, best_grid
    for start in _starts(reduced, best_grid):
        x0 = np.array(start)
        simplex = np.array([x0, x0 + [NM_SIMPLEX_STEP, 0.0], x0 + [0.0, NM_SIMPLEX_STEP]])
        try:
            result = minimize(objective, x0, method='Nelder-Mead',
                              options={**NM_OPTIONS, 'initial_simplex': simplex})
        except Exception as e:
            logger.error(f"Error in Nelder-Mead from {start}: {e}")
            trace.append(MultistartEntry(start, math.nan, start, False, 0))
            continue
        argmin = (_center(float(result.x[0])), _center(float(result.x[1])))
        value = float(result.fun)
        trace.append(MultistartEntry(start, value, argmin, bool(result.success), int(result.nfev)))
        if result.success and value < best_value:
            best_value, best_point = value, argmin

    if not any(entry.converged for entry in trace):
        raise ConvergenceError(f"Nelder-Mead no convergió desde ningún inicio para τ={reduced}",
                               trace=[entry.to_dict() for entry in trace])

    argmin_q = Characteristic(*best_point).canonical()
    if domain == 'wigner_seitz':
        argmin_q = fold_to_wigner_seitz(argmin_q, reduced)
    certified = _gamma_result(evaluator, reduced, argmin_q).gamma_k

    if not any(math.hypot(_center(argmin_q.a - s.a), _center(argmin_q.b - s.b)) < 1e-6
               or math.hypot(_center(argmin_q.a + s.a), _center(argmin_q.b + s.b)) < 1e-6
               for s in wigner_seitz_vertices(reduced) + half_lattice_points(reduced)):
        logger.info(f"🔎 Interior minimizer for τ={reduced}: (a,b)=({argmin_q.a:.6f}, {argmin_q.b:.6f})")

    return GammaMin(value=certified, argmin_q=argmin_q, multistart_trace=trace,
                    tau=reduced, grid_minimum=grid_minimum, domain=domain)


def b_closeness_ratio(kappa: float, b_field: float, beta_value: float) -> float:
    """|κ² − b| / (κ²[(2κ² − 1)β + 1]); infinito si el denominador no es positivo"""
    k2 = kappa * kappa
    denominator = k2 * ((2 * k2 - 1) * beta_value + 1)
    if denominator <= 0:
        return math.inf
    return abs(k2 - b_field) / denominator


def certified_gamma(tau: ShapeParameter, tol: float) -> Tuple[GammaMin, float]:
    """γ(τ) apretando la tolerancia ×100 hasta certificar el signo o agotar el radio"""
    current = tol
    result = gamma(tau, current)
    while result.value.certified_sign() == 0 and current / 100 >= MIN_SIGN_TOL:
        current /= 100
        try:
            result = gamma(tau, current)
        except ToleranceError as e:
            logger.warning(f"⚠️ Cannot tighten tolerance below {current * 100:g}: {e.message}")
            break
    return result, current


def classify(tau: ShapeParameter, kappa: float, b_field: float, tol: float,
             b_cond_ratio: float = DEFAULT_B_COND_RATIO) -> StabilityVerdict:
    """
    Clasificación de estabilidad.

    Estable si κ² > ½ y γ(τ) > 0 certificado; inestable si κ² < ½ o γ(τ) < 0 certificado;
    fuera de régimen si la razón de cercanía a h_c2 supera b_cond_ratio.
    Con signo no certificado o κ² = ½ el veredicto es None (indeterminado).
    """
    if kappa <= 0 or b_field <= 0:
        raise DomainError(f"κ y b deben ser positivos (κ={kappa}, b={b_field})")

    reduced, _ = ensure_reduced(tau)
    beta_value = beta(reduced, tol)
    k2 = kappa * kappa
    ratio = b_closeness_ratio(kappa, b_field, beta_value.value)
    kc = kappa_c_from_beta(beta_value.value, beta_value.remainder_bound)

    diagnostics: Dict[str, Any] = {
        'tau': reduced.to_dict(),
        'beta': beta_value.to_dict(),
        'kappa_c': kc.to_dict(),
        'kappa2_minus_half_sign': int(np.sign(k2 - 0.5)),
        'b_closeness_ratio': ratio,
        'b_cond_threshold': b_cond_ratio,
        'indeterminate': False,
    }

    # ε² = (κ² − b)/(κ²[(2κ²−1)β+1]) solo existe si κ² − b y κ − κ_c tienen el mismo signo
    denominator = k2 * ((2 * k2 - 1) * beta_value.value + 1)
    radicand = (k2 - b_field) / denominator if denominator != 0 else math.nan
    if radicand >= 0:
        diagnostics['epsilon'] = math.sqrt(radicand)
    else:
        diagnostics['epsilon'] = None
        diagnostics['epsilon_note'] = 'b and κ² on the wrong side of κ_c: no bifurcating branch'

    if ratio > b_cond_ratio:
        logger.info(f"📋 τ={reduced}, κ={kappa}, b={b_field}: outside regime (ratio={ratio:.3g})")
        return StabilityVerdict(StabilityKind.OUTSIDE_REGIME, diagnostics)

    gamma_min, used_tol = certified_gamma(reduced, tol)
    sign = gamma_min.value.certified_sign()
    diagnostics['gamma'] = gamma_min.value.to_dict()
    diagnostics['gamma_argmin'] = gamma_min.argmin_q.to_dict()
    diagnostics['gamma_sign'] = sign
    diagnostics['tolerance_used'] = used_tol
    # signo de μ* = b(κ² − ½)γ ε²
    if diagnostics['epsilon'] is not None:
        diagnostics['mu_star_sign'] = int(np.sign(k2 - 0.5)) * sign
    else:
        diagnostics['mu_star_sign'] = None

    if k2 == 0.5:
        diagnostics['indeterminate'] = True
        return StabilityVerdict(None, diagnostics)
    if k2 < 0.5:
        return StabilityVerdict(StabilityKind.ENERGETICALLY_UNSTABLE, diagnostics)
    if sign == 0:
        logger.warning(f"⚠️ Sign of γ({reduced}) not certified at tol {used_tol:g}")
        diagnostics['indeterminate'] = True
        return StabilityVerdict(None, diagnostics)
    if sign > 0:
        return StabilityVerdict(StabilityKind.ASYMPTOTICALLY_STABLE, diagnostics)
    return StabilityVerdict(StabilityKind.ENERGETICALLY_UNSTABLE, diagnostics)


def _raw_gamma_k(tau_value: complex, a: float, b: float, tol: float) -> CertifiedValue:
    """γ_k en τ arbitrario (sin reducir) y (a, b) tal cual, con cota genérica"""
    tau = ShapeParameter(tau_value.real, tau_value.imag)
    delta = max(0.5, abs(a), abs(b))
    evaluator = LatticeSumEvaluator(tau, tol / 4, delta=delta)
    value = evaluator.gamma_k_value(a, b)
    return CertifiedValue(value, evaluator.gamma_k_bound, evaluator.radius)


def _residual_entry(lhs: CertifiedValue, rhs: CertifiedValue) -> Dict[str, Any]:
    residual = abs(lhs.value - rhs.value)
    bound = lhs.remainder_bound + rhs.remainder_bound + 1e-12
    return {'residual': residual, 'bound': bound, 'passed': residual <= bound}


def symmetry_residuals(tau: ShapeParameter, q: Characteristic, tol: float) -> Dict[str, Dict[str, Any]]:
    """
    Residuos |lhs − rhs| de las simetrías de γ_k, ambos lados certificados:
    τ+1, −1/τ, reflexión −τ̄, traslaciones duales, k → −k y covarianza SL(2,ℤ).
    """
    reduced, g = ensure_reduced(tau)
    c = transport_characteristic(q, g).centered()
    t = reduced.value

    def base(a: float, b: float) -> CertifiedValue:
        p = Characteristic(a, b).centered()
        return _raw_gamma_k(t, p.a, p.b, tol)

    reference = base(c.a, c.b)
    residuals = {
        'tau_plus_one': _residual_entry(_raw_gamma_k(t + 1, c.a, c.b, tol), base(c.a, c.b - c.a)),
        'inversion': _residual_entry(_raw_gamma_k(-1 / t, c.a, c.b, tol), base(-c.b, c.a)),
        'reflection': _residual_entry(_raw_gamma_k(-t.conjugate(), c.a, c.b, tol), base(c.a, -c.b)),
        'dual_shift_a': _residual_entry(_raw_gamma_k(t, c.a + 1, c.b, tol), reference),
        'dual_shift_b': _residual_entry(_raw_gamma_k(t, c.a, c.b + 1, tol), reference),
        'parity': _residual_entry(base(-c.a, -c.b), reference),
    }
    for i, h in enumerate(COVARIANCE_MATRICES):
        image = (h[0, 0] * t + h[0, 1]) / (h[1, 0] * t + h[1, 1])
        mapped = transport_matrix(h) @ np.array([c.a, c.b])
        residuals[f'sl2z_covariance_{i}'] = _residual_entry(
            _raw_gamma_k(image, c.a, c.b, tol), base(float(mapped[0]), float(mapped[1]))
        )
    return residuals


def _fd_gradient(f, x: float, y: float, step: float) -> Tuple[float, float]:
    gx = (f(x + step, y) - f(x - step, y)) / (2 * step)
    gy = (f(x, y + step) - f(x, y - step)) / (2 * step)
    return gx, gy


def tau_derivatives(tau: ShapeParameter, step: float = 1e-3, tol: float = 1e-10) -> Dict[str, float]:
    """Derivadas de γ(τ) en τ₁ (centrada y laterales) y τ₂ (centrada)"""
    g = lambda z: gamma(ShapeParameter(z.real, z.imag), tol).value.value
    t = tau.value
    center = g(t)
    plus_re, minus_re = g(t + step), g(t - step)
    plus_im, minus_im = g(t + 1j * step), g(t - 1j * step)
    re_central = (plus_re - minus_re) / (2 * step)
    im_central = (plus_im - minus_im) / (2 * step)
    return {
        're_central': re_central,
        're_forward': (plus_re - center) / step,
        're_backward': (center - minus_re) / step,
        'im_central': im_central,
        'gradient_norm': math.hypot(re_central, im_central),
    }


def critical_point_residuals(tau: ShapeParameter, step: float = 1e-3, tol: float = 1e-10,
                             include_tau_points: bool = True) -> Dict[str, Any]:
    """
    Gradientes por diferencias centradas: de γ_k en (a, b) en los cuatro puntos de media
    red y, opcionalmente, de γ(τ) en τ = e^{iπ/2} y e^{iπ/3}.
    """
    reduced, _ = ensure_reduced(tau)
    evaluator = LatticeSumEvaluator(reduced, tol / 4)
    f = lambda a, b: evaluator.gamma_k_value(_center(a), _center(b))

    half_lattice = []
    for p in half_lattice_points(reduced):
        gx, gy = _fd_gradient(f, p.a, p.b, step)
        half_lattice.append({'point': p.to_dict(), 'gradient': [gx, gy], 'gradient_norm': math.hypot(gx, gy)})

    report: Dict[str, Any] = {'tau': reduced.to_dict(), 'step': step, 'half_lattice': half_lattice}
    if include_tau_points:
        report['tau_points'] = {
            'hexagonal': tau_derivatives(HEXAGONAL_TAU, step, tol),
            'square': tau_derivatives(SQUARE_TAU, step, tol),
        }
    return report


def monotonicity_report(re: float, im_values: Iterable[float], tol: float) -> Dict[str, Any]:
    """γ(τ) a lo largo de Re τ fijo; se reporta si es no creciente en Im τ (no se exige)"""
    points = []
    for im in im_values:
        value = gamma(ShapeParameter(re, im), tol).value.value
        points.append({'im': im, 'gamma': value})
    non_increasing = all(p['gamma'] >= n['gamma'] - 1e-12 for p, n in zip(points, points[1:]))
    if not non_increasing:
        logger.warning(f"⚠️ γ(τ) not monotone along Re τ = {re}")
    return {'re': re, 'points': points, 'non_increasing': non_increasing}


def imaginary_axis_beta(t: float) -> float:
    """β(it) = θ₃(e^{−π/t}) θ₃(e^{−πt})"""
    return float(mpmath.jtheta(3, 0, mpmath.exp(-mpmath.pi / t)) * mpmath.jtheta(3, 0, mpmath.exp(-mpmath.pi * t)))


def imaginary_axis_gamma(t: float) -> float:
    """γ_k(it) en (a, b) = (½, ½): 2θ₄(e^{−π/t})θ₄(e^{−πt}) − β(it)"""
    q1 = mpmath.exp(-mpmath.pi / t)
    q2 = mpmath.exp(-mpmath.pi * t)
    return float(2 * mpmath.jtheta(4, 0, q1) * mpmath.jtheta(4, 0, q2) - imaginary_axis_beta(t))
