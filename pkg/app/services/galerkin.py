# app/services/galerkin.py
import logging
import math
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.linalg import eigh

from app.errors import RegimeError, TruncationError
from app.models.lattice import Characteristic, ShapeParameter
from app.models.series import GalerkinBasis, QuadratureGrid
from app.models.stability import GalerkinSpectrum
from app.services.fiber_spectrum import DEFAULT_A1_SHELLS, a1_fourier, lambda1_of
from app.services.lattice_geometry import ensure_reduced, frame, transport_characteristic
from app.services.quadrature_oracle import cell_points
from app.services.theta import covariant_derivative, landau_levels, params_for, phi_k

logger = logging.getLogger(__name__)

DEFAULT_GRID = 128
TRUNCATION_TOL = 1e-8
DEFAULT_B_COND_RATIO = 0.1
# Paso de las diferencias centradas de K⁰
FD_STEP = 1e-4


def _inner(left: np.ndarray, weight: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Matriz ⟨left_i, weight · right_j⟩ con la media de celda como producto interno"""
    return (left.conj() * weight[None, :]) @ right.T / left.shape[1]


def _covariant_gram(evaluate: Callable[[np.ndarray], np.ndarray], X: np.ndarray, gauge: bool) -> np.ndarray:
    """
    Σ_j ⟨D_j f_n, D_j f_m⟩ con D_j = ∂_j − i a⁰_j (o ∂_j si gauge es False) y a⁰ = ½(−x₂, x₁).

    Las derivadas son diferencias centradas de cuarto orden de evaluate en la malla desplazada.
    """
    h = FD_STEP
    values = evaluate(X) if gauge else None
    ones = np.ones(X.size)
    gram = 0
    for direction, potential in ((1.0, -0.5 * X.imag), (1j, 0.5 * X.real)):
        shifted = [evaluate(X + step * h * direction) for step in (2, 1, -1, -2)]
        derivative = (-shifted[0] + 8 * shifted[1] - 8 * shifted[2] + shifted[3]) / (12 * h)
        if gauge:
            derivative = derivative - 1j * potential[None, :] * values
        gram = gram + _inner(derivative, ones, derivative)
    return gram


class GalerkinAssembler:
    """
    Matrices de K_k = K⁰ + εW¹ + ε²W² en la base
    [ξ: φ_k⁽ⁿ⁾ | ξ̄: conj(φ_{−k}⁽ⁿ⁾) | α: e^{i(T−k)·x} | ᾱ: e^{i(T−k)·x}],
    n = 0..n_landau y T en las capas duales |j1|, |j2| ≤ n_fourier.
    Los elementos de matriz se integran con la regla del trapecio sobre la celda.
    """

    def __init__(self, tau: ShapeParameter, q: Characteristic, kappa: float,
                 basis: Optional[GalerkinBasis] = None, grid: int = DEFAULT_GRID,
                 a1_shells: int = DEFAULT_A1_SHELLS):
        self.tau, g = ensure_reduced(tau)
        self.q = transport_characteristic(q, g).centered()
        self.kappa = kappa
        self.basis = basis or GalerkinBasis()
        self.grid = grid

        n_levels = self.basis.n_levels
        n_f = self.basis.n_fourier
        idx = np.arange(-n_f, n_f + 1)
        J1, J2 = np.meshgrid(idx, idx, indexing='ij')
        self.j1, self.j2 = J1.ravel(), J2.ravel()
        lattice_frame = frame(self.tau)
        k = self.q.k(self.tau)
        self.shifted = self.j2 * lattice_frame.dual_basis[0] + self.j1 * lattice_frame.dual_basis[1] - k
        self.outer_shell = np.maximum(np.abs(self.j1), np.abs(self.j2)) == n_f

        n_t = self.shifted.size
        self.slices = {
            'xi': slice(0, n_levels),
            'xi_bar': slice(n_levels, 2 * n_levels),
            'alpha': slice(2 * n_levels, 2 * n_levels + n_t),
            'alpha_bar': slice(2 * n_levels + n_t, 2 * n_levels + 2 * n_t),
        }
        self.dimension = 2 * n_levels + 2 * n_t
        self._k0, self._w1, self._w2 = self._assemble()

    def _levels(self, X: np.ndarray, q: Characteristic, params) -> Tuple[np.ndarray, Callable]:
        """Niveles normalizados en la malla y un evaluador de e_0..e_{n_landau} en puntos arbitrarios"""
        n_max = self.basis.n_landau + 1
        raw = landau_levels(X, self.tau, q, n_max, params)
        norms = np.sqrt(np.mean(np.abs(raw) ** 2, axis=1))
        n_levels = self.basis.n_levels

        def evaluate(Y: np.ndarray) -> np.ndarray:
            return landau_levels(Y, self.tau, q, n_max, params)[:n_levels] / norms[:n_levels, None]

        return raw / norms[:, None], evaluate

    def _waves(self, Y: np.ndarray) -> np.ndarray:
        return np.exp(1j * np.real(np.conj(self.shifted)[:, None] * Y[None, :]))

    def _b_block(self, levels: np.ndarray, abs0: np.ndarray, a1: np.ndarray, lambda1: float) -> np.ndarray:
        """⟨e_n, B⁰e_m⟩ − λ¹δ_nm, con B⁰ = (2κ² + ½)|φ₀|² + ia¹c − iā¹c*"""
        n_levels = self.basis.n_levels
        e = levels[:n_levels]
        block = (2 * self.kappa ** 2 + 0.5) * _inner(e, abs0, e)
        lowered = _inner(e, a1, levels)
        raised = _inner(e, np.conj(a1), levels)
        for m in range(n_levels):
            if m > 0:
                block[:, m] += 1j * math.sqrt(2 * m) * lowered[:, m - 1]
            block[:, m] -= 1j * math.sqrt(2 * (m + 1)) * raised[:, m + 1]
        return block - lambda1 * np.eye(n_levels)

    def _assemble(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        X = cell_points(self.tau, QuadratureGrid(self.grid, self.grid), centered=True).ravel()
        params = params_for(self.tau)
        zero = Characteristic(0.0, 0.0)
        phi0 = phi_k(X, self.tau, zero, params)
        d_phi0 = covariant_derivative(X, self.tau, zero, params)
        abs0 = np.abs(phi0) ** 2
        beta = float(np.mean(abs0 ** 2))
        lambda1 = lambda1_of(self.kappa, beta)
        a1 = a1_fourier(self.tau).evaluate(X)

        levels_k, evaluate_k = self._levels(X, self.q, params)
        levels_mk, evaluate_mk = self._levels(X, self.q.negated(), params)
        n_levels = self.basis.n_levels
        e = levels_k[:n_levels]
        e_bar = np.conj(levels_mk[:n_levels])
        ones = np.ones(X.size)
        waves = self._waves(X)

        s = self.slices
        n = self.dimension
        k0 = np.zeros((n, n), dtype=complex)
        w1 = np.zeros((n, n), dtype=complex)
        w2 = np.zeros((n, n), dtype=complex)

        # ⟨e_n, (−Δ_{a⁰} − 1)e_m⟩ = Σ_j ⟨D_j e_n, D_j e_m⟩ − ⟨e_n, e_m⟩; el bloque conjugado usa −a⁰
        landau = _covariant_gram(evaluate_k, X, gauge=True) - _inner(e, ones, e)
        landau_bar = np.conj(_covariant_gram(evaluate_mk, X, gauge=True)) - _inner(e_bar, ones, e_bar)
        kinetic = _covariant_gram(self._waves, X, gauge=False)
        k0[s['xi'], s['xi']] = landau
        k0[s['xi_bar'], s['xi_bar']] = landau_bar
        k0[s['alpha'], s['alpha']] = kinetic
        k0[s['alpha_bar'], s['alpha_bar']] = kinetic

        u = 1j * _inner(e, d_phi0, waves)
        v = -1j * _inner(e_bar, np.conj(d_phi0), waves)
        w1[s['xi'], s['alpha_bar']] = u
        w1[s['alpha_bar'], s['xi']] = u.conj().T
        w1[s['xi_bar'], s['alpha']] = v
        w1[s['alpha'], s['xi_bar']] = v.conj().T

        cross = (self.kappa ** 2 - 0.5) * _inner(e, phi0 ** 2, e_bar)
        potential = _inner(waves, abs0, waves)
        w2[s['xi'], s['xi']] = self._b_block(levels_k, abs0, a1, lambda1)
        w2[s['xi_bar'], s['xi_bar']] = np.conj(self._b_block(levels_mk, abs0, a1, lambda1))
        w2[s['xi'], s['xi_bar']] = cross
        w2[s['xi_bar'], s['xi']] = cross.conj().T
        w2[s['alpha'], s['alpha']] = potential
        w2[s['alpha_bar'], s['alpha_bar']] = potential

        self._u, self._v = u, v
        logger.debug(f"🔎 Galerkin matrices assembled: dim={n}, τ={self.tau}, q=({self.q.a:.4f},{self.q.b:.4f})")
        return k0, w1, w2

    @property
    def k0(self) -> np.ndarray:
        return self._k0

    @property
    def w1(self) -> np.ndarray:
        return self._w1

    @property
    def w2(self) -> np.ndarray:
        return self._w2

    def hamiltonian(self, epsilon: float) -> np.ndarray:
        return self._k0 + epsilon * self._w1 + epsilon ** 2 * self._w2

    def exact_free_spectrum(self) -> np.ndarray:
        """Espectro cerrado de K⁰: {2n} dos veces y {|T − k|²} dos veces, ordenado"""
        landau = 2.0 * np.arange(self.basis.n_levels)
        kinetic = np.abs(self.shifted) ** 2
        return np.sort(np.concatenate([landau, landau, kinetic, kinetic]))

    def free_spectrum_residual(self) -> float:
        """max |autovalores de K⁰ ensamblado − espectro cerrado|"""
        values = eigh(0.5 * (self._k0 + self._k0.conj().T), eigvals_only=True)
        return float(np.max(np.abs(values - self.exact_free_spectrum())))

    def null_indices(self) -> Tuple[int, int]:
        """Posiciones de v⁰₁ = (φ_k, 0, 0, 0) y v⁰₂ = (0, φ̄_{−k}, 0, 0)"""
        return self.slices['xi'].start, self.slices['xi_bar'].start

    def null_projector(self) -> np.ndarray:
        P = np.zeros((self.dimension, self.dimension), dtype=complex)
        for i in self.null_indices():
            P[i, i] = 1.0
        return P

    def f1_max(self) -> float:
        """max |⟨v⁰_i, W¹v⁰_j⟩|"""
        i, j = self.null_indices()
        return float(np.max(np.abs(self._w1[np.ix_([i, j], [i, j])])))

    def truncation_estimate(self) -> float:
        """Aporte de la capa dual exterior al coeficiente de ε² del par nulo"""
        kinetic = np.abs(self.shifted[self.outer_shell]) ** 2
        weight = np.abs(self._u[0, self.outer_shell]) ** 2 + np.abs(self._v[0, self.outer_shell]) ** 2
        return float(np.sum(weight / kinetic))

    def check_truncation(self) -> float:
        """
        Raises:
            TruncationError: si la capa dual exterior aporta más de 1e-8 al coeficiente de ε²
        """
        estimate = self.truncation_estimate()
        if estimate > TRUNCATION_TOL:
            raise TruncationError(
                f"Base insuficiente: la capa exterior aporta {estimate:.3e} > {TRUNCATION_TOL:g}",
                details={'truncation_estimate': estimate, 'n_fourier': self.basis.n_fourier},
            )
        return estimate

    def spectrum(self, eps: float, keep_matrix: bool = False) -> GalerkinSpectrum:
        """
        Diagonaliza K⁰ + εW¹ + ε²W² con las matrices ya ensambladas.

        El par más bajo se identifica como los dos autovectores con mayor peso sobre v⁰₁, v⁰₂.
        """
        H = self.hamiltonian(eps)
        defect = float(np.max(np.abs(H - H.conj().T)))
        H = 0.5 * (H + H.conj().T)
        values, vectors = eigh(H)

        i, j = self.null_indices()
        weight = np.abs(vectors[i, :]) ** 2 + np.abs(vectors[j, :]) ** 2
        pair = tuple(sorted(int(p) for p in np.argsort(-weight, kind='stable')[:2]))
        lowest_pair = (float(values[pair[0]]), float(values[pair[1]]))

        return GalerkinSpectrum(
            eigenvalues=values,
            lowest_pair=lowest_pair,
            epsilon=eps,
            dimension=self.dimension,
            f1_max=self.f1_max(),
            hermiticity_defect=defect,
            truncation_estimate=self.truncation_estimate(),
            matrix=H if keep_matrix else None,
            pair_indices=pair,
        )


def check_regime(eps: float, b_cond_ratio: float = DEFAULT_B_COND_RATIO) -> None:
    if eps < 0:
        raise ValueError(f"ε debe ser no negativo: {eps}")
    if eps ** 2 > b_cond_ratio:
        raise RegimeError(f"ε² = {eps ** 2:.4g} excede la razón {b_cond_ratio} del régimen perturbativo")


def galerkin_fiber_spectrum(tau: ShapeParameter, q: Characteristic, kappa: float, eps: float,
                            basis: Optional[GalerkinBasis] = None, grid: int = DEFAULT_GRID,
                            b_cond_ratio: float = DEFAULT_B_COND_RATIO,
                            keep_matrix: bool = False) -> GalerkinSpectrum:
    """
    Espectro del truncamiento de Galerkin de K_k.

    Raises:
        RegimeError: si ε² supera b_cond_ratio
        TruncationError: si la capa dual exterior aporta más de 1e-8 al coeficiente de ε²
    """
    check_regime(eps, b_cond_ratio)
    assembler = GalerkinAssembler(tau, q, kappa, basis, grid)
    assembler.check_truncation()
    return assembler.spectrum(eps, keep_matrix)
