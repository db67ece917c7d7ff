# app/services/feshbach.py
import logging
from typing import List, Tuple

import numpy as np
from scipy.linalg import LinAlgError, eigh, solve
from scipy.optimize import brentq

from app.errors import InvertibilityError

logger = logging.getLogger(__name__)

PROJECTOR_TOL = 1e-10
GAP_MARGIN = 1e-9


def split_projection(P: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Bases ortonormales (V, W) de Ran P y Ran P̄ = Ran(1 − P).

    Raises:
        ValueError: si P no es una proyección ortogonal
    """
    P = np.asarray(P, dtype=complex)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"P debe ser cuadrada: {P.shape}")
    if np.max(np.abs(P - P.conj().T)) > PROJECTOR_TOL or np.max(np.abs(P @ P - P)) > PROJECTOR_TOL:
        raise ValueError("P no es una proyección ortogonal")
    values, vectors = eigh(P)
    inside = values > 0.5
    return vectors[:, inside], vectors[:, ~inside]


def _blocks(H: np.ndarray, P: np.ndarray):
    H = np.asarray(H, dtype=complex)
    V, W = split_projection(P)
    return V.conj().T @ H @ V, V.conj().T @ H @ W, W.conj().T @ H @ W, V, W


def _complement_solve(D: np.ndarray, lam: float, rhs: np.ndarray) -> np.ndarray:
    shifted = D - lam * np.eye(D.shape[0])
    try:
        if np.linalg.cond(shifted) > 1e14:
            raise LinAlgError("singular")
        return solve(shifted, rhs, assume_a='her')
    except LinAlgError:
        raise InvertibilityError(f"P̄HP̄ − λ no es invertible en λ = {lam}", details={'lambda': lam})


def feshbach_map(H: np.ndarray, P: np.ndarray, lam: float) -> np.ndarray:
    """
    F_P(λ) = PHP − PHP̄(P̄HP̄ − λ)⁻¹P̄HP, expresado en la base ortonormal de Ran P.

    Raises:
        InvertibilityError: si P̄HP̄ − λ es singular
    """
    A, B, D, _, _ = _blocks(H, P)
    if D.shape[0] == 0:
        return A
    return A - B @ _complement_solve(D, lam, B.conj().T)


def feshbach_lift(H: np.ndarray, P: np.ndarray, lam: float, phi: np.ndarray) -> np.ndarray:
    """Q φ = Vφ − W(P̄HP̄ − λ)⁻¹P̄HVφ; lleva autovectores de F_P(λ) a autovectores de H"""
    _, B, D, V, W = _blocks(H, P)
    phi = np.asarray(phi, dtype=complex)
    if D.shape[0] == 0:
        return V @ phi
    return V @ phi - W @ _complement_solve(D, lam, B.conj().T @ phi)


def complement_gap(H: np.ndarray, P: np.ndarray) -> float:
    """min σ(P̄HP̄) restringido a Ran P̄"""
    _, _, D, _, _ = _blocks(H, P)
    if D.shape[0] == 0:
        return np.inf
    return float(eigh(D, eigvals_only=True)[0])


def gershgorin_bounds(H: np.ndarray) -> Tuple[float, float]:
    """Cotas (inferior, superior) del espectro de una matriz hermítica por discos de Gershgorin"""
    H = np.asarray(H, dtype=complex)
    centers = np.real(np.diag(H))
    radii = np.sum(np.abs(H), axis=1) - np.abs(np.diag(H))
    return float(np.min(centers - radii)), float(np.max(centers + radii))


def feshbach_eigenvalues(H: np.ndarray, P: np.ndarray, xtol: float = 1e-14) -> List[float]:
    """
    Autovalores de H por debajo de min σ(P̄HP̄), obtenidos como raíces de e_j(λ) − λ,
    con e_j el j-ésimo autovalor de F_P(λ). Cada rama es estrictamente decreciente, así
    que tiene a lo sumo una raíz.

    El extremo inferior del bracket sale de la cota de Gershgorin de H: por debajo de
    σ(H) todas las ramas son positivas.
    """
    H = np.asarray(H, dtype=complex)
    A = _blocks(H, P)[0]
    gap = complement_gap(H, P)
    lower, upper = gershgorin_bounds(H)
    lo = lower - 1.0
    hi = gap - GAP_MARGIN * max(1.0, abs(gap)) if np.isfinite(gap) else upper + 1.0

    def branch(j: int):
        def f(lam: float) -> float:
            return float(eigh(feshbach_map(H, P, lam), eigvals_only=True)[j]) - lam
        return f

    roots = []
    for j in range(A.shape[0]):
        f = branch(j)
        f_lo, f_hi = f(lo), f(hi)
        if f_lo * f_hi > 0:
            continue
        roots.append(brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200))
    logger.debug(f"🔎 Feshbach: {len(roots)} eigenvalues below gap {gap:.6g}")
    return sorted(roots)
