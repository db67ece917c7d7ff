# app/services/lattice_geometry.py
import logging
import math
from typing import List, Tuple

import numpy as np

from app.errors import DomainError
from app.models.lattice import Characteristic, LatticeFrame, ShapeParameter

logger = logging.getLogger(__name__)

# Holgura de redondeo en la frontera |τ|² = 1; dentro de ella se proyecta sobre el arco
BOUNDARY_TOL = 1e-12
MAX_REDUCTION_STEPS = 10_000
VERTEX_DEDUP_TOL = 1e-9
# Por debajo de esto |τ|² − 1 es ruido de redondeo
ARC_ROUNDING = 4 * np.finfo(float).eps

IDENTITY = np.array([[1, 0], [0, 1]], dtype=np.int64)
S_MATRIX = np.array([[0, -1], [1, 0]], dtype=np.int64)


def t_matrix(n: int) -> np.ndarray:
    return np.array([[1, n], [0, 1]], dtype=np.int64)


def mobius(g: np.ndarray, tau: complex) -> complex:
    """Acción de Möbius (pτ + q)/(rτ + s)"""
    p, q = int(g[0, 0]), int(g[0, 1])
    r, s = int(g[1, 0]), int(g[1, 1])
    return (p * tau + q) / (r * tau + s)


def sl2z_inverse(g: np.ndarray) -> np.ndarray:
    return np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]], dtype=np.int64)


def in_fundamental_domain(tau: ShapeParameter, tol: float = BOUNDARY_TOL) -> bool:
    return -0.5 < tau.re <= 0.5 and abs(tau.value) ** 2 >= 1 - tol


def _snap_to_arc(z: complex) -> complex:
    """Proyecta sobre el arco |τ| = 1 los puntos de la franja 1 − BOUNDARY_TOL ≤ |τ|² < 1"""
    if abs(z) ** 2 < 1 - ARC_ROUNDING:
        return z / abs(z)
    return z


def reduce_to_fundamental_domain(tau: ShapeParameter) -> Tuple[ShapeParameter, np.ndarray]:
    """
    Reducción de Gauss alternando T: τ → τ+n y S: τ → −1/τ

    Returns:
        (τ′ reducido, g ∈ SL(2,ℤ)) con g·τ = τ′; sobre |τ| = 1 se elige Re τ′ ≥ 0.
        Todo punto con |τ|² < 1 − BOUNDARY_TOL pasa por S; el resto queda con |τ′| ≥ 1.
    """
    z = tau.value
    g = IDENTITY.copy()

    for _ in range(MAX_REDUCTION_STEPS):
        n = math.floor(0.5 - z.real)
        if n:
            z = z + n
            g = t_matrix(n) @ g
        if abs(z) ** 2 < 1 - BOUNDARY_TOL:
            z = -1 / z
            g = S_MATRIX @ g
        else:
            break
    else:
        raise DomainError(f"La reducción de τ = {tau} no terminó en {MAX_REDUCTION_STEPS} pasos")

    # Sobre el arco unidad preferimos Re τ ≥ 0
    if abs(abs(z) ** 2 - 1) <= BOUNDARY_TOL and z.real < 0:
        z = -1 / z
        g = S_MATRIX @ g
    z = _snap_to_arc(z)

    if z.imag <= 0:
        raise DomainError(f"Pérdida de precisión reduciendo τ = {tau}")

    return ShapeParameter(float(z.real), float(z.imag), reduced=True), g


def ensure_reduced(tau: ShapeParameter) -> Tuple[ShapeParameter, np.ndarray]:
    """Devuelve τ reducido (sin tocar los que ya están en el dominio fundamental)"""
    if tau.reduced:
        return tau, IDENTITY.copy()
    if in_fundamental_domain(tau):
        z = _snap_to_arc(tau.value)
        return ShapeParameter(float(z.real), float(z.imag), reduced=True), IDENTITY.copy()
    return reduce_to_fundamental_domain(tau)


def transport_matrix(h: np.ndarray) -> np.ndarray:
    """A(h) con γ_{(a,b)}(hτ) = γ_{A(h)(a,b)}(τ)"""
    p, r = int(h[0, 0]), int(h[0, 1])
    s, t = int(h[1, 0]), int(h[1, 1])
    return np.array([[p, -s], [-r, t]], dtype=np.int64)


def transport_characteristic(q: Characteristic, g: np.ndarray) -> Characteristic:
    """
    Lleva la característica de τ a τ′ = g·τ: γ_q(τ) = γ_{q′}(τ′)
    """
    a_matrix = transport_matrix(sl2z_inverse(g))
    a_new = a_matrix[0, 0] * q.a + a_matrix[0, 1] * q.b
    b_new = a_matrix[1, 0] * q.a + a_matrix[1, 1] * q.b
    return Characteristic(float(a_new), float(b_new))


def frame(tau: ShapeParameter) -> LatticeFrame:
    """ℒ_τ = ω(ℤ + τℤ) con ω = √(2π/Im τ); dual κ₁ = ωi, κ₂ = −ωiτ"""
    omega = math.sqrt(2 * math.pi / tau.im)
    t = tau.value
    return LatticeFrame(
        tau=tau,
        omega=omega,
        basis=(complex(omega, 0.0), omega * t),
        dual_basis=(complex(0.0, omega), -1j * omega * t),
    )


def half_lattice_points(tau: ShapeParameter) -> List[Characteristic]:
    """Puntos k ∈ ½ℒ*: (0,0), (½,0), (0,½), (½,½)"""
    return [
        Characteristic(0.0, 0.0),
        Characteristic(0.5, 0.0),
        Characteristic(0.0, 0.5),
        Characteristic(0.5, 0.5),
    ]


def _dual_neighbors(lattice_frame: LatticeFrame, shells: int = 2) -> List[complex]:
    points = []
    for j1 in range(-shells, shells + 1):
        for j2 in range(-shells, shells + 1):
            if j1 == 0 and j2 == 0:
                continue
            points.append(lattice_frame.dual_point(j1, j2))
    return points


def wigner_seitz_vertices(tau: ShapeParameter) -> List[Characteristic]:
    """
    Vértices de la celda de Voronoi de la red dual alrededor de 0, como características.
    Intersección de mediatrices de los vecinos cercanos; vértices degenerados (red
    cuadrada) se deduplican con tolerancia 1e-9.
    """
    lattice_frame = frame(tau)
    neighbors = _dual_neighbors(lattice_frame)
    candidates = sorted(neighbors, key=abs)
    normals = np.array([[p.real, p.imag] for p in candidates])
    offsets = 0.5 * np.sum(normals ** 2, axis=1)
    all_normals = np.array([[p.real, p.imag] for p in neighbors])
    all_offsets = 0.5 * np.sum(all_normals ** 2, axis=1)
    scale = math.sqrt(float(np.max(offsets)))

    vertices: List[complex] = []
    for i in range(len(candidates)):
        for j in range(i + 1, len(candidates)):
            system = normals[[i, j]]
            if abs(np.linalg.det(system)) < 1e-12 * scale ** 2:
                continue
            x = np.linalg.solve(system, offsets[[i, j]])
            if np.all(all_normals @ x <= all_offsets + VERTEX_DEDUP_TOL * scale ** 2):
                point = complex(x[0], x[1])
                if all(abs(point - v) > VERTEX_DEDUP_TOL * scale for v in vertices):
                    vertices.append(point)

    vertices.sort(key=lambda v: math.atan2(v.imag, v.real))
    logger.debug(f"🔎 Wigner-Seitz vertices for τ={tau}: {len(vertices)}")
    return [Characteristic.from_k(v, tau) for v in vertices]


def fold_to_wigner_seitz(q: Characteristic, tau: ShapeParameter) -> Characteristic:
    """Traslada k por la red dual al representante más cercano al origen"""
    c = q.centered()
    best = c
    best_norm = abs(c.k(tau))
    for dn in (-1, 0, 1):
        for dm in (-1, 0, 1):
            candidate = Characteristic(c.a + dn, c.b + dm)
            norm = abs(candidate.k(tau))
            if norm < best_norm - 1e-15:
                best, best_norm = candidate, norm
    return best
