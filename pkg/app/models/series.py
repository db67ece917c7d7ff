# app/models/series.py
from dataclasses import dataclass

from app.errors import ParseError, TruncationError


@dataclass(frozen=True)
class ThetaSeriesParams:
    """Truncamiento de la serie theta: índices m en una ventana de semiancho m_max"""
    m_max: int = 8
    target_tol: float = 1e-12

    def __post_init__(self):
        if self.m_max < 1:
            raise ParseError(f"m_max debe ser positivo: {self.m_max}")
        if self.target_tol <= 0:
            raise ParseError(f"target_tol debe ser positiva: {self.target_tol}")


@dataclass(frozen=True)
class QuadratureGrid:
    """Malla tensorial n1×n2 sobre el cuadrado unidad (u₁, u₂) ↦ z = u₁ + u₂τ"""
    n1: int = 16
    n2: int = 16

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ParseError(f"Malla inválida: {self.n1}x{self.n2}")

    def doubled(self) -> 'QuadratureGrid':
        return QuadratureGrid(2 * self.n1, 2 * self.n2)

    @property
    def size(self) -> int:
        return self.n1 * self.n2


@dataclass(frozen=True)
class GalerkinBasis:
    """Corte de la base: niveles de Landau 0..n_landau y capas duales |j1|,|j2| ≤ n_fourier"""
    n_landau: int = 6
    n_fourier: int = 4

    def __post_init__(self):
        if self.n_landau < 4:
            raise TruncationError(f"Se requieren al menos 4 niveles de Landau (n_landau={self.n_landau})")
        if self.n_fourier < 2:
            raise TruncationError(f"Se requieren al menos 2 capas duales (n_fourier={self.n_fourier})")

    @property
    def n_levels(self) -> int:
        return self.n_landau + 1

    @property
    def n_plane_waves(self) -> int:
        return (2 * self.n_fourier + 1) ** 2

    @property
    def dimension(self) -> int:
        return 2 * self.n_levels + 2 * self.n_plane_waves
