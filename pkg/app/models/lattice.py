# app/models/lattice.py
import cmath
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

from app.errors import DomainError, ParseError


@dataclass(frozen=True)
class ShapeParameter:
    """Parámetro de forma τ en el semiplano superior"""
    re: float
    im: float
    reduced: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise DomainError(f"τ no finito: {self.re}+{self.im}i")
        if self.im <= 0:
            raise DomainError(f"Im τ debe ser positiva (τ = {self.re}+{self.im}i)")

    @classmethod
    def from_complex(cls, value: complex, reduced: bool = False) -> 'ShapeParameter':
        return cls(float(value.real), float(value.imag), reduced)

    @classmethod
    def parse(cls, text: str) -> 'ShapeParameter':
        """Acepta "RE+IMi" (p. ej. "0.5+0.8660254i", "i", "2i") o polar "r@deg" """
        raw = (text or '').strip().replace(' ', '')
        if not raw:
            raise ParseError("τ vacío")
        try:
            if '@' in raw:
                radius, degrees = raw.split('@', 1)
                value = float(radius) * cmath.exp(1j * math.radians(float(degrees)))
            else:
                value = complex(raw.replace('i', 'j').replace('I', 'j'))
        except ValueError:
            raise ParseError(f"No se pudo interpretar τ: {text!r}")
        return cls.from_complex(value)

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    def to_dict(self) -> Dict[str, float]:
        return {'re': self.re, 'im': self.im}

    def __str__(self) -> str:
        return f"{self.re!r}{'+' if self.im >= 0 else ''}{self.im!r}i"


@dataclass(frozen=True)
class LatticeFrame:
    """Red normalizada ℒ_τ = ω(ℤ + τℤ), área de celda 2π, y su dual"""
    tau: ShapeParameter
    omega: float
    basis: Tuple[complex, complex]
    dual_basis: Tuple[complex, complex]

    @property
    def cell_area(self) -> float:
        nu1, nu2 = self.basis
        return abs((nu1.conjugate() * nu2).imag)

    def pairing_matrix(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        """Re(κ̄ᵢνⱼ) para los generadores; múltiplos de 2π"""
        return tuple(
            tuple((kappa.conjugate() * nu).real for nu in self.basis)
            for kappa in self.dual_basis
        )

    def lattice_point(self, n: int, m: int) -> complex:
        return n * self.basis[0] + m * self.basis[1]

    def dual_point(self, j1: int, j2: int) -> complex:
        """T = j2·κ₁ + j1·κ₂, con T·(u₁ν₁ + u₂ν₂) = 2π(j1·u₁ + j2·u₂)"""
        return j2 * self.dual_basis[0] + j1 * self.dual_basis[1]


@dataclass(frozen=True)
class Characteristic:
    """Característica (a, b): q = b − aτ, k = ωi·q"""
    a: float
    b: float

    @classmethod
    def from_q(cls, q: complex, tau: ShapeParameter) -> 'Characteristic':
        a = -q.imag / tau.im
        return cls(a, q.real + a * tau.re)

    @classmethod
    def from_k(cls, k: complex, tau: ShapeParameter) -> 'Characteristic':
        omega = math.sqrt(2 * math.pi / tau.im)
        return cls.from_q(k / (1j * omega), tau)

    @classmethod
    def parse(cls, text: str) -> 'Characteristic':
        """Formato "a,b" """
        try:
            a, b = (float(part) for part in text.split(','))
        except ValueError:
            raise ParseError(f"No se pudo interpretar q (se espera 'a,b'): {text!r}")
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ParseError(f"q no finito: {text!r}")
        return cls(a, b)

    def q(self, tau: ShapeParameter) -> complex:
        return self.b - self.a * tau.value

    def k(self, tau: ShapeParameter) -> complex:
        return 1j * math.sqrt(2 * math.pi / tau.im) * self.q(tau)

    def centered(self) -> 'Characteristic':
        """Representante en (−½, ½]²"""
        return Characteristic(_center(self.a), _center(self.b))

    def negated(self) -> 'Characteristic':
        return Characteristic(-self.a, -self.b)

    def canonical(self) -> 'Characteristic':
        """Representante centrado de la clase {k, −k} (γ_{−k} = γ_k)"""
        c = self.centered()
        n = self.negated().centered()
        if (c.a, c.b) >= (n.a, n.b):
            return c
        return n

    def is_origin(self, atol: float = 1e-14) -> bool:
        c = self.centered()
        return abs(c.a) <= atol and abs(c.b) <= atol

    def to_dict(self) -> Dict[str, float]:
        return {'a': self.a, 'b': self.b}


def _center(x: float) -> float:
    return x - math.ceil(x - 0.5)


def periodic_distance(p: Characteristic, r: Characteristic) -> float:
    """Distancia en (a, b) módulo ℤ²"""
    da = _center(p.a - r.a)
    db = _center(p.b - r.b)
    return math.hypot(da, db)
