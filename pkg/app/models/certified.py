# app/models/certified.py
from dataclasses import dataclass
from typing import Any, Dict, Tuple, Union

Number = Union[float, complex]


@dataclass(frozen=True)
class CertifiedValue:
    """Valor numérico con cota rigurosa del resto de truncamiento"""
    value: Number
    remainder_bound: float
    truncation_radius: int

    def __post_init__(self):
        if self.remainder_bound < 0:
            raise ValueError(f"remainder_bound negativo: {self.remainder_bound}")

    def interval(self) -> Tuple[float, float]:
        if isinstance(self.value, complex):
            raise TypeError("interval() solo aplica a valores reales")
        return self.value - self.remainder_bound, self.value + self.remainder_bound

    def certified_sign(self) -> int:
        """+1 / −1 si el signo está certificado, 0 si |value| ≤ cota"""
        if isinstance(self.value, complex):
            raise TypeError("certified_sign() solo aplica a valores reales")
        if self.value > self.remainder_bound:
            return 1
        if self.value < -self.remainder_bound:
            return -1
        return 0

    def modulus(self) -> 'CertifiedValue':
        # |·| es 1-Lipschitz: la cota se conserva
        return CertifiedValue(abs(self.value), self.remainder_bound, self.truncation_radius)

    def contains(self, exact: Number, slack: float = 0.0) -> bool:
        return abs(self.value - exact) <= self.remainder_bound + slack

    def to_dict(self) -> Dict[str, Any]:
        if isinstance(self.value, complex):
            value: Any = {'re': self.value.real, 'im': self.value.imag}
        else:
            value = self.value
        return {'value': value, 'bound': self.remainder_bound, 'radius': self.truncation_radius}
