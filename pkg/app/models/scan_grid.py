# app/models/scan_grid.py
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

from app.errors import ParseError

Range = Tuple[float, float, float]


def parse_range(text: str) -> Range:
    """"START:STOP:STEP" o un valor único (rango degenerado)"""
    raw = (text or '').strip()
    try:
        parts = [float(p) for p in raw.split(':')]
    except ValueError:
        raise ParseError(f"Rango inválido: {text!r}")
    if len(parts) == 1:
        return parts[0], parts[0], 1.0
    if len(parts) != 3:
        raise ParseError(f"Rango inválido (se espera START:STOP:STEP): {text!r}")
    start, stop, step = parts
    if step <= 0 or stop < start:
        raise ParseError(f"Rango inválido: {text!r}")
    return start, stop, step


def range_values(r: Range) -> List[float]:
    """Valores start + i·step con stop incluido (tolerancia relativa 1e-9 del paso)"""
    start, stop, step = r
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


@dataclass(frozen=True)
class ScanGrid:
    re_range: Range
    im_range: Range

    def __post_init__(self):
        if min(self.im_values) <= 0:
            raise ParseError(f"Im τ debe ser positiva en toda la malla: {self.im_range}")

    @property
    def re_values(self) -> List[float]:
        return range_values(self.re_range)

    @property
    def im_values(self) -> List[float]:
        return range_values(self.im_range)

    def points(self) -> List[Tuple[int, float, float]]:
        """(índice, Re τ, Im τ) en orden fila-mayor: Im exterior, Re interior"""
        out = []
        index = 0
        for im in self.im_values:
            for re in self.re_values:
                out.append((index, re, im))
                index += 1
        return out

    @property
    def size(self) -> int:
        return len(self.re_values) * len(self.im_values)

    def scan_key(self, tol: float, minimizer_grid: int) -> str:
        """Huella de lo que determina cada fila: rangos, tolerancia y malla del minimizador"""
        payload = json.dumps({'re': list(self.re_range), 'im': list(self.im_range), 'tol': tol,
                              'minimizer_grid': minimizer_grid}, sort_keys=True)
        return hashlib.sha1(payload.encode('utf-8')).hexdigest()


@dataclass(frozen=True)
class ScanRecord:
    """Una fila del barrido: γ(τ) certificado, argmin, β y κ_c"""
    index: int
    tau_re: float
    tau_im: float
    reduced_re: float
    reduced_im: float
    was_reduced: bool
    gamma: Optional[float]
    bound: Optional[float]
    argmin_a: Optional[float]
    argmin_b: Optional[float]
    beta: Optional[float]
    beta_bound: Optional[float]
    kappa_c: Optional[float]
    kappa_c_bound: Optional[float]
    status: str = 'done'
    error_message: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            'index': self.index,
            'tau': {'re': self.tau_re, 'im': self.tau_im},
            'reduced_tau': {'re': self.reduced_re, 'im': self.reduced_im},
            'was_reduced': self.was_reduced,
            'status': self.status,
        }
        if self.status == 'done':
            data.update({
                'gamma': {'value': self.gamma, 'bound': self.bound},
                'argmin': {'a': self.argmin_a, 'b': self.argmin_b},
                'beta': {'value': self.beta, 'bound': self.beta_bound},
                'kappa_c': {'value': self.kappa_c, 'bound': self.kappa_c_bound},
            })
        else:
            data['error'] = self.error_message
        return data


@dataclass(frozen=True)
class BoundaryPoint:
    """Cruce por cero de γ(τ) encontrado por bisección"""
    tau_re: float
    tau_im: float
    interval: Tuple[float, float]
    gamma: float
    bound: float
    axis: str
    iterations: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'tau': {'re': self.tau_re, 'im': self.tau_im},
            'interval': list(self.interval),
            'gamma': {'value': self.gamma, 'bound': self.bound},
            'axis': self.axis,
            'iterations': self.iterations,
        }
