# app/errors.py
from typing import Any, Dict, List, Optional


class AbrikosovError(Exception):
    """Error base de la librería; exit_code es el código de salida de la CLI"""
    exit_code = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        return {'error': type(self).__name__, 'message': self.message, **self.details}


class DomainError(AbrikosovError):
    """τ fuera del semiplano superior o reducción que no termina"""
    exit_code = 2


class ParseError(AbrikosovError):
    exit_code = 2


class ConfigError(ParseError):
    pass


class ToleranceError(AbrikosovError):
    """La tolerancia pedida no se alcanza dentro de los topes"""
    exit_code = 3

    def __init__(self, message: str, achievable_bound: float):
        super().__init__(message, {'achievable_bound': achievable_bound})
        self.achievable_bound = achievable_bound


class OutputError(AbrikosovError):
    exit_code = 4


class AuditFailure(AbrikosovError):
    exit_code = 5

    def __init__(self, message: str, report: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.report = report or {}


class ConvergenceError(AbrikosovError):
    def __init__(self, message: str, trace: Optional[List[Any]] = None):
        super().__init__(message, {'trace': trace or []})
        self.trace = trace or []


class QuadratureError(AbrikosovError):
    pass


class InvertibilityError(AbrikosovError):
    pass


class RegimeError(AbrikosovError):
    pass


class BracketError(AbrikosovError):
    pass


class TruncationError(AbrikosovError):
    pass


class PrecisionError(AbrikosovError):
    pass
