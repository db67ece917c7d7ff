# config/settings.py
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

from app.errors import ConfigError

# Cargar variables de entorno
load_dotenv()

DEFAULT_MAX_RADIUS = 64
MIN_TOLERANCE = 1e-12
OUTPUT_FORMATS = ('json', 'csv')


def get_max_radius() -> int:
    """Tope del radio de truncamiento de las sumas de red (leído en cada llamada)"""
    raw = os.getenv('ABRIKOSOV_MAX_RADIUS', str(DEFAULT_MAX_RADIUS))
    try:
        radius = int(raw)
    except ValueError:
        raise ConfigError(f"ABRIKOSOV_MAX_RADIUS inválido: {raw!r}")
    if radius < 1:
        raise ConfigError(f"ABRIKOSOV_MAX_RADIUS debe ser positivo: {radius}")
    return radius


def get_log_level() -> str:
    return os.getenv('ABRIKOSOV_LOG_LEVEL', 'INFO').upper()


@dataclass(frozen=True)
class RunConfig:
    """Configuración de una ejecución (CLI, escaneos y auditorías)"""
    tolerance: float = 1e-6
    max_radius: int = DEFAULT_MAX_RADIUS
    output_format: str = 'json'
    threads: int = 4
    b_cond_ratio: float = 0.1
    checkpoint_every: int = 1000
    quadrature_grid: int = 128
    quadrature_max_grid: int = 512
    minimizer_grid: int = 24

    def __post_init__(self):
        if not (MIN_TOLERANCE <= self.tolerance < 1):
            raise ConfigError(f"tolerance fuera de rango [1e-12, 1): {self.tolerance}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(f"output_format debe ser uno de {OUTPUT_FORMATS}: {self.output_format!r}")
        for name in ('max_radius', 'threads', 'checkpoint_every', 'quadrature_grid',
                     'quadrature_max_grid', 'minimizer_grid'):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} debe ser positivo: {getattr(self, name)}")
        if self.quadrature_grid < 16:
            raise ConfigError("quadrature_grid debe ser al menos 16")
        if self.b_cond_ratio <= 0:
            raise ConfigError(f"b_cond_ratio debe ser positivo: {self.b_cond_ratio}")

    @classmethod
    def from_env(cls) -> 'RunConfig':
        """Construye la configuración desde variables de entorno"""
        env_map = {
            'tolerance': ('ABRIKOSOV_TOLERANCE', float),
            'max_radius': ('ABRIKOSOV_MAX_RADIUS', int),
            'output_format': ('ABRIKOSOV_FORMAT', str),
            'threads': ('ABRIKOSOV_THREADS', int),
            'b_cond_ratio': ('ABRIKOSOV_B_COND_RATIO', float),
            'checkpoint_every': ('ABRIKOSOV_CHECKPOINT_EVERY', int),
            'quadrature_grid': ('ABRIKOSOV_QUAD_GRID', int),
            'quadrature_max_grid': ('ABRIKOSOV_QUAD_MAX_GRID', int),
            'minimizer_grid': ('ABRIKOSOV_MIN_GRID', int),
        }
        values: Dict[str, Any] = {}
        for name, (var, cast) in env_map.items():
            raw = os.getenv(var)
            if raw is None or raw == '':
                continue
            try:
                values[name] = cast(raw)
            except ValueError:
                raise ConfigError(f"Valor inválido para {var}: {raw!r}")
        return cls(**values)

    @classmethod
    def from_yaml(cls, path: str, base: Optional['RunConfig'] = None) -> 'RunConfig':
        """Superpone un archivo YAML sobre la configuración base"""
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError(f"Archivo de configuración no encontrado: {path}")
        with open(config_path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"El archivo de configuración debe ser un mapeo: {path}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Claves desconocidas en {path}: {', '.join(unknown)}")
        return (base or cls.from_env()).with_overrides(**data)

    def with_overrides(self, **overrides) -> 'RunConfig':
        """Aplica overrides (los valores None se ignoran)"""
        clean = {k: v for k, v in overrides.items() if v is not None}
        try:
            return replace(self, **clean)
        except TypeError as e:
            raise ConfigError(str(e))

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_run_config(config_path: Optional[str] = None, **overrides) -> RunConfig:
    """Entorno -> YAML opcional -> flags de la CLI"""
    config = RunConfig.from_env()
    if config_path:
        config = RunConfig.from_yaml(config_path, base=config)
    return config.with_overrides(**overrides)
