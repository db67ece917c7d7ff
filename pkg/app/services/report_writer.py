# app/services/report_writer.py
import csv
import io
import json
import logging
import math
import sys
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np

from app.errors import OutputError
from app.models.scan_grid import ScanRecord

logger = logging.getLogger(__name__)

# Encabezado fijo del CSV; las columnas de cotas van después de las principales
CSV_COLUMNS = (
    'tau_re', 'tau_im', 'gamma', 'bound', 'argmin_a', 'argmin_b', 'beta', 'kappa_c',
    'beta_bound', 'kappa_c_bound', 'reduced_re', 'reduced_im', 'was_reduced', 'status',
)


def to_jsonable(obj: Any) -> Any:
    """Convierte dataclasses con to_dict, numpy, complejos y no finitos a tipos JSON"""
    if hasattr(obj, 'to_dict'):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {'re': to_jsonable(float(obj.real)), 'im': to_jsonable(float(obj.imag))}
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else str(value)
    return obj


def render_json(data: Any) -> str:
    return json.dumps(to_jsonable(data), indent=2, sort_keys=True, ensure_ascii=False) + '\n'


def _csv_cell(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    return repr(float(value)) if isinstance(value, float) else str(value)


def render_csv(records: Iterable[ScanRecord]) -> str:
    """CSV plano (RFC 4180, separador decimal '.') con el encabezado CSV_COLUMNS"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\r\n')
    writer.writerow(CSV_COLUMNS)
    for record in records:
        writer.writerow([_csv_cell(getattr(record, column)) for column in CSV_COLUMNS])
    return buffer.getvalue()


def write_output(text: str, out_path: Optional[str] = None) -> None:
    """
    Escribe en out_path (o stdout). El archivo se reemplaza completo.

    Raises:
        OutputError: si el archivo no se puede escribir
    """
    if not out_path:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(out_path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
    except OSError as e:
        raise OutputError(f"No se pudo escribir {out_path}: {e}", details={'path': str(out_path)})
    logger.info(f"💾 Output written to {out_path} ({len(text)} bytes)")
