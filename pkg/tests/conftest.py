import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Agregar el directorio raíz al path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.models.lattice import Characteristic, ShapeParameter  # noqa: E402

HEX_VERTEX = Characteristic(1 / 3, -1 / 3)
SQUARE_VERTEX = Characteristic(0.5, 0.5)


@pytest.fixture
def hex_tau():
    return ShapeParameter(0.5, math.sqrt(3) / 2)


@pytest.fixture
def square_tau():
    return ShapeParameter(0.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def checkpoint_url(tmp_path):
    return f"sqlite:///{tmp_path / 'scan.ckpt.sqlite'}"


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ('ABRIKOSOV_TOLERANCE', 'ABRIKOSOV_MAX_RADIUS', 'ABRIKOSOV_FORMAT', 'ABRIKOSOV_THREADS',
                 'ABRIKOSOV_B_COND_RATIO', 'ABRIKOSOV_CHECKPOINT_EVERY', 'ABRIKOSOV_QUAD_GRID',
                 'ABRIKOSOV_QUAD_MAX_GRID', 'ABRIKOSOV_MIN_GRID', 'ABRIKOSOV_LOG_LEVEL', 'SCAN_DATABASE_URL'):
        monkeypatch.delenv(name, raising=False)
