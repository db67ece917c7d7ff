# config/database.py
from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import sessionmaker, Session, declarative_base
from typing import Dict, Optional
import os
from dotenv import load_dotenv

# Cargar variables de entorno
load_dotenv()

# Base para modelos
Base = declarative_base()

# Cache de engines por URL (un store de checkpoints por archivo de salida)
_engines: Dict[str, Engine] = {}


def checkpoint_url_for(out_path: str) -> str:
    """URL del store de checkpoints: SCAN_DATABASE_URL o un sidecar SQLite junto al archivo de salida"""
    url = os.getenv('SCAN_DATABASE_URL')
    if url:
        return url
    return f"sqlite:///{os.path.abspath(out_path)}.ckpt.sqlite"


def get_engine(database_url: str) -> Engine:
    """Crea (o reutiliza) el engine para la URL dada"""
    engine = _engines.get(database_url)
    if engine is None:
        engine = create_engine(
            database_url,
            pool_pre_ping=True,
            echo=False  # Sin debug por defecto
        )
        _engines[database_url] = engine
    return engine


def init_db(engine: Engine) -> None:
    """Crea las tablas si no existen"""
    # Importar modelos para registrarlos en Base.metadata
    from app.models import scan_point  # noqa: F401
    Base.metadata.create_all(bind=engine)


def get_db_session(database_url: str, create_tables: bool = True) -> Session:
    """Genera una sesión de base de datos"""
    engine = get_engine(database_url)
    if create_tables:
        init_db(engine)
    SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)
    return SessionLocal()


def dispose_engine(database_url: Optional[str] = None) -> None:
    """Libera engines (todos si no se indica URL)"""
    urls = [database_url] if database_url else list(_engines)
    for url in urls:
        engine = _engines.pop(url, None)
        if engine is not None:
            engine.dispose()
