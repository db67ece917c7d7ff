#!/usr/bin/env python3
"""
Script de diagnóstico para inspeccionar el store de checkpoints de un barrido
Uso: python scripts/check_checkpoint.py --out gamma.csv [--clear SCAN_KEY]
"""

import sys
import argparse
from pathlib import Path
from typing import Optional, Sequence

# Agregar directorio raíz al path
sys.path.insert(0, str(Path(__file__).parent.parent))

from dotenv import load_dotenv
load_dotenv()

from config.database import checkpoint_url_for, dispose_engine, get_db_session
from app.repositories.scan_point_repository import ScanPointRepository


def check_checkpoint(database_url: str, clear: Optional[str] = None) -> int:
    """Muestra estadísticas por barrido; con clear borra los puntos de ese barrido"""

    print("=" * 80)
    print("🔍 DIAGNÓSTICO DE CHECKPOINTS")
    print("=" * 80)
    print(f"   Store: {database_url}")

    db_session = get_db_session(database_url)
    try:
        repo = ScanPointRepository(db_session)

        if clear:
            deleted = repo.clear_scan(clear)
            print(f"\n🗑️ Barrido {clear[:8]}: {deleted} puntos eliminados")

        scan_keys = repo.list_scan_keys()
        if not scan_keys:
            print("\n📋 No hay barridos guardados en el store")
            return 0

        for scan_key in scan_keys:
            stats = repo.get_scan_stats(scan_key)
            print(f"\n📊 Barrido {scan_key[:8]}:")
            print(f"   Total puntos: {stats['total_points']}")
            print(f"   ✅ Completados: {stats['done']}")
            print(f"   ❌ Con errores: {stats['errors']}")
            print(f"   ⬇️ γ < 0: {stats['negative_gamma']}")
        return 0
    except Exception as e:
        print(f"❌ Error inspeccionando checkpoints: {str(e)}")
        return 1
    finally:
        db_session.close()
        dispose_engine(database_url)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(description='Inspección del store de checkpoints de barridos')
    parser.add_argument('--out', type=str, help='Archivo de salida del barrido (el store es <out>.ckpt.sqlite)')
    parser.add_argument('--url', type=str, help='URL SQLAlchemy del store (alternativa a --out)')
    parser.add_argument('--clear', type=str, help='scan_key a eliminar')
    args = parser.parse_args(argv)

    if not args.out and not args.url:
        print("🔍 Diagnóstico de checkpoints")
        print("\nEjemplos:")
        print("  python scripts/check_checkpoint.py --out gamma.csv")
        print("  python scripts/check_checkpoint.py --url sqlite:///gamma.csv.ckpt.sqlite --clear <scan_key>")
        return 0

    database_url = args.url or checkpoint_url_for(args.out)
    return check_checkpoint(database_url, args.clear)


if __name__ == '__main__':
    sys.exit(main())
