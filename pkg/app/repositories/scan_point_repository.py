# app/repositories/scan_point_repository.py
import logging
from typing import Dict, List

from sqlalchemy import and_, func
from sqlalchemy.orm import Session

from app.models.scan_grid import ScanRecord
from app.models.scan_point import TblScanPoint

logger = logging.getLogger(__name__)


class ScanPointRepository:
    def __init__(self, db_session: Session):
        self.db_session = db_session

    def save_batch(self, scan_key: str, records: List[ScanRecord]) -> int:
        """Guarda un lote de puntos del barrido y hace commit"""
        try:
            for record in records:
                self.db_session.add(TblScanPoint(
                    scan_key=scan_key,
                    point_index=record.index,
                    tau_re=record.tau_re,
                    tau_im=record.tau_im,
                    reduced_re=record.reduced_re,
                    reduced_im=record.reduced_im,
                    was_reduced=record.was_reduced,
                    gamma=record.gamma,
                    bound=record.bound,
                    argmin_a=record.argmin_a,
                    argmin_b=record.argmin_b,
                    beta=record.beta,
                    beta_bound=record.beta_bound,
                    kappa_c=record.kappa_c,
                    kappa_c_bound=record.kappa_c_bound,
                    status=record.status,
                    error_message=record.error_message,
                ))
            self.db_session.commit()
            return len(records)
        except Exception as e:
            self.db_session.rollback()
            logger.error(f"Error saving checkpoint batch: {e}")
            raise

    def find_completed(self, scan_key: str) -> Dict[int, ScanRecord]:
        """Puntos ya calculados (status 'done') indexados por point_index"""
        rows = self.db_session.query(TblScanPoint).filter(
            and_(
                TblScanPoint.scan_key == scan_key,
                TblScanPoint.status == 'done'
            )
        ).order_by(TblScanPoint.point_index).all()
        return {row.point_index: self._to_record(row) for row in rows}

    def count_by_status(self, scan_key: str) -> Dict[str, int]:
        rows = self.db_session.query(TblScanPoint.status, func.count(TblScanPoint.id)).filter(
            TblScanPoint.scan_key == scan_key
        ).group_by(TblScanPoint.status).all()
        return {status: count for status, count in rows}

    def get_scan_stats(self, scan_key: str) -> dict:
        """Estadísticas del checkpoint de un barrido"""
        counts = self.count_by_status(scan_key)
        negative = self.db_session.query(TblScanPoint).filter(
            and_(
                TblScanPoint.scan_key == scan_key,
                TblScanPoint.status == 'done',
                TblScanPoint.gamma < 0
            )
        ).count()
        return {
            'total_points': sum(counts.values()),
            'done': counts.get('done', 0),
            'errors': counts.get('error', 0),
            'negative_gamma': negative,
        }

    def list_scan_keys(self) -> List[str]:
        rows = self.db_session.query(TblScanPoint.scan_key).distinct().all()
        return [row[0] for row in rows]

    def clear_scan(self, scan_key: str) -> int:
        """Elimina los puntos de un barrido; devuelve cuántos se borraron"""
        try:
            deleted = self.db_session.query(TblScanPoint).filter(
                TblScanPoint.scan_key == scan_key
            ).delete()
            self.db_session.commit()
            return deleted
        except Exception as e:
            self.db_session.rollback()
            logger.error(f"Error clearing scan {scan_key}: {e}")
            return 0

    def clear_errors(self, scan_key: str) -> int:
        """Borra los puntos con status 'error' para que se recalculen al reanudar"""
        try:
            deleted = self.db_session.query(TblScanPoint).filter(
                and_(
                    TblScanPoint.scan_key == scan_key,
                    TblScanPoint.status == 'error'
                )
            ).delete()
            self.db_session.commit()
            if deleted:
                logger.info(f"🔄 {deleted} failed points of scan {scan_key[:8]} will be retried")
            return deleted
        except Exception as e:
            self.db_session.rollback()
            logger.error(f"Error clearing failed points of {scan_key}: {e}")
            return 0

    @staticmethod
    def _to_record(row: TblScanPoint) -> ScanRecord:
        return ScanRecord(
            index=row.point_index,
            tau_re=row.tau_re,
            tau_im=row.tau_im,
            reduced_re=row.reduced_re,
            reduced_im=row.reduced_im,
            was_reduced=bool(row.was_reduced),
            gamma=row.gamma,
            bound=row.bound,
            argmin_a=row.argmin_a,
            argmin_b=row.argmin_b,
            beta=row.beta,
            beta_bound=row.beta_bound,
            kappa_c=row.kappa_c,
            kappa_c_bound=row.kappa_c_bound,
            status=row.status,
            error_message=row.error_message,
        )
