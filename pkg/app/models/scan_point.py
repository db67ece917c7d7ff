# app/models/scan_point.py
from sqlalchemy import Boolean, Column, DateTime, Float, Integer, String, Text, UniqueConstraint, func
from config.database import Base


class TblScanPoint(Base):
    __tablename__ = 'tbl_scan_point'
    __table_args__ = (UniqueConstraint('scan_key', 'point_index', name='uq_scan_point'),)

    id = Column(Integer, primary_key=True, autoincrement=True)
    scan_key = Column(String(40), nullable=False, index=True)  # sha1 de malla + tolerancia
    point_index = Column(Integer, nullable=False)  # orden fila-mayor en la malla
    tau_re = Column(Float, nullable=False)
    tau_im = Column(Float, nullable=False)
    reduced_re = Column(Float, nullable=True)
    reduced_im = Column(Float, nullable=True)
    was_reduced = Column(Boolean, default=False)
    gamma = Column(Float, nullable=True)
    bound = Column(Float, nullable=True)
    argmin_a = Column(Float, nullable=True)
    argmin_b = Column(Float, nullable=True)
    beta = Column(Float, nullable=True)
    beta_bound = Column(Float, nullable=True)
    kappa_c = Column(Float, nullable=True)
    kappa_c_bound = Column(Float, nullable=True)
    status = Column(String(10), default='done')  # 'done', 'error'
    error_message = Column(Text, nullable=True)
    created_at = Column(DateTime, server_default=func.now())

    def __repr__(self):
        return f"<TblScanPoint(scan_key='{self.scan_key}', index={self.point_index}, status='{self.status}')>"
