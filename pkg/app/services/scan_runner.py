# app/services/scan_runner.py
import asyncio
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sqlalchemy.exc import SQLAlchemyError

from app.errors import AbrikosovError, AuditFailure, BracketError, OutputError
from app.models.lattice import Characteristic, ShapeParameter
from app.models.scan_grid import BoundaryPoint, ScanGrid, ScanRecord
from app.models.series import GalerkinBasis
from app.repositories.scan_point_repository import ScanPointRepository
from app.services.fiber_spectrum import mu_pm
from app.services.galerkin import GalerkinAssembler, check_regime
from app.services.lattice_geometry import ensure_reduced, wigner_seitz_vertices
from app.services.quadrature_oracle import avg_abs4, compare_with_lattice_sums
from app.services.stability_functions import (
    beta,
    critical_point_residuals,
    gamma,
    kappa_c_from_beta,
    monotonicity_report,
    symmetry_residuals,
)
from config.database import get_db_session
from config.settings import RunConfig

logger = logging.getLogger(__name__)

# Valores publicados que se reportan junto a los calculados (no se exigen)
PUBLISHED_IMAGINARY_AXIS_ROOT = 1.81
PUBLISHED_MODULUS_THRESHOLD = 1.3

MAX_BISECTIONS = 200
HALF_LATTICE_GRADIENT_TOL = 1e-4
TAU_GRADIENT_TOL = 1e-3
AUDIT_IM_MAX = 3.0
AUDIT_ORACLE_SAMPLES = 5


def random_reduced_tau(rng: np.random.Generator, im_max: float = AUDIT_IM_MAX) -> ShapeParameter:
    """τ uniforme en el dominio fundamental truncado a Im τ ≤ im_max"""
    while True:
        re = float(rng.uniform(-0.5, 0.5))
        im = float(rng.uniform(math.sqrt(3) / 2, im_max))
        if re * re + im * im >= 1.0:
            return ShapeParameter(re, im)


def _store_error(database_url: str, error: Exception) -> OutputError:
    return OutputError(f"Store de checkpoints inutilizable: {error}", details={'database_url': database_url})


def random_characteristic(rng: np.random.Generator) -> Characteristic:
    return Characteristic(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(-0.5, 0.5)))


class ScanRunner:
    """
    Barridos de γ(τ) sobre una malla, trazado del conjunto cero, auditorías y tablas
    de espectro. Los puntos del barrido se calculan en un pool de hilos limitado por
    un semáforo; el checkpoint se guarda en SQLite cada checkpoint_every puntos.
    """

    def __init__(self, config: Optional[RunConfig] = None):
        self.config = config or RunConfig()

    # ------------------------------------------------------------------ scan

    def evaluate_point(self, index: int, re: float, im: float) -> ScanRecord:
        """γ(τ), argmin, β y κ_c en τ = re + i·im (propaga los errores)"""
        tol = self.config.tolerance
        tau = ShapeParameter(re, im)
        reduced, _ = ensure_reduced(tau)
        was_reduced = (reduced.re, reduced.im) != (tau.re, tau.im)
        result = gamma(reduced, tol, grid=self.config.minimizer_grid)
        b = beta(reduced, tol)
        kc = kappa_c_from_beta(b.value, b.remainder_bound, b.truncation_radius)
        return ScanRecord(
            index=index, tau_re=re, tau_im=im,
            reduced_re=reduced.re, reduced_im=reduced.im, was_reduced=was_reduced,
            gamma=result.value.value, bound=result.value.remainder_bound,
            argmin_a=result.argmin_q.a, argmin_b=result.argmin_q.b,
            beta=b.value, beta_bound=b.remainder_bound,
            kappa_c=kc.value, kappa_c_bound=kc.remainder_bound,
        )

    def compute_point(self, index: int, re: float, im: float) -> ScanRecord:
        """Un punto de la malla; los errores del dominio se registran con status 'error'"""
        try:
            return self.evaluate_point(index, re, im)
        except AbrikosovError as e:
            logger.warning(f"⚠️ Scan point {index} (τ={re}+{im}i) failed: {e.message}")
            return ScanRecord(
                index=index, tau_re=re, tau_im=im,
                reduced_re=None, reduced_im=None, was_reduced=False,
                gamma=None, bound=None, argmin_a=None, argmin_b=None,
                beta=None, beta_bound=None, kappa_c=None, kappa_c_bound=None,
                status='error', error_message=e.message,
            )

    async def run_scan(self, grid: ScanGrid, database_url: Optional[str] = None) -> List[ScanRecord]:
        """
        Calcula todos los puntos de la malla y los devuelve en orden de índice.

        Con database_url se reanuda desde el checkpoint: los puntos 'done' guardados se
        reutilizan tal cual y los que fallaron se recalculan.
        """
        scan_key = grid.scan_key(self.config.tolerance, self.config.minimizer_grid)
        repository: Optional[ScanPointRepository] = None
        completed: Dict[int, ScanRecord] = {}
        session = None
        if database_url:
            try:
                session = get_db_session(database_url)
                repository = ScanPointRepository(session)
                repository.clear_errors(scan_key)
                completed = repository.find_completed(scan_key)
            except SQLAlchemyError as e:
                if session is not None:
                    session.close()
                raise _store_error(database_url, e)

        pending = [p for p in grid.points() if p[0] not in completed]
        logger.info(f"🚀 Scan {scan_key[:8]}: {grid.size} points, {len(completed)} from checkpoint, "
                    f"{len(pending)} pending, threads={self.config.threads}")

        semaphore = asyncio.Semaphore(self.config.threads)

        async def process_with_semaphore(point: Tuple[int, float, float]) -> ScanRecord:
            async with semaphore:
                return await asyncio.to_thread(self.compute_point, *point)

        results: Dict[int, ScanRecord] = dict(completed)
        batch_size = self.config.checkpoint_every
        try:
            for start in range(0, len(pending), batch_size):
                batch = pending[start:start + batch_size]
                records = await asyncio.gather(*[process_with_semaphore(p) for p in batch])
                for record in records:
                    results[record.index] = record
                if repository is not None:
                    try:
                        repository.save_batch(scan_key, list(records))
                    except SQLAlchemyError as e:
                        raise _store_error(database_url, e)
                    logger.info(f"💾 Checkpoint: {len(results)}/{grid.size} points stored")
        finally:
            if session is not None:
                session.close()

        errors = sum(1 for r in results.values() if r.status != 'done')
        logger.info(f"✅ Scan {scan_key[:8]} finished: {grid.size - errors} done, {errors} errors")
        return [results[index] for index in sorted(results)]

    def scan(self, grid: ScanGrid, database_url: Optional[str] = None) -> List[ScanRecord]:
        return asyncio.run(self.run_scan(grid, database_url))

    # -------------------------------------------------------------- zero set

    def _gamma_along(self, axis: str, fixed: float, s: float):
        tau = ShapeParameter(fixed, s) if axis == 're' else ShapeParameter(s, fixed)
        return tau, gamma(tau, self.config.tolerance, grid=self.config.minimizer_grid).value

    def trace_zero(self, axis: str, fixed: float, bracket: Tuple[float, float]) -> BoundaryPoint:
        """
        Bisección de γ(τ) a lo largo de Re τ = fixed (axis='re', se mueve Im τ) o de
        Im τ = fixed (axis='im', se mueve Re τ), hasta |γ| ≤ 10·cota.

        Raises:
            BracketError: si los extremos no tienen signos certificados opuestos
        """
        if axis not in ('re', 'im'):
            raise ValueError(f"axis debe ser 're' o 'im': {axis!r}")
        lo, hi = sorted(bracket)
        _, g_lo = self._gamma_along(axis, fixed, lo)
        _, g_hi = self._gamma_along(axis, fixed, hi)
        s_lo, s_hi = g_lo.certified_sign(), g_hi.certified_sign()
        if s_lo == 0 or s_hi == 0 or s_lo == s_hi:
            raise BracketError(
                f"Sin cambio de signo certificado en [{lo}, {hi}]",
                details={'gamma_lo': g_lo.to_dict(), 'gamma_hi': g_hi.to_dict()},
            )

        iterations = 0
        tau, g_mid = self._gamma_along(axis, fixed, 0.5 * (lo + hi))
        while abs(g_mid.value) > 10 * g_mid.remainder_bound and iterations < MAX_BISECTIONS:
            mid = 0.5 * (lo + hi)
            if g_mid.certified_sign() == s_lo:
                lo = mid
            else:
                hi = mid
            iterations += 1
            if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(hi)):
                break
            tau, g_mid = self._gamma_along(axis, fixed, 0.5 * (lo + hi))

        point = BoundaryPoint(
            tau_re=tau.re, tau_im=tau.im, interval=(lo, hi),
            gamma=g_mid.value, bound=g_mid.remainder_bound, axis=axis, iterations=iterations,
        )
        logger.info(f"✅ Zero of γ at τ = {tau.re:.6f}+{tau.im:.6f}i after {iterations} bisections")
        if axis == 're' and abs(fixed) < 1e-12:
            logger.warning(f"⚠️ published imaginary-axis threshold Im τ = {PUBLISHED_IMAGINARY_AXIS_ROOT}; "
                           f"computed {tau.im:.6f}")
        modulus = abs(tau.value)
        if modulus < PUBLISHED_MODULUS_THRESHOLD:
            logger.warning(f"⚠️ published claim γ < 0 for |τ| ≥ {PUBLISHED_MODULUS_THRESHOLD}; "
                           f"boundary found at |τ| = {modulus:.6f}")
        return point

    # ----------------------------------------------------------------- audit

    def run_audit(self, tau: ShapeParameter, samples: int = 20, seed: int = 0,
                  raise_on_failure: bool = True) -> Dict[str, Any]:
        """
        Auditoría de identidades: simetrías de γ_k en muestras aleatorias, gradientes en
        puntos críticos, equivalencia con la cuadratura, β contra ⟨|φ₀|⁴⟩ y γ sobre la
        celda contra γ sobre Wigner-Seitz.

        Raises:
            AuditFailure: si algún residuo excede su cota (con el reporte completo)
        """
        tol = self.config.tolerance
        rng = np.random.default_rng(seed)
        reduced, _ = ensure_reduced(tau)
        logger.info(f"🚀 Audit at τ={reduced} with {samples} samples (seed={seed})")

        symmetry = []
        points = [(reduced, c) for c in wigner_seitz_vertices(reduced)[:1]]
        points += [(random_reduced_tau(rng), random_characteristic(rng)) for _ in range(samples)]
        for t, q in points:
            residuals = symmetry_residuals(t, q, tol)
            symmetry.append({
                'tau': t.to_dict(),
                'q': q.to_dict(),
                'residuals': residuals,
                'passed': all(r['passed'] for r in residuals.values()),
            })

        critical = critical_point_residuals(reduced)
        half_lattice_ok = all(p['gradient_norm'] <= HALF_LATTICE_GRADIENT_TOL for p in critical['half_lattice'])
        tau_points = critical['tau_points']
        tau_points_ok = (
            tau_points['hexagonal']['gradient_norm'] <= TAU_GRADIENT_TOL
            and abs(tau_points['square']['re_central']) <= TAU_GRADIENT_TOL
            and abs(tau_points['square']['im_central']) <= TAU_GRADIENT_TOL
        )
        critical['passed'] = half_lattice_ok and tau_points_ok

        oracle = []
        oracle_points = [(reduced, wigner_seitz_vertices(reduced)[0])]
        oracle_points += [(random_reduced_tau(rng), random_characteristic(rng))
                          for _ in range(min(samples, AUDIT_ORACLE_SAMPLES))]
        for t, q in oracle_points:
            comparison = compare_with_lattice_sums(t, q)
            comparison.update({'tau': t.to_dict(), 'q': q.to_dict()})
            oracle.append(comparison)

        b = beta(reduced, 1e-12)
        quadrature_beta = avg_abs4(reduced)
        beta_residual = abs(b.value - quadrature_beta)
        beta_check = {
            'lattice_sum': b.to_dict(),
            'quadrature': quadrature_beta,
            'residual': beta_residual,
            'passed': beta_residual <= max(1e-8, b.remainder_bound + 1e-10) and b.value - b.remainder_bound >= 1,
        }

        cell = gamma(reduced, tol, grid=self.config.minimizer_grid)
        ws = gamma(reduced, tol, grid=self.config.minimizer_grid, domain='wigner_seitz')
        domain_residual = abs(cell.value.value - ws.value.value)
        domains = {
            'cell': cell.value.to_dict(),
            'wigner_seitz': ws.value.to_dict(),
            'residual': domain_residual,
            'passed': domain_residual <= cell.value.remainder_bound + ws.value.remainder_bound + 1e-9,
        }

        report = {
            'tau': reduced.to_dict(),
            'input_tau': tau.to_dict(),
            'samples': samples,
            'seed': seed,
            'tolerance': tol,
            'symmetry': symmetry,
            'critical_points': critical,
            'oracle': oracle,
            'beta': beta_check,
            'domains': domains,
            'monotonicity': monotonicity_report(0.0, [1.0, 1.5, 2.0, 2.5], tol),
        }
        checks = {
            'symmetry': all(s['passed'] for s in symmetry),
            'critical_points': critical['passed'],
            'oracle': all(o['passed'] for o in oracle),
            'beta': beta_check['passed'],
            'domains': domains['passed'],
        }
        report['checks'] = checks
        report['passed'] = all(checks.values())

        if report['passed']:
            logger.info(f"✅ Audit passed: {len(symmetry)} symmetry samples, {len(oracle)} oracle samples")
        else:
            failed = [name for name, ok in checks.items() if not ok]
            logger.error(f"❌ Audit failed: {', '.join(failed)}")
            if raise_on_failure:
                raise AuditFailure(f"Audit failed: {', '.join(failed)}", report=report)
        return report

    # -------------------------------------------------------------- spectrum

    def spectrum_table(self, tau: ShapeParameter, q: Characteristic, kappa: float,
                       eps_list: Sequence[float], basis: Optional[GalerkinBasis] = None) -> Dict[str, Any]:
        """
        Tabla de convergencia λ±(ε)/ε² → μ± del truncamiento de Galerkin, con la fila ε = 0
        comparada contra el espectro exacto de K⁰.
        """
        for eps in eps_list:
            check_regime(eps, self.config.b_cond_ratio)

        reduced, _ = ensure_reduced(tau)
        mu = mu_pm(tau, q, kappa)
        assembler = GalerkinAssembler(tau, q, kappa, basis, self.config.quadrature_grid)
        estimate = assembler.check_truncation()

        k0_residual = assembler.free_spectrum_residual()

        rows = []
        mu_low, mu_high = mu.sorted()
        for eps in sorted(eps_list, reverse=True):
            if eps == 0:
                continue
            result = assembler.spectrum(eps)
            lower, upper = result.lowest_pair
            rows.append({
                'epsilon': eps,
                'lambda_minus': lower,
                'lambda_plus': upper,
                'ratio_minus': lower / eps ** 2,
                'ratio_plus': upper / eps ** 2,
                'error_minus': lower / eps ** 2 - mu_low,
                'error_plus': upper / eps ** 2 - mu_high,
                'hermiticity_defect': result.hermiticity_defect,
            })
            logger.info(f"🔎 ε={eps}: λ₋/ε²={lower / eps ** 2:.6f}, λ₊/ε²={upper / eps ** 2:.6f}")

        return {
            'tau': reduced.to_dict(),
            'q': q.to_dict(),
            'reduced_q': assembler.q.to_dict(),
            'kappa': kappa,
            'basis': {
                'n_landau': assembler.basis.n_landau,
                'n_fourier': assembler.basis.n_fourier,
                'dimension': assembler.dimension,
            },
            'mu': mu.to_dict(),
            'f1_max': assembler.f1_max(),
            'truncation_estimate': estimate,
            'free_spectrum_residual': k0_residual,
            'rows': rows,
        }
