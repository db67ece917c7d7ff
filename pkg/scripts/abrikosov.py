#!/usr/bin/env python3
"""
CLI de estabilidad de redes de Abrikosov
Uso: python scripts/abrikosov.py <comando> [--tau T] [--q a,b] [--tol TOL] [--format json|csv] [--out PATH]
"""

import sys
import os
import argparse
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

# Agregar el directorio raíz al path
sys.path.insert(0, str(Path(__file__).parent.parent))

from dotenv import load_dotenv

# Cargar variables de entorno
load_dotenv()

try:
    from app.errors import AbrikosovError, AuditFailure, OutputError, ParseError
    from app.models.lattice import Characteristic, ShapeParameter
    from app.models.scan_grid import ScanGrid, ScanRecord, parse_range
    from app.models.series import GalerkinBasis
    from app.services.lattice_geometry import ensure_reduced, transport_characteristic
    from app.services.report_writer import render_csv, render_json, write_output
    from app.services.scan_runner import ScanRunner
    from app.services.stability_functions import (
        HEXAGONAL_TAU,
        SQUARE_TAU,
        beta,
        classify,
        gamma,
        gamma_k,
        kappa_c,
    )
    from config.database import checkpoint_url_for, dispose_engine
    from config.settings import RunConfig, get_log_level, load_run_config
except ImportError as e:
    print(f"❌ Error importando módulos: {e}")
    print("Asegúrate de que estás en el directorio correcto y que las dependencias están instaladas")
    sys.exit(1)

logger = logging.getLogger('abrikosov')

# Valores publicados de γ; se reportan junto a los calculados
PUBLISHED_GAMMA = {'hexagonal': 0.64, 'square': 0.40}
DEFAULT_AUDIT_TAU = '0.5+0.8660254037844386i'


def _parse_floats(text: str, name: str) -> List[float]:
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise ParseError(f"{name} inválido: {text!r}")


def _tau(args) -> ShapeParameter:
    if not args.tau:
        raise ParseError("Falta --tau")
    return ShapeParameter.parse(args.tau)


def _q(args, required: bool = False) -> Optional[Characteristic]:
    if not args.q:
        if required:
            raise ParseError("Falta --q a,b")
        return None
    return Characteristic.parse(args.q)


def _required(args, name: str) -> float:
    value = getattr(args, name)
    if value is None:
        raise ParseError(f"Falta --{name}")
    return value


def _reduction(tau: ShapeParameter) -> Dict[str, Any]:
    reduced, g = ensure_reduced(tau)
    return {
        'input_tau': tau.to_dict(),
        'reduced_tau': reduced.to_dict(),
        'was_reduced': (reduced.re, reduced.im) != (tau.re, tau.im),
        'matrix': g.tolist(),
    }


def _warn_published(tau: ShapeParameter, value: float) -> None:
    for name, reference in (('hexagonal', HEXAGONAL_TAU), ('square', SQUARE_TAU)):
        if abs(tau.value - reference.value) < 1e-6:
            logger.warning(f"⚠️ published γ at the {name} lattice: {PUBLISHED_GAMMA[name]}; computed {value:.6f}")


# --------------------------------------------------------------------- comandos

def cmd_reduce(args, config: RunConfig) -> Dict[str, Any]:
    tau = _tau(args)
    report = _reduction(tau)
    q = _q(args)
    if q is not None:
        _, g = ensure_reduced(tau)
        report['q'] = q.to_dict()
        report['transported_q'] = transport_characteristic(q, g).to_dict()
    return report


def cmd_gamma(args, config: RunConfig) -> Any:
    tau = _tau(args)
    q = _q(args)
    tol = config.tolerance
    report = _reduction(tau)
    reduced, _ = ensure_reduced(tau)
    if report['was_reduced']:
        logger.info(f"📋 τ={tau} reduced to {reduced}; γ is modular invariant")

    b = beta(reduced, tol)
    kc = kappa_c(reduced, tol)
    if q is None:
        result = gamma(reduced, tol, grid=config.minimizer_grid)
        value, argmin = result.value, result.argmin_q
        report.update({'gamma': value, 'argmin': argmin})
        _warn_published(reduced, value.value)
    else:
        result = gamma_k(tau, q, tol)
        value, argmin = result.gamma_k, result.q
        report.update({
            'gamma_k': value,
            'q': q,
            'transported_q': argmin,
            'gamma_q1': result.gamma_q1,
            'gamma_q2': result.gamma_q2,
            'gamma_01': result.gamma_01,
        })
        if abs(argmin.centered().a) == 0.5 and abs(argmin.centered().b) == 0.5:
            _warn_published(reduced, value.value)
    report.update({'beta': b, 'kappa_c': kc, 'tolerance': tol})

    if config.output_format == 'csv':
        return [ScanRecord(
            index=0, tau_re=tau.re, tau_im=tau.im,
            reduced_re=reduced.re, reduced_im=reduced.im, was_reduced=report['was_reduced'],
            gamma=value.value, bound=value.remainder_bound, argmin_a=argmin.a, argmin_b=argmin.b,
            beta=b.value, beta_bound=b.remainder_bound, kappa_c=kc.value, kappa_c_bound=kc.remainder_bound,
        )]
    return report


def cmd_beta(args, config: RunConfig) -> Dict[str, Any]:
    tau = _tau(args)
    report = _reduction(tau)
    report.update({'beta': beta(tau, config.tolerance), 'tolerance': config.tolerance})
    return report


def cmd_kappa_c(args, config: RunConfig) -> Dict[str, Any]:
    tau = _tau(args)
    report = _reduction(tau)
    report.update({'kappa_c': kappa_c(tau, config.tolerance), 'tolerance': config.tolerance})
    return report


def cmd_classify(args, config: RunConfig) -> Dict[str, Any]:
    tau = _tau(args)
    verdict = classify(tau, _required(args, 'kappa'), _required(args, 'b'),
                       config.tolerance, config.b_cond_ratio)
    report = _reduction(tau)
    report.update(verdict.to_dict())
    report.update({'kappa': args.kappa, 'b': args.b})
    return report


def cmd_minimize(args, config: RunConfig) -> Dict[str, Any]:
    tau = _tau(args)
    reduced, _ = ensure_reduced(tau)
    result = gamma(reduced, config.tolerance, grid=args.grid or config.minimizer_grid, domain=args.domain)
    report = _reduction(tau)
    report.update(result.to_dict())
    return report


def cmd_scan(args, config: RunConfig) -> Any:
    if not args.re or not args.im:
        raise ParseError("scan requiere --re y --im (START:STOP:STEP)")
    grid = ScanGrid(parse_range(args.re), parse_range(args.im))
    runner = ScanRunner(config)
    database_url = None
    if args.out and not args.no_checkpoint:
        # El sidecar vive junto a la salida
        try:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OutputError(f"No se pudo preparar {args.out}: {e}", details={'path': args.out})
        database_url = checkpoint_url_for(args.out)
    try:
        records = runner.scan(grid, database_url)
    finally:
        if database_url:
            dispose_engine(database_url)
    if config.output_format == 'csv':
        return records
    return {
        're_range': list(grid.re_range),
        'im_range': list(grid.im_range),
        'tolerance': config.tolerance,
        'points': records,
    }


def cmd_zeroset(args, config: RunConfig) -> Dict[str, Any]:
    if (args.re_fixed is None) == (args.im_fixed is None):
        raise ParseError("zeroset requiere exactamente uno de --re-fixed o --im-fixed")
    if not args.bracket:
        raise ParseError("zeroset requiere --bracket LO,HI")
    axis, fixed = ('re', args.re_fixed) if args.re_fixed is not None else ('im', args.im_fixed)
    runner = ScanRunner(config)
    points = []
    for text in args.bracket:
        bracket = _parse_floats(text, '--bracket')
        if len(bracket) != 2:
            raise ParseError(f"--bracket espera LO,HI: {text!r}")
        point = runner.trace_zero(axis, fixed, (bracket[0], bracket[1]))
        data = point.to_dict()
        data['modulus'] = math.hypot(point.tau_re, point.tau_im)
        points.append(data)
    return {'axis': axis, 'fixed': fixed, 'tolerance': config.tolerance, 'boundary_points': points}


def cmd_audit(args, config: RunConfig) -> Dict[str, Any]:
    tau = ShapeParameter.parse(args.tau or DEFAULT_AUDIT_TAU)
    return ScanRunner(config).run_audit(tau, samples=args.samples, seed=args.seed)


def cmd_spectrum(args, config: RunConfig) -> Dict[str, Any]:
    tau = _tau(args)
    q = _q(args, required=True)
    kappa = _required(args, 'kappa')
    eps_list = _parse_floats(args.eps, '--eps')
    basis = GalerkinBasis(n_landau=args.landau, n_fourier=args.shells)
    report = ScanRunner(config).spectrum_table(tau, q, kappa, eps_list, basis)
    if args.b is not None:
        report['classification'] = classify(tau, kappa, args.b, config.tolerance, config.b_cond_ratio).to_dict()
    return report


HANDLERS = {
    'reduce': cmd_reduce,
    'gamma': cmd_gamma,
    'beta': cmd_beta,
    'kappa-c': cmd_kappa_c,
    'classify': cmd_classify,
    'minimize': cmd_minimize,
    'scan': cmd_scan,
    'zeroset': cmd_zeroset,
    'audit': cmd_audit,
    'spectrum': cmd_spectrum,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--tau', type=str, help="Parámetro de forma, p. ej. '0.5+0.8660254i', 'i' o '1@60'")
    common.add_argument('--q', type=str, help="Característica 'a,b'")
    common.add_argument('--kappa', type=float, help='Parámetro de Ginzburg-Landau κ')
    common.add_argument('--b', type=float, help='Campo magnético promedio b')
    common.add_argument('--tol', type=float, help='Tolerancia (default 1e-6)')
    common.add_argument('--format', choices=('json', 'csv'), help='Formato de salida')
    common.add_argument('--out', type=str, help='Archivo de salida (stdout si se omite)')
    common.add_argument('--threads', type=int, help='Hilos para el barrido')
    common.add_argument('--seed', type=int, default=0, help='Semilla de la auditoría (default: 0)')
    common.add_argument('--config', type=str, help='Archivo YAML de configuración')
    common.add_argument('--max-radius', type=int, help='Tope del radio de las sumas de red')

    parser = argparse.ArgumentParser(description='Estabilidad de redes de Abrikosov: γ(τ), β(τ), κ_c(τ) y espectros')
    sub = parser.add_subparsers(dest='command')

    sub.add_parser('reduce', parents=[common], help='Reducir τ al dominio fundamental')
    sub.add_parser('gamma', parents=[common], help='γ(τ) o γ_k(τ) certificados')
    sub.add_parser('beta', parents=[common], help='Constante de Abrikosov β(τ)')
    sub.add_parser('kappa-c', parents=[common], help='Umbral κ_c(τ)')
    sub.add_parser('classify', parents=[common], help='Clasificación de estabilidad')

    minimize = sub.add_parser('minimize', parents=[common], help='Minimización de γ_k con rastro de multistarts')
    minimize.add_argument('--domain', choices=('cell', 'wigner_seitz'), default='cell')
    minimize.add_argument('--grid', type=int, help='Malla gruesa del minimizador')

    scan = sub.add_parser('scan', parents=[common], help='Barrido de γ(τ) sobre una malla')
    scan.add_argument('--re', type=str, help='Rango de Re τ START:STOP:STEP')
    scan.add_argument('--im', type=str, help='Rango de Im τ START:STOP:STEP')
    scan.add_argument('--no-checkpoint', action='store_true', help='No usar el store de checkpoints')

    zeroset = sub.add_parser('zeroset', parents=[common], help='Cruces por cero de γ(τ) por bisección')
    zeroset.add_argument('--re-fixed', type=float)
    zeroset.add_argument('--im-fixed', type=float)
    zeroset.add_argument('--bracket', action='append', help='LO,HI (repetible)')

    audit = sub.add_parser('audit', parents=[common], help='Auditoría de simetrías y puntos críticos')
    audit.add_argument('--samples', type=int, default=20)

    spectrum = sub.add_parser('spectrum', parents=[common], help='Tabla de convergencia de Galerkin')
    spectrum.add_argument('--eps', type=str, default='0.08,0.04,0.02')
    spectrum.add_argument('--landau', type=int, default=GalerkinBasis.n_landau)
    spectrum.add_argument('--shells', type=int, default=GalerkinBasis.n_fourier)
    return parser


def print_usage(parser: argparse.ArgumentParser) -> None:
    parser.print_help()
    print("\nEjemplos:")
    print("  python scripts/abrikosov.py gamma --tau 0.5+0.8660254i")
    print("  python scripts/abrikosov.py gamma --tau i --q 0.5,0.5")
    print("  python scripts/abrikosov.py classify --tau i --kappa 1 --b 0.95")
    print("  python scripts/abrikosov.py scan --re 0:0.5:0.01 --im 0.866:2.0:0.01 --format csv --out gamma.csv")
    print("  python scripts/abrikosov.py zeroset --re-fixed 0 --bracket 1.5,2.0")
    print("  python scripts/abrikosov.py audit --samples 200 --seed 7")
    print("  python scripts/abrikosov.py spectrum --tau 0.5+0.8660254i --q 0.3333333333,-0.3333333333 --kappa 1")


def _emit(result: Any, config: RunConfig, out: Optional[str]) -> None:
    if config.output_format == 'csv':
        if not isinstance(result, list):
            raise ParseError("El formato csv solo está disponible para gamma y scan")
        write_output(render_csv(result), out)
    else:
        write_output(render_json(result), out)


def _fail(error: AbrikosovError) -> int:
    logger.error(f"❌ {type(error).__name__}: {error.message}")
    payload = error.to_dict()
    payload['exit_code'] = error.exit_code
    sys.stderr.write(json.dumps(payload, indent=2, sort_keys=True, default=str) + '\n')
    return error.exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        print_usage(parser)
        return 0

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command is None:
        print_usage(parser)
        return 0

    logging.basicConfig(
        level=getattr(logging, get_log_level(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    try:
        config = load_run_config(
            args.config,
            tolerance=args.tol,
            output_format=args.format,
            threads=args.threads,
            max_radius=args.max_radius,
        )
        # El tope de radio se lee del entorno en cada suma de red
        os.environ['ABRIKOSOV_MAX_RADIUS'] = str(config.max_radius)
        result = HANDLERS[args.command](args, config)
        _emit(result, config, args.out)
        return 0
    except AuditFailure as e:
        write_output(render_json(e.report), args.out)
        return _fail(e)
    except AbrikosovError as e:
        return _fail(e)
    except Exception as e:
        logger.error(f"Error ejecutando {args.command}: {e}")
        return 1


if __name__ == '__main__':
    sys.exit(main())
