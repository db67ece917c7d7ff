import math

import numpy as np
import pytest

from app.errors import BracketError, DomainError, OutputError
from app.models.scan_grid import ScanGrid
from app.repositories.scan_point_repository import ScanPointRepository
from app.services.report_writer import render_json
from app.services.scan_runner import ScanRunner, random_reduced_tau
from app.services.stability_functions import HEXAGONAL_TAU
from config.database import dispose_engine, get_db_session
from config.settings import RunConfig

from tests.conftest import HEX_VERTEX
from tests.test_scan_point_repository import make_record


@pytest.fixture
def runner():
    return ScanRunner(RunConfig(tolerance=1e-6, threads=2, checkpoint_every=2, minimizer_grid=8))


@pytest.fixture
def small_grid():
    return ScanGrid((0.0, 0.5, 0.25), (1.0, 1.2, 0.2))


class TestScan:

    def test_records_in_index_order(self, runner, small_grid):
        records = runner.scan(small_grid)
        assert [r.index for r in records] == list(range(6))
        assert all(r.status == 'done' for r in records)
        assert all(r.beta >= 1 for r in records)
        assert records[0].gamma == pytest.approx(0.4889130843, abs=1e-5)

    def test_resume_is_identical(self, runner, small_grid, checkpoint_url, monkeypatch):
        first = runner.scan(small_grid, checkpoint_url)

        def fail(*args, **kwargs):
            raise AssertionError('checkpointed point recomputed')

        monkeypatch.setattr(runner, 'compute_point', fail)
        second = runner.scan(small_grid, checkpoint_url)
        dispose_engine(checkpoint_url)
        assert render_json(second) == render_json(first)

    def test_changed_minimizer_grid_is_recomputed(self, runner, small_grid, checkpoint_url, monkeypatch):
        runner.scan(small_grid, checkpoint_url)
        finer = ScanRunner(RunConfig(tolerance=1e-6, threads=2, checkpoint_every=2, minimizer_grid=12))
        computed = []
        original = finer.compute_point

        def counting(index, re, im):
            computed.append(index)
            return original(index, re, im)

        monkeypatch.setattr(finer, 'compute_point', counting)
        finer.scan(small_grid, checkpoint_url)
        dispose_engine(checkpoint_url)
        assert sorted(computed) == list(range(small_grid.size))

    def test_failed_points_are_retried(self, runner, small_grid, checkpoint_url):
        key = small_grid.scan_key(runner.config.tolerance, runner.config.minimizer_grid)
        session = get_db_session(checkpoint_url)
        ScanPointRepository(session).save_batch(key, [make_record(0, status='error')])
        session.close()

        records = runner.scan(small_grid, checkpoint_url)
        assert records[0].status == 'done'

        session = get_db_session(checkpoint_url)
        stats = ScanPointRepository(session).get_scan_stats(key)
        session.close()
        dispose_engine(checkpoint_url)
        assert stats['errors'] == 0
        assert stats['done'] == 6

    def test_point_errors_are_recorded(self, runner, monkeypatch):
        def broken(*args, **kwargs):
            raise DomainError('reducción sin terminar')

        monkeypatch.setattr(runner, 'evaluate_point', broken)
        record = runner.compute_point(3, 0.1, 1.1)
        assert record.status == 'error'
        assert record.error_message == 'reducción sin terminar'

    def test_unreduced_points_are_flagged(self, runner):
        record = runner.evaluate_point(0, 1.5, math.sqrt(3) / 2)
        assert record.was_reduced
        assert record.reduced_re == pytest.approx(0.5)


class TestZeroSet:

    def test_requires_sign_change(self, runner):
        with pytest.raises(BracketError):
            runner.trace_zero('re', 0.0, (1.0, 1.2))

    def test_invalid_axis(self, runner):
        with pytest.raises(ValueError):
            runner.trace_zero('diagonal', 0.0, (1.5, 2.0))

    @pytest.mark.slow
    def test_imaginary_axis_root(self, runner):
        point = runner.trace_zero('re', 0.0, (1.5, 2.0))
        assert point.tau_im == pytest.approx(math.sqrt(3), abs=0.01)
        assert abs(point.gamma) <= 10 * point.bound or point.interval[1] - point.interval[0] < 1e-12


class TestAuditAndSpectrum:

    def test_random_reduced_tau(self, rng):
        for _ in range(100):
            tau = random_reduced_tau(rng)
            assert -0.5 <= tau.re <= 0.5
            assert abs(tau.value) >= 1
            assert tau.im <= 3.0

    @pytest.mark.slow
    def test_audit_passes(self):
        report = ScanRunner(RunConfig(tolerance=1e-10)).run_audit(HEXAGONAL_TAU, samples=2, seed=7)
        assert report['passed'], report['checks']
        assert len(report['symmetry']) == 3
        assert len(report['oracle']) == 3

    @pytest.mark.slow
    def test_spectrum_table(self):
        table = ScanRunner().spectrum_table(HEXAGONAL_TAU, HEX_VERTEX, 1.0, [0.02, 0.04, 0.0])
        assert table['basis']['dimension'] == 176
        assert table['free_spectrum_residual'] < 1e-6
        assert [row['epsilon'] for row in table['rows']] == [0.04, 0.02]
        last = table['rows'][-1]
        assert abs(last['error_minus']) < 5e-3 and abs(last['error_plus']) < 5e-3
        assert np.isfinite(table['truncation_estimate'])


class TestCheckpointStore:

    def test_unusable_store_is_an_output_error(self, runner, small_grid, tmp_path):
        blocker = tmp_path / 'blocker'
        blocker.write_text('x', encoding='utf-8')
        url = f"sqlite:///{blocker / 'store.sqlite'}"
        with pytest.raises(OutputError) as info:
            runner.scan(small_grid, url)
        dispose_engine(url)
        assert info.value.exit_code == 4
