import pytest

from app.models.scan_grid import ScanRecord
from app.repositories.scan_point_repository import ScanPointRepository
from config.database import dispose_engine, get_db_session


def make_record(index: int, gamma: float = 0.5, status: str = 'done') -> ScanRecord:
    done = status == 'done'
    return ScanRecord(
        index=index, tau_re=0.1 * index, tau_im=1.0, reduced_re=0.1 * index, reduced_im=1.0,
        was_reduced=False,
        gamma=gamma if done else None, bound=1e-7 if done else None,
        argmin_a=0.5 if done else None, argmin_b=0.5 if done else None,
        beta=1.18 if done else None, beta_bound=1e-7 if done else None,
        kappa_c=0.28 if done else None, kappa_c_bound=1e-7 if done else None,
        status=status, error_message=None if done else 'failed',
    )


@pytest.fixture
def repository(checkpoint_url):
    session = get_db_session(checkpoint_url)
    yield ScanPointRepository(session)
    session.close()
    dispose_engine(checkpoint_url)


class TestScanPointRepository:

    def test_save_and_find(self, repository):
        records = [make_record(0), make_record(1, gamma=-0.2), make_record(2, status='error')]
        assert repository.save_batch('key-a', records) == 3
        completed = repository.find_completed('key-a')
        assert sorted(completed) == [0, 1]
        assert completed[1] == records[1]

    def test_stats(self, repository):
        repository.save_batch('key-a', [make_record(0), make_record(1, gamma=-0.2), make_record(2, status='error')])
        stats = repository.get_scan_stats('key-a')
        assert stats == {'total_points': 3, 'done': 2, 'errors': 1, 'negative_gamma': 1}
        assert repository.count_by_status('key-a') == {'done': 2, 'error': 1}

    def test_keys_are_isolated(self, repository):
        repository.save_batch('key-a', [make_record(0)])
        repository.save_batch('key-b', [make_record(0), make_record(1)])
        assert sorted(repository.list_scan_keys()) == ['key-a', 'key-b']
        assert repository.clear_scan('key-b') == 2
        assert repository.list_scan_keys() == ['key-a']

    def test_clear_errors(self, repository):
        repository.save_batch('key-a', [make_record(0), make_record(1, status='error')])
        assert repository.clear_errors('key-a') == 1
        assert repository.count_by_status('key-a') == {'done': 1}

    def test_duplicate_index_rolls_back(self, repository):
        repository.save_batch('key-a', [make_record(0)])
        with pytest.raises(Exception):
            repository.save_batch('key-a', [make_record(0)])
        assert repository.get_scan_stats('key-a')['total_points'] == 1


class TestCheckCheckpointScript:

    def test_reports_and_clears(self, checkpoint_url, capsys):
        from scripts.check_checkpoint import check_checkpoint

        session = get_db_session(checkpoint_url)
        ScanPointRepository(session).save_batch('key-a', [make_record(0), make_record(1, status='error')])
        session.close()

        assert check_checkpoint(checkpoint_url) == 0
        out = capsys.readouterr().out
        assert 'Total puntos: 2' in out
        assert 'Con errores: 1' in out

        assert check_checkpoint(checkpoint_url, clear='key-a') == 0
        assert 'No hay barridos' in capsys.readouterr().out
