import pytest

from app.errors import ParseError
from app.models.scan_grid import BoundaryPoint, ScanGrid, ScanRecord, parse_range, range_values


class TestRanges:

    def test_parse(self):
        assert parse_range('0:0.5:0.1') == (0.0, 0.5, 0.1)
        assert parse_range('1.2') == (1.2, 1.2, 1.0)

    def test_parse_errors(self):
        for text in ('', 'a:b:c', '0:1', '1:0:0.1', '0:1:0', '0:1:-0.1'):
            with pytest.raises(ParseError):
                parse_range(text)

    def test_stop_is_included(self):
        assert range_values((0.0, 0.5, 0.1)) == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
        assert range_values((0.8, 2.0, 0.01))[-1] == 2.0
        assert range_values((1.0, 1.0, 1.0)) == [1.0]


class TestScanGrid:

    def test_row_major_order(self):
        grid = ScanGrid((0.0, 0.5, 0.25), (1.0, 1.2, 0.2))
        points = grid.points()
        assert grid.size == 6 == len(points)
        assert points[0] == (0, 0.0, 1.0)
        assert points[2] == (2, 0.5, 1.0)
        assert points[3] == (3, 0.0, 1.2)

    def test_rejects_lower_half_plane(self):
        with pytest.raises(ParseError):
            ScanGrid((0.0, 0.0, 1.0), (-0.5, 1.0, 0.5))

    def test_scan_key(self):
        grid = ScanGrid((0.0, 0.5, 0.25), (1.0, 1.2, 0.2))
        same = ScanGrid((0.0, 0.5, 0.25), (1.0, 1.2, 0.2))
        assert grid.scan_key(1e-6, 24) == same.scan_key(1e-6, 24)
        assert grid.scan_key(1e-6, 24) != grid.scan_key(1e-8, 24)
        assert grid.scan_key(1e-6, 24) != grid.scan_key(1e-6, 12)
        assert len(grid.scan_key(1e-6, 24)) == 40


class TestRecords:

    def test_error_record(self):
        record = ScanRecord(
            index=4, tau_re=0.1, tau_im=1.1, reduced_re=None, reduced_im=None, was_reduced=False,
            gamma=None, bound=None, argmin_a=None, argmin_b=None, beta=None, beta_bound=None,
            kappa_c=None, kappa_c_bound=None, status='error', error_message='boom',
        )
        data = record.to_dict()
        assert data['error'] == 'boom'
        assert 'gamma' not in data

    def test_boundary_point(self):
        point = BoundaryPoint(0.0, 1.73, (1.72, 1.74), 1e-7, 1e-8, 're', 12)
        assert point.to_dict()['interval'] == [1.72, 1.74]
