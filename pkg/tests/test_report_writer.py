import json

import numpy as np
import pytest

from app.errors import OutputError
from app.models.certified import CertifiedValue
from app.models.stability import StabilityKind
from app.services.report_writer import CSV_COLUMNS, render_csv, render_json, to_jsonable, write_output

from tests.test_scan_point_repository import make_record


class TestJson:

    def test_to_jsonable(self):
        data = to_jsonable({
            'value': CertifiedValue(0.5, 1e-9, 7),
            'kind': StabilityKind.ASYMPTOTICALLY_STABLE,
            'z': 1 + 2j,
            'array': np.array([1.0, 2.0]),
            'flag': np.bool_(True),
            'inf': float('inf'),
            'nan': np.float64('nan'),
            'count': np.int64(3),
        })
        assert data['value'] == {'value': 0.5, 'bound': 1e-9, 'radius': 7}
        assert data['kind'] == 'AsymptoticallyStable'
        assert data['z'] == {'re': 1.0, 'im': 2.0}
        assert data['array'] == [1.0, 2.0]
        assert data['flag'] is True
        assert data['inf'] == 'inf'
        assert data['nan'] == 'nan'
        assert data['count'] == 3

    def test_render_is_stable(self):
        first = render_json({'b': 1, 'a': [0.1, 0.2]})
        second = render_json({'a': [0.1, 0.2], 'b': 1})
        assert first == second
        assert json.loads(first) == {'a': [0.1, 0.2], 'b': 1}
        assert first.endswith('\n')


class TestCsv:

    def test_header_and_cells(self):
        text = render_csv([make_record(0), make_record(1, status='error')])
        assert text.count('\r\n') == 3 and text.endswith('\r\n')
        lines = text.splitlines()
        assert lines[0] == ','.join(CSV_COLUMNS)
        done = dict(zip(CSV_COLUMNS, lines[1].split(',')))
        assert done['gamma'] == '0.5'
        assert done['was_reduced'] == 'false'
        assert done['status'] == 'done'
        failed = dict(zip(CSV_COLUMNS, lines[2].split(',')))
        assert failed['gamma'] == ''
        assert failed['status'] == 'error'

    def test_full_precision(self):
        record = make_record(0, gamma=0.1 + 0.2)
        cells = render_csv([record]).splitlines()[1].split(',')
        assert float(cells[CSV_COLUMNS.index('gamma')]) == 0.1 + 0.2


class TestWriteOutput:

    def test_file(self, tmp_path):
        path = tmp_path / 'nested' / 'out.json'
        write_output('{}\n', str(path))
        assert path.read_text(encoding='utf-8') == '{}\n'

    def test_stdout(self, capsys):
        write_output('hola\n')
        assert capsys.readouterr().out == 'hola\n'

    def test_directory_target(self, tmp_path):
        with pytest.raises(OutputError) as info:
            write_output('{}', str(tmp_path))
        assert info.value.exit_code == 4
