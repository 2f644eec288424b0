import json
import os

import numpy as np
import pandas as pd
import pytest

from models.dataset import Scope
from utils.serialization import to_jsonable, dumps, write_json, write_csv, row_columns


class TestToJsonable:

    def test_numpy_values(self):
        payload = to_jsonable({
            'a': np.float64(0.5), 'b': np.int64(3), 'c': np.array([1.0, 2.0]), 'd': np.bool_(True), 'e': (1, 2),
        })
        assert payload == {'a': 0.5, 'b': 3, 'c': [1.0, 2.0], 'd': True, 'e': [1, 2]}
        assert type(payload['b']) is int
        assert type(payload['d']) is bool

    def test_non_finite(self):
        assert to_jsonable([float('inf'), -np.inf, float('nan')]) == ['inf', '-inf', 'nan']

    def test_enum(self):
        assert to_jsonable({'scope': Scope.UNLABELED}) == {'scope': 'unlabeled'}


def test_dumps_is_stable():
    first = dumps({'b': 1, 'a': [0.1, np.float64(1e-17)]})
    second = dumps({'a': [0.1, 1e-17], 'b': 1})
    assert first == second
    assert json.loads(first)['a'][1] == 1e-17
    assert first.index('"a"') < first.index('"b"')


class TestWriteJson:

    def test_writes_document(self, tmp_path):
        path = tmp_path / 'out' / 'report.json'
        write_json(str(path), {'value': np.float64(2.5)})
        assert json.loads(path.read_text()) == {'value': 2.5}

    def test_failure_leaves_target_untouched(self, tmp_path):
        path = tmp_path / 'report.json'
        path.write_text('{"old": true}\n')
        with pytest.raises(TypeError):
            write_json(str(path), {'value': object()})
        assert path.read_text() == '{"old": true}\n'
        assert os.listdir(tmp_path) == ['report.json']


class TestWriteCsv:

    def test_column_order(self):
        rows = [{'b': 1, 'a': 2}, {'a': 3, 'z': 4, 'c': 5}]
        assert row_columns(rows, leading=('seed', 'a')) == ['seed', 'a', 'b', 'c', 'z']

    def test_round_trip_precision(self, tmp_path):
        path = str(tmp_path / 'trials.csv')
        value = 0.1 + 0.2
        write_csv(path, [{'trial_index': 0, 'risk': value}, {'trial_index': 1, 'extra': 'x'}], leading=('trial_index',))
        frame = pd.read_csv(path, float_precision='round_trip')
        assert list(frame.columns) == ['trial_index', 'risk', 'extra']
        assert frame.loc[0, 'risk'] == value
        assert pd.isna(frame.loc[1, 'risk'])
