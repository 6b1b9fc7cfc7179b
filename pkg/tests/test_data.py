"""Dataset container and CSV wire-format tests."""

import numpy as np
import pytest

from ahdml.data import Dataset, ObservedUnit, read_dataset_csv, write_dataset_csv
from ahdml.errors import DataFormatError, DomainError


def toy_dataset():
    return Dataset(
        w=np.array([[1.0, 2.0], [3.0, 4.0], [0.5, -1.0]]),
        a=np.array([0, 1, 1]),
        u=np.array([2.0, 5.0, 1.5]),
        delta=np.array([1, 0, 1]),
    )


class TestDataset:
    def test_validation(self):
        with pytest.raises(DomainError):
            Dataset(np.zeros((2, 1)), [0, 1], [1.0, -2.0], [0, 1])
        with pytest.raises(DomainError):
            Dataset(np.zeros((2, 1)), [0, 2], [1.0, 2.0], [0, 1])
        with pytest.raises(DomainError):
            Dataset(np.zeros((2, 1)), [0, 1], [1.0], [0, 1])

    def test_counting_process_accessors(self):
        unit = ObservedUnit(np.array([1.0]), 1, 3.0, 1)
        assert unit.counting(2.9) == 0 and unit.counting(3.0) == 1
        assert unit.at_risk(3.0) == 1 and unit.at_risk(3.1) == 0

    def test_event_times_restriction(self):
        data = toy_dataset()
        np.testing.assert_allclose(data.event_times(), [1.5, 2.0])
        np.testing.assert_allclose(data.event_times(1.6), [1.5])

    def test_truncate_keeps_horizon_events(self):
        data = Dataset(np.zeros((3, 1)), [0, 1, 0], [5.0, 12.0, 20.0], [1, 1, 1])
        cut = data.truncate(12.0)
        np.testing.assert_allclose(cut.u, [5.0, 12.0, 12.0])
        np.testing.assert_allclose(cut.delta, [1, 1, 0])


class TestCsvRoundTrip:
    def test_round_trip(self, tmp_path):
        data = toy_dataset()
        path = tmp_path / "d.csv"
        write_dataset_csv(data, path)
        back = read_dataset_csv(path)
        np.testing.assert_allclose(back.w, data.w)
        np.testing.assert_array_equal(back.a, data.a)
        np.testing.assert_allclose(back.u, data.u)
        np.testing.assert_array_equal(back.delta, data.delta)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,a,u,delta\n1,0,1,1\n")
        with pytest.raises(DataFormatError) as err:
            read_dataset_csv(path)
        assert err.value.line == 1

    def test_missing_value_names_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("w_1,a,u,delta\n1.0,0,2.0,1\n2.0,1,,0\n")
        with pytest.raises(DataFormatError) as err:
            read_dataset_csv(path)
        assert err.value.line == 3

    def test_wrong_field_count_names_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("w_1,a,u,delta\n1.0,0,2.0\n")
        with pytest.raises(DataFormatError) as err:
            read_dataset_csv(path)
        assert err.value.line == 2

    def test_non_binary_treatment_names_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("w_1,a,u,delta\n1.0,0,2.0,1\n1.0,2,2.0,1\n")
        with pytest.raises(DataFormatError) as err:
            read_dataset_csv(path)
        assert err.value.line == 3
