import numpy as np
import pytest

from lcirt.data import (
    ResponseDataset,
    load_csv,
    marginal_distribution,
    raw_score,
    read_rows,
    write_csv,
)
from lcirt.errors import DataError


@pytest.fixture
def rows():
    return np.array([[0, 1, 2], [2, 2, 0], [0, 1, 2], [1, 0, 0], [0, 1, 2]])


class TestDataset:
    def test_aggregation(self, rows):
        ds = ResponseDataset.from_rows(rows)
        assert ds.n == 5 and ds.r == 3 and ds.n_patterns == 3
        np.testing.assert_array_equal(ds.patterns, [[0, 1, 2], [1, 0, 0], [2, 2, 0]])
        np.testing.assert_array_equal(ds.counts, [3, 1, 1])
        assert ds.categories == (3, 3, 3)

    def test_expand_restores_multiset(self, rows):
        ds = ResponseDataset.from_rows(rows)
        back = ds.expand()
        assert sorted(map(tuple, back)) == sorted(map(tuple, rows))

    def test_inferred_minimum_two(self):
        ds = ResponseDataset.from_rows([[0, 0], [0, 1]])
        assert ds.categories == (2, 2)

    def test_declared_categories(self, rows):
        ds = ResponseDataset.from_rows(rows, categories=(3, 4, 3))
        assert ds.categories == (3, 4, 3)
        with pytest.raises(DataError, match="row 2, column 1"):
            ResponseDataset.from_rows(rows, categories=(2, 3, 3))

    def test_category_counts(self, rows):
        cc = ResponseDataset.from_rows(rows).category_counts()
        np.testing.assert_array_equal(cc[0], [3, 1, 1])
        np.testing.assert_array_equal(cc.sum(axis=1), [5, 5, 5])

    @pytest.mark.parametrize("pat,cnt", [
        ([[0, 1], [0, 1]], [1, 2]),
        ([[0, 1]], [0]),
        ([[0, 3]], [1]),
        ([[0, 1], [1, 1]], [1]),
    ])
    def test_invalid(self, pat, cnt):
        with pytest.raises(DataError):
            ResponseDataset(pat, cnt, (3, 3))

    def test_non_integer_rows(self):
        with pytest.raises(DataError):
            ResponseDataset.from_rows([[0.5, 1.0]])
        with pytest.raises(DataError, match="row 1, column 2"):
            ResponseDataset.from_rows([[0, -1]])

    def test_json_round_trip(self, rows, tmp_path):
        ds = ResponseDataset.from_rows(rows, metadata={"source": "test"})
        ds.save_json(tmp_path / "d.json")
        back = ResponseDataset.load_json(tmp_path / "d.json")
        np.testing.assert_array_equal(back.patterns, ds.patterns)
        np.testing.assert_array_equal(back.counts, ds.counts)
        assert back.categories == ds.categories and back.metadata == {"source": "test"}

    def test_json_inconsistent_n(self, rows):
        d = ResponseDataset.from_rows(rows).to_dict()
        d["n"] = 6
        with pytest.raises(DataError):
            ResponseDataset.from_dict(d)


class TestCsv:
    def test_round_trip(self, rows, tmp_path):
        path = tmp_path / "x.csv"
        write_csv(path, rows)
        np.testing.assert_array_equal(read_rows(path), rows)
        ds = load_csv(path)
        assert ds.n == 5 and ds.metadata["source"] == str(path)

    def test_header(self, rows, tmp_path):
        path = tmp_path / "x.csv"
        write_csv(path, rows, header=["a", "b", "c"])
        np.testing.assert_array_equal(read_rows(path, has_header=True), rows)

    def test_bad_cell_location(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("0,1\n1,x\n")
        with pytest.raises(DataError) as info:
            read_rows(path)
        assert (info.value.row, info.value.column) == (2, 2)

    def test_ragged(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("0,1\n1\n")
        with pytest.raises(DataError, match="ragged"):
            read_rows(path)

    def test_missing_rejected_or_dropped(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("0,1\n1,\nNA,0\n1,1\n")
        with pytest.raises(DataError, match="missing"):
            read_rows(path)
        np.testing.assert_array_equal(read_rows(path, drop_incomplete=True), [[0, 1], [1, 1]])

    def test_negative(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("0,-2\n")
        with pytest.raises(DataError, match="negative"):
            read_rows(path)

    def test_empty(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("\n\n")
        with pytest.raises(DataError):
            read_rows(path)


class TestSummaries:
    def test_marginal(self, rows):
        ds = ResponseDataset.from_rows(rows)
        np.testing.assert_allclose(marginal_distribution(ds, 0), [0.6, 0.2, 0.2])

    def test_constant_item_warns(self):
        ds = ResponseDataset.from_rows([[0, 1], [0, 0]], categories=(2, 2))
        with pytest.warns(UserWarning, match="constant"):
            np.testing.assert_allclose(marginal_distribution(ds, 0), [1.0, 0.0])

    def test_raw_score(self, rows):
        np.testing.assert_array_equal(raw_score(rows, [0, 2]), [2, 2, 2, 1, 2])
        assert raw_score(ResponseDataset.from_rows(rows), [0, 1, 2]).sum() == rows.sum()
        with pytest.raises(IndexError):
            raw_score(rows, [3])
