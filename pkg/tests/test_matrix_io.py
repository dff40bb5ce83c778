import numpy as np
import pytest

from rmtcov.errors import DataIOError, ParseError
from rmtcov.matrix_io import (format_table, parse_matrix, read_matrix, read_table,
                              write_matrix, write_text)


class TestMatrixIO:
    def test_round_trip_exact(self, tmp_path, rng):
        A = rng.standard_normal((5, 5)) * 10.0 ** rng.integers(-8, 8, (5, 5))
        path = tmp_path / "a.csv"
        write_matrix(path, A)
        np.testing.assert_array_equal(read_matrix(path), A)

    def test_header_detected(self):
        np.testing.assert_array_equal(parse_matrix("x,y\n1,2\n3,4\n"), [[1, 2], [3, 4]])

    def test_comments_and_blanks(self):
        np.testing.assert_array_equal(parse_matrix("# meta\n\n1,2\n"), [[1, 2]])

    def test_ragged_names_line(self):
        with pytest.raises(ParseError, match=":3:"):
            parse_matrix("1,2\n3,4\n5\n")

    def test_non_numeric_cell(self):
        with pytest.raises(ParseError, match="column 2"):
            parse_matrix("1,2\n3,abc\n")

    def test_empty(self):
        with pytest.raises(ParseError):
            parse_matrix("# nothing\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataIOError):
            read_matrix(tmp_path / "missing.csv")

    def test_io_error_is_oserror(self, tmp_path):
        blocker = tmp_path / "file.txt"
        blocker.write_text("")
        with pytest.raises(OSError):
            write_text(blocker / "nested.csv", "x")


class TestTables:
    def test_round_trip(self, tmp_path):
        text = format_table(["ratio", "estimator", "mean"],
                            [dict(ratio=1.5, estimator="scm", mean=0.1)], {"seed": 3})
        path = tmp_path / "t.csv"
        write_text(path, text)
        meta, rows = read_table(path)
        assert meta == {"seed": 3}
        assert rows == [{"ratio": "1.5", "estimator": "scm", "mean": "0.10000000000000001"}]
        assert float(rows[0]["mean"]) == 0.1

    def test_ragged(self, tmp_path):
        path = tmp_path / "t.csv"
        write_text(path, "a,b\n1,2\n3\n")
        with pytest.raises(ParseError):
            read_table(path)
