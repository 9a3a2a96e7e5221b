import numpy as np
import pytest

from sparsehess.moments import (
    ColumnLayout,
    DataError,
    DataSet,
    center,
    compute_moments,
    load_csv,
    standardize,
)


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_basic_parse(self, tmp_path):
        path = write(tmp_path, "y,x1,x2\n1,2,3\n4,5,6\n7,8,9\n")
        data = load_csv(path)
        assert data.n == 3 and data.p == 2
        assert np.array_equal(data.y, [1, 4, 7])
        assert np.array_equal(data.X, [[2, 3], [5, 6], [8, 9]])
        assert data.names == ("x1", "x2")

    def test_response_not_first_column(self, tmp_path):
        path = write(tmp_path, "a,y,b\n1,2,3\n4,5,6\n")
        data = load_csv(path)
        assert np.array_equal(data.y, [2, 5])
        assert data.names == ("a", "b")

    def test_response_by_name(self, tmp_path):
        path = write(tmp_path, "a,target\n1,2\n3,4\n")
        data = load_csv(path, ColumnLayout(response="target"))
        assert np.array_equal(data.y, [2, 4])

    def test_response_by_index(self, tmp_path):
        path = write(tmp_path, "a,b\n1,2\n3,4\n")
        data = load_csv(path, ColumnLayout(response_index=2))
        assert np.array_equal(data.y, [2, 4])
        assert data.names == ("a",)

    def test_missing_response(self, tmp_path):
        path = write(tmp_path, "a,b\n1,2\n3,4\n")
        with pytest.raises(DataError, match="'y' not in header"):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="no such file"):
            load_csv(tmp_path / "absent.csv")

    def test_blank_cell_named(self, tmp_path):
        path = write(tmp_path, "y,x1\n1,\n2,3\n")
        with pytest.raises(DataError, match="line 2, column 'x1'"):
            load_csv(path)

    def test_non_numeric_cell_named(self, tmp_path):
        path = write(tmp_path, "y,x1\n1,2\n3,abc\n")
        with pytest.raises(DataError, match="line 3, column 'x1'.*'abc'"):
            load_csv(path)

    def test_header_only(self, tmp_path):
        path = write(tmp_path, "y,x1\n")
        with pytest.raises(DataError, match="insufficient rows"):
            load_csv(path)

    def test_one_data_row(self, tmp_path):
        path = write(tmp_path, "y,x1\n1,2\n")
        with pytest.raises(DataError, match="insufficient rows"):
            load_csv(path)

    def test_ragged_row_named(self, tmp_path):
        path = write(tmp_path, "y,x1,x2\n1,2,3\n4,5\n")
        with pytest.raises(DataError, match="line 3: ragged row"):
            load_csv(path)


class TestDataSet:
    def test_rejects_nonfinite(self):
        with pytest.raises(DataError, match="non-finite"):
            DataSet(y=np.array([1.0, np.nan]), X=np.ones((2, 1)))

    def test_rejects_single_row(self):
        with pytest.raises(DataError):
            DataSet(y=np.array([1.0]), X=np.ones((1, 2)))

    def test_default_names(self):
        data = DataSet(y=np.zeros(2), X=np.ones((2, 3)))
        assert data.names == ("x1", "x2", "x3")


class TestCenter:
    def test_mean_subtraction(self):
        data = DataSet(y=np.zeros(2), X=np.array([[2.0], [0.0]]))
        out = center(data)
        assert np.array_equal(out.X, [[1.0], [-1.0]])
        assert np.array_equal(out.y, data.y)

    def test_idempotent(self, rng):
        data = DataSet(y=rng.standard_normal(30), X=rng.standard_normal((30, 4)))
        once = center(data)
        twice = center(once)
        assert np.allclose(once.X, twice.X, atol=1e-14)

    def test_constant_column(self):
        data = DataSet(y=np.zeros(3), X=np.full((3, 1), 7.0))
        assert np.array_equal(center(data).X, np.zeros((3, 1)))

    def test_columns_mean_zero(self, rng):
        data = DataSet(
            y=rng.standard_normal(50),
            X=1000.0 + rng.standard_normal((50, 6)),
        )
        out = center(data)
        scale = np.abs(data.X).max(axis=0)
        assert (np.abs(out.X.mean(axis=0)) < 1e-12 * scale).all()


class TestStandardize:
    def test_unit_variance(self, rng):
        data = DataSet(y=rng.standard_normal(40),
                       X=5 * rng.standard_normal((40, 3)) + 2)
        out = standardize(data)
        assert np.allclose(out.X.std(axis=0), 1.0)
        assert np.allclose(out.X.mean(axis=0), 0.0, atol=1e-14)

    def test_constant_column_survives(self):
        data = DataSet(y=np.zeros(3), X=np.full((3, 1), 7.0))
        assert np.array_equal(standardize(data).X, np.zeros((3, 1)))


class TestComputeMoments:
    def test_scalar_case(self):
        mo = compute_moments(
            DataSet(y=np.array([1.0, -1.0]), X=np.array([[1.0], [-1.0]]))
        )
        assert mo.S[0, 0] == pytest.approx(1.0)
        assert mo.Q[0, 0] == pytest.approx(0.0, abs=1e-15)

    def test_scalar_case_shifted_y(self):
        # ybar = 1: terms (2-1)*1 and (0-1)*1 cancel
        mo = compute_moments(
            DataSet(y=np.array([2.0, 0.0]), X=np.array([[1.0], [-1.0]]))
        )
        assert mo.Q[0, 0] == pytest.approx(0.0, abs=1e-15)

    def test_two_by_two_hand_value(self):
        mo = compute_moments(
            DataSet(y=np.zeros(2), X=np.array([[1.0, 0.0], [0.0, 1.0]]))
        )
        assert np.allclose(mo.S, [[0.25, -0.25], [-0.25, 0.25]])

    def test_exact_symmetry(self, rng):
        data = DataSet(y=rng.standard_normal(25), X=rng.standard_normal((25, 6)))
        mo = compute_moments(data)
        assert np.array_equal(mo.S, mo.S.T)
        assert np.array_equal(mo.Q, mo.Q.T)

    def test_s_positive_semidefinite(self, rng):
        data = DataSet(y=rng.standard_normal(10), X=rng.standard_normal((10, 20)))
        mo = compute_moments(data)
        w = np.linalg.eigvalsh(mo.S)
        assert w.min() >= -1e-10 * np.trace(mo.S)

    def test_centering_invariance(self, rng):
        data = DataSet(
            y=rng.standard_normal(40),
            X=rng.standard_normal((40, 5)) + 50.0,
        )
        a = compute_moments(data)
        b = compute_moments(center(data))
        scale = max(np.abs(a.S).max(), np.abs(a.Q).max())
        assert np.abs(a.S - b.S).max() < 1e-12 * scale
        assert np.abs(a.Q - b.Q).max() < 1e-12 * scale

    def test_q_invariant_to_y_shift(self, rng):
        X = rng.standard_normal((40, 5))
        y = rng.standard_normal(40)
        a = compute_moments(DataSet(y=y, X=X))
        b = compute_moments(DataSet(y=y + 123.0, X=X))
        assert np.abs(a.Q - b.Q).max() < 1e-12 * max(1.0, np.abs(a.Q).max())

    def test_monte_carlo_s_converges_to_identity(self):
        rng = np.random.default_rng(77)
        X = rng.standard_normal((10**6, 5))
        mo = compute_moments(DataSet(y=np.zeros(10**6), X=X))
        assert np.abs(mo.S - np.eye(5)).max() < 0.02
