import numpy as np
import pytest

from chemofv import (
    LinearSolver,
    SolverError,
    SparseMatrix,
    check_m_matrix_pattern,
    solve,
    spmv,
)
from oracles import dense_gauss_solve, dense_spmv, random_dominant_m_matrix


class TestSparseMatrix:
    def test_identity_round_trip(self):
        m = SparseMatrix.identity(4)
        np.testing.assert_array_equal(m.to_dense(), np.eye(4))
        np.testing.assert_array_equal(m.diagonal(), np.ones(4))

    def test_zero_offdiagonals_pruned(self):
        dense = np.array([[2.0, 0.0], [-1.0, 3.0]])
        m = SparseMatrix(
            2, [0, 2, 4], [0, 1, 0, 1], [2.0, 0.0, -1.0, 3.0]
        )
        assert m.nnz == 3  # the explicit (0,1) zero is gone
        np.testing.assert_array_equal(m.to_dense(), dense)

    def test_zero_diagonal_kept(self):
        m = SparseMatrix(2, [0, 1, 2], [0, 1], [0.0, 1.0])
        assert m.nnz == 2
        np.testing.assert_array_equal(m.diagonal(), [0.0, 1.0])

    def test_missing_diagonal_rejected(self):
        with pytest.raises(ValueError):
            SparseMatrix(2, [0, 1, 2], [1, 0], [1.0, 1.0])

    def test_unsorted_columns_rejected(self):
        with pytest.raises(ValueError):
            SparseMatrix(2, [0, 2, 3], [1, 0, 1], [5.0, 2.0, 3.0])

    def test_from_coo_sums_duplicates_and_adds_diagonal(self):
        m = SparseMatrix.from_coo(2, [0, 0, 0], [1, 1, 0], [1.0, 2.0, 4.0])
        np.testing.assert_array_equal(m.to_dense(), [[4.0, 3.0], [0.0, 0.0]])
        assert m.diagonal()[1] == 0.0

    def test_dump_coo_format(self, tmp_path):
        m = SparseMatrix.from_dense([[2.0, -1.0], [0.0, 1.5]])
        path = tmp_path / "matrix.txt"
        m.dump_coo(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].split() == ["0", "0", "2.0"]
        assert len(lines) == m.nnz


class TestSpmv:
    def test_identity(self):
        x = np.array([3.0, -1.0, 2.0])
        np.testing.assert_array_equal(spmv(SparseMatrix.identity(3), x), x)

    def test_diagonal_scaling(self):
        m = SparseMatrix.from_dense(np.diag([2.0, 3.0, -1.0]))
        np.testing.assert_array_equal(
            spmv(m, np.array([1.0, 1.0, 2.0])), [2.0, 3.0, -2.0]
        )

    def test_against_dense_oracle_within_ulps(self):
        rng = np.random.default_rng(11)
        dense = random_dominant_m_matrix(rng, 10)
        m = SparseMatrix.from_dense(dense)
        x = rng.standard_normal(10)
        got = spmv(m, x)
        want = dense_spmv(dense, x)
        # same accumulation order per row -> at most a couple of ulps apart
        assert np.all(np.abs(got - want) <= 2 * np.spacing(np.abs(want)))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            spmv(SparseMatrix.identity(3), np.ones(4))


class TestStructureChecks:
    def test_identity_flags(self):
        report = check_m_matrix_pattern(SparseMatrix.identity(3))
        assert report.diag_positive
        assert report.offdiag_nonpositive
        np.testing.assert_array_equal(report.row_slack, np.ones(3))
        np.testing.assert_array_equal(report.col_slack, np.ones(3))
        assert report.row_dominant and report.col_dominant

    def test_sign_pattern_violations_detected(self):
        report = check_m_matrix_pattern(
            SparseMatrix.from_dense([[1.0, 0.5], [-0.2, 1.0]])
        )
        assert not report.offdiag_nonpositive
        report = check_m_matrix_pattern(
            SparseMatrix.from_dense([[-1.0, 0.0], [0.0, 1.0]])
        )
        assert not report.diag_positive

    def test_slack_values(self):
        m = SparseMatrix.from_dense([[3.0, -1.0], [-2.0, 4.0]])
        report = check_m_matrix_pattern(m)
        np.testing.assert_allclose(report.row_slack, [2.0, 2.0])
        np.testing.assert_allclose(report.col_slack, [1.0, 3.0])


class TestSolve:
    def test_identity(self):
        b = np.array([1.0, -2.0, 0.5])
        x, report = solve(SparseMatrix.identity(3), b)
        np.testing.assert_allclose(x, b, rtol=1e-14)
        assert report.residual <= 1e-12

    def test_one_by_one_chem_balance(self):
        # [m(K)] c = m(K) g(u)
        m_k, u = 2.5, 4.0
        g = u / (u + 1.0)
        mat = SparseMatrix.from_dense([[m_k]])
        x, _ = solve(mat, np.array([m_k * g]))
        assert x[0] == pytest.approx(g, rel=1e-14)

    def test_random_dominant_50x50_vs_dense_oracle(self):
        rng = np.random.default_rng(5)
        dense = random_dominant_m_matrix(rng, 50)
        b = rng.random(50)
        x, _ = solve(SparseMatrix.from_dense(dense), b)
        want = dense_gauss_solve(dense, b)
        assert np.max(np.abs(x - want)) <= 1e-10

    def test_zero_rhs_gives_zero(self):
        m = SparseMatrix.from_dense([[2.0, -1.0], [-1.0, 2.0]])
        x, report = solve(m, np.zeros(2))
        np.testing.assert_array_equal(x, np.zeros(2))
        assert report.method == "trivial"

    def test_deterministic_bitwise(self):
        rng = np.random.default_rng(3)
        dense = random_dominant_m_matrix(rng, 30)
        m = SparseMatrix.from_dense(dense)
        b = rng.random(30)
        solver = LinearSolver()
        x1, _ = solver.solve(m, b)
        x2, _ = solver.solve(m, b)
        x3, _ = LinearSolver().solve(m, b)
        assert np.array_equal(x1, x2)
        assert np.array_equal(x1, x3)

    def test_fuzz_dominant_systems_always_succeed(self):
        rng = np.random.default_rng(17)
        solver = LinearSolver()
        for trial in range(1000):
            n = int(rng.integers(2, 24))
            dense = random_dominant_m_matrix(rng, n, slack_scale=rng.random() * 10 + 0.01)
            b = rng.standard_normal(n)
            x, report = solver.solve(SparseMatrix.from_dense(dense), b)
            assert report.residual <= 1e-12, f"trial {trial}"

    def test_m_matrix_nonnegative_rhs_gives_nonnegative_solution(self):
        # operational form of "the inverse of an M-matrix is positive"
        rng = np.random.default_rng(23)
        solver = LinearSolver()
        for _ in range(300):
            n = int(rng.integers(2, 30))
            dense = random_dominant_m_matrix(rng, n)
            b = rng.random(n)
            x, _ = solver.solve(SparseMatrix.from_dense(dense), b)
            assert x.min() >= -1e-12 * np.abs(x).max()

    def test_singular_matrix_raises(self):
        m = SparseMatrix.from_dense([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(SolverError):
            solve(m, np.array([1.0, 2.0]))

    def test_rhs_shape_mismatch(self):
        with pytest.raises(ValueError):
            solve(SparseMatrix.identity(3), np.ones(2))

    def test_krylov_path_above_threshold(self):
        rng = np.random.default_rng(29)
        dense = random_dominant_m_matrix(rng, 40, density=0.1)
        b = rng.random(40)
        solver = LinearSolver(direct_threshold=10)  # force the ILU path
        x, report = solver.solve(SparseMatrix.from_dense(dense), b)
        assert report.method == "ilu-bicgstab"
        assert np.max(np.abs(x - dense_gauss_solve(dense, b))) <= 1e-9

    def test_factorization_cache_reuses_lu(self):
        rng = np.random.default_rng(31)
        dense = random_dominant_m_matrix(rng, 20, slack_scale=0.01)
        m = SparseMatrix.from_dense(dense)
        solver = LinearSolver(dominance_ratio=2.0)  # force the direct path
        _, r1 = solver.solve(m, rng.random(20))
        _, r2 = solver.solve(m, rng.random(20))
        assert r1.method.startswith("direct") and r2.method.startswith("direct")
        assert len(solver._lu_cache) == 1
