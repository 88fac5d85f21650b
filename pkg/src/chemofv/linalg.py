"""CSR sparse matrices, M-matrix structure checks, deterministic solves.

The solve contract is a relative residual tolerance (default 1e-12), not a
method: small systems go through a direct sparse LU (with a content-digest
cache so a matrix that does not change between steps is factorized once),
strongly diagonally dominant systems through Jacobi-preconditioned
BiCGSTAB, and systems above the direct-size threshold through ILU-BiCGSTAB.
Every result is residual-checked; iterative failures fall back to the
direct path, and an unmet tolerance raises instead of returning silently.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    """Linear solve failed to reach the requested residual tolerance."""


@dataclass
class SolveReport:
    iterations: int
    residual: float
    method: str


@dataclass
class StructureReport:
    """Sign pattern and diagonal-dominance slacks of a square matrix.

    Slack vectors hold |diag| - sum|offdiag| per row / per column; strict
    dominance means every slack is positive.
    """

    diag_positive: bool
    offdiag_nonpositive: bool
    row_slack: np.ndarray
    col_slack: np.ndarray

    @property
    def row_dominant(self) -> bool:
        return bool(np.all(self.row_slack > 0))

    @property
    def col_dominant(self) -> bool:
        return bool(np.all(self.col_slack > 0))

    @property
    def is_m_matrix_candidate(self) -> bool:
        return self.diag_positive and self.offdiag_nonpositive and (
            self.row_dominant or self.col_dominant
        )


class SparseMatrix:
    """Square CSR matrix with exactly one diagonal entry per row.

    Column indices are sorted within each row and explicit off-diagonal
    zeros are pruned at construction. Instances are immutable.
    """

    def __init__(self, n: int, indptr, indices, data):
        self.n = int(n)
        indptr = np.asarray(indptr, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        data = np.array(data, dtype=float)  # own copy; assemblies reuse buffers
        if indptr.shape != (self.n + 1,) or indptr[0] != 0:
            raise ValueError("malformed indptr")
        if indices.shape != data.shape or indices.size != indptr[-1]:
            raise ValueError("indices/data sizes do not match indptr")
        rows = np.repeat(np.arange(self.n), np.diff(indptr))
        offdiag = indices != rows
        keep = ~(offdiag & (data == 0.0))
        if not np.all(keep):
            indices = indices[keep]
            data = data[keep]
            counts = np.bincount(rows[keep], minlength=self.n)
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            np.cumsum(counts, out=indptr[1:])
            rows = rows[keep]
            offdiag = indices != rows
        # sorted columns within each row, no duplicates
        order_ok = np.ones(indices.size, dtype=bool)
        if indices.size > 1:
            same_row = rows[1:] == rows[:-1]
            order_ok[1:] = ~same_row | (indices[1:] > indices[:-1])
        if not np.all(order_ok):
            raise ValueError("column indices must be strictly increasing per row")
        diag_count = np.bincount(rows[~offdiag], minlength=self.n)
        if not np.all(diag_count == 1):
            raise ValueError("every row must store exactly one diagonal entry")
        self.indptr = indptr
        self.indices = indices
        self.data = data
        self._diag_slots = np.flatnonzero(~offdiag)
        self._structure: StructureReport | None = None

    @property
    def nnz(self) -> int:
        return int(self.data.size)

    @classmethod
    def from_coo(cls, n, rows, cols, vals) -> "SparseMatrix":
        """Build from triplets; duplicates are summed, missing diagonals
        are stored as explicit zeros."""
        rows = np.concatenate([np.asarray(rows, dtype=np.int64), np.arange(n)])
        cols = np.concatenate([np.asarray(cols, dtype=np.int64), np.arange(n)])
        vals = np.concatenate([np.asarray(vals, dtype=float), np.zeros(n)])
        m = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return cls(n, m.indptr, m.indices, m.data)

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        a = np.asarray(a, dtype=float)
        n = a.shape[0]
        rows, cols = np.nonzero(a)
        return cls.from_coo(n, rows, cols, a[rows, cols])

    @classmethod
    def identity(cls, n) -> "SparseMatrix":
        r = np.arange(n)
        return cls.from_coo(n, r, r, np.ones(n))

    def diagonal(self) -> np.ndarray:
        return self.data[self._diag_slots]

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        out[rows, self.indices] = self.data
        return out

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.data, self.indices, self.indptr), shape=(self.n, self.n)
        )

    def content_digest(self) -> bytes:
        h = hashlib.sha1()
        h.update(np.int64(self.n).tobytes())
        h.update(self.indptr.tobytes())
        h.update(self.indices.tobytes())
        h.update(self.data.tobytes())
        return h.digest()

    def dump_coo(self, path) -> None:
        """Write coordinate text format: one 'row col value' line per entry."""
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        with open(path, "w") as fh:
            for r, c, v in zip(rows, self.indices, self.data):
                fh.write(f"{r} {c} {float(v)!r}\n")


def spmv(m: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product with fixed within-row accumulation order."""
    x = np.asarray(x, dtype=float)
    if x.shape != (m.n,):
        raise ValueError(f"dimension mismatch: matrix is {m.n}, vector is {x.shape}")
    if m.n == 0:
        return np.zeros(0)
    prods = m.data * x[m.indices]
    return np.add.reduceat(prods, m.indptr[:-1])  # rows are never empty


def check_m_matrix_pattern(m: SparseMatrix) -> StructureReport:
    """Sign pattern plus row/column dominance slacks (cached on the matrix)."""
    if m._structure is not None:
        return m._structure
    diag = m.diagonal()
    absdata = np.abs(m.data)
    rows = np.repeat(np.arange(m.n), np.diff(m.indptr))
    row_abs = np.bincount(rows, weights=absdata, minlength=m.n)
    col_abs = np.bincount(m.indices, weights=absdata, minlength=m.n)
    absdiag = np.abs(diag)
    offdiag_mask = np.ones(m.nnz, dtype=bool)
    offdiag_mask[m._diag_slots] = False
    report = StructureReport(
        diag_positive=bool(np.all(diag > 0)),
        offdiag_nonpositive=bool(np.all(m.data[offdiag_mask] <= 0)),
        row_slack=2.0 * absdiag - row_abs,
        col_slack=2.0 * absdiag - col_abs,
    )
    m._structure = report
    return report


class LinearSolver:
    """Deterministic solver front end with a factorization cache.

    ``direct_threshold`` is the largest dimension still eligible for the
    direct path; ``dominance_ratio`` is the minimum row slack/diagonal
    ratio at which Jacobi-BiCGSTAB is attempted first.
    """

    def __init__(self, tol: float = 1e-12, direct_threshold: int = 200_000,
                 dominance_ratio: float = 0.5, cache_size: int = 4):
        if tol <= 0:
            raise ValueError("tol must be positive")
        self.tol = tol
        self.direct_threshold = direct_threshold
        self.dominance_ratio = dominance_ratio
        self._lu_cache: OrderedDict[bytes, object] = OrderedDict()
        self._cache_size = cache_size

    def solve(self, m: SparseMatrix, rhs: np.ndarray) -> tuple[np.ndarray, SolveReport]:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (m.n,):
            raise ValueError(f"rhs has shape {rhs.shape}, matrix is {m.n}x{m.n}")
        rhs_norm = float(np.linalg.norm(rhs))
        if rhs_norm == 0.0:
            return np.zeros(m.n), SolveReport(0, 0.0, "trivial")

        if m.n > self.direct_threshold:
            x, iters, method = self._ilu_bicgstab(m, rhs)
        else:
            struct = check_m_matrix_pattern(m)
            diag = m.diagonal()
            if np.all(diag != 0) and np.min(
                struct.row_slack / np.abs(diag)
            ) >= self.dominance_ratio:
                x, iters, method = self._jacobi_bicgstab(m, rhs)
            else:
                x, iters, method = None, 0, "direct-lu"
            if x is None:
                x = self._direct(m, rhs)
                iters, method = 0, "direct-lu"

        residual = float(np.linalg.norm(spmv(m, x) - rhs)) / rhs_norm
        if residual > self.tol and method != "direct-lu":
            x = self._direct(m, rhs)
            iters, method = 0, "direct-lu(fallback)"
            residual = float(np.linalg.norm(spmv(m, x) - rhs)) / rhs_norm
        if residual > self.tol or not np.all(np.isfinite(x)):
            raise SolverError(
                f"residual {residual:.3e} above tolerance {self.tol:.3e} "
                f"(method {method}, n={m.n})"
            )
        return x, SolveReport(iters, residual, method)

    def _direct(self, m: SparseMatrix, rhs: np.ndarray) -> np.ndarray:
        key = m.content_digest()
        lu = self._lu_cache.get(key)
        if lu is None:
            try:
                lu = spla.splu(m.to_scipy().tocsc())
            except RuntimeError as exc:  # singular factor
                raise SolverError(f"direct factorization failed: {exc}") from exc
            self._lu_cache[key] = lu
            if len(self._lu_cache) > self._cache_size:
                self._lu_cache.popitem(last=False)
        else:
            self._lu_cache.move_to_end(key)
        return lu.solve(rhs)

    def _jacobi_bicgstab(self, m, rhs):
        a = m.to_scipy()
        precond = sp.diags(1.0 / m.diagonal())
        count = [0]

        def tick(_):
            count[0] += 1

        x, info = spla.bicgstab(
            a, rhs, rtol=max(self.tol * 0.1, 1e-14), atol=0.0,
            maxiter=min(m.n, 300), M=precond, callback=tick,
        )
        if info != 0:
            return None, 0, "jacobi-bicgstab"
        return x, count[0], "jacobi-bicgstab"

    def _ilu_bicgstab(self, m, rhs):
        a = m.to_scipy().tocsc()
        try:
            ilu = spla.spilu(a, drop_tol=1e-5, fill_factor=10)
        except RuntimeError as exc:
            raise SolverError(f"ILU factorization failed: {exc}") from exc
        precond = spla.LinearOperator((m.n, m.n), ilu.solve)
        count = [0]

        def tick(_):
            count[0] += 1

        x, info = spla.bicgstab(
            a, rhs, rtol=max(self.tol * 0.1, 1e-14), atol=0.0,
            maxiter=1000, M=precond, callback=tick,
        )
        if info != 0:
            raise SolverError(f"ILU-BiCGSTAB did not converge (info={info})")
        return x, count[0], "ilu-bicgstab"


def solve(m: SparseMatrix, rhs, tol: float = 1e-12) -> tuple[np.ndarray, SolveReport]:
    """One-shot solve with a fresh LinearSolver at the given tolerance."""
    return LinearSolver(tol=tol).solve(m, np.asarray(rhs, dtype=float))
