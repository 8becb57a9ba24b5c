"""Sparse constraint storage and the chessboard summation operators.

Both bound problems act on four ``n x n`` triangle matrices ``N, E, S, W``
(0-indexed) followed by slack variables.  Every constraint row is a sum over
diagonals, anti-diagonals, rows or columns of some triangle matrices plus at
most one slack coefficient, so ``A`` is described compactly by
:class:`BoardOperator` and only materialised as a :class:`SparseMatrix` when
needed (tests, debug dumps, small dense oracles).

Conventions: the ``k``-th diagonal holds the entries with ``i - j = k`` and
the ``k``-th anti-diagonal the entries with ``i + j = n - 1 - k``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.io
import scipy.sparse as sp

GROUPS = ("N", "E", "S", "W")

_executor: ThreadPoolExecutor | None = None


def set_num_threads(k: int) -> None:
    """Fan board products out over ``k`` worker threads (1 = serial).

    Results are assembled in a fixed order, so output is identical for any ``k``.
    """
    global _executor
    if k < 1:
        raise ValueError(f"thread count must be >= 1, got {k}")
    if _executor is not None:
        _executor.shutdown()
    _executor = ThreadPoolExecutor(max_workers=k) if k > 1 else None


def _map(fn, items):
    if _executor is None:
        return [fn(item) for item in items]
    return list(_executor.map(fn, items))


def _check_square(Z, k):
    Z = np.asarray(Z)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {Z.shape}")
    n = Z.shape[0]
    if not -n <= k <= n:
        raise ValueError(f"diagonal index {k} outside [-{n}, {n}]")
    return Z, n


def diag_sum(Z, k: int) -> float:
    """Sum of the entries of ``Z`` with ``i - j = k``; zero for ``k = +-n``."""
    Z, n = _check_square(Z, k)
    if abs(k) == n:
        return 0.0
    return float(np.trace(Z, offset=-k))


def antidiag_sum(Z, k: int) -> float:
    """Sum of the entries of ``Z`` with ``i + j = n - 1 - k``; zero for ``k = +-n``."""
    Z, n = _check_square(Z, k)
    if abs(k) == n:
        return 0.0
    return float(np.trace(Z[:, ::-1], offset=k))


def diag_sums(Z) -> np.ndarray:
    """All diagonal sums; entry ``k + n`` holds ``diag_sum(Z, k)`` for ``k = -n..n``."""
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    out = np.zeros(2 * n + 1)
    out[1:-1] = _family_sums(Z, "diag")
    return out


def antidiag_sums(Z) -> np.ndarray:
    """All anti-diagonal sums; entry ``k + n`` holds ``antidiag_sum(Z, k)``."""
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    out = np.zeros(2 * n + 1)
    out[1:-1] = _family_sums(Z, "anti")
    return out


# Family coordinates: "diag" -> (i - j) + n - 1, "anti" -> 2n - 2 - (i + j),
# i.e. (k + n - 1) for the k-th (anti-)diagonal; "row" -> i; "col" -> j.

_INDEX_CACHE: dict[tuple[int, str], np.ndarray] = {}


def _family_index(n: int, kind: str) -> np.ndarray:
    key = (n, kind)
    if key not in _INDEX_CACHE:
        i = np.arange(n)[:, None]
        j = np.arange(n)[None, :]
        if kind == "diag":
            idx = i - j + (n - 1)
        else:
            idx = (2 * n - 2) - (i + j)
        _INDEX_CACHE[key] = np.ascontiguousarray(idx, dtype=np.intp).ravel()
    return _INDEX_CACHE[key]


def _family_sums(Z: np.ndarray, kind: str) -> np.ndarray:
    n = Z.shape[0]
    if kind == "row":
        return Z.sum(axis=1)
    if kind == "col":
        return Z.sum(axis=0)
    return np.bincount(_family_index(n, kind), weights=Z.ravel(), minlength=2 * n - 1)


def _family_spread(v: np.ndarray, kind: str, n: int) -> np.ndarray:
    """Broadcastable view ``M`` with ``M[i, j] = v[coordinate(i, j)]`` (adjoint of the sums)."""
    if kind == "row":
        return v[:, None]
    if kind == "col":
        return v[None, :]
    windows = np.lib.stride_tricks.sliding_window_view(v[::-1], n)
    return windows[::-1] if kind == "diag" else windows


def family_size(n: int, kind: str) -> int:
    return n if kind in ("row", "col") else 2 * n - 1


@dataclass(frozen=True)
class SparseMatrix:
    """Row-compressed matrix with exactly-representable integer-valued entries."""

    n_rows: int
    n_cols: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        if self.indptr.shape != (self.n_rows + 1,):
            raise ValueError("indptr length must be n_rows + 1")
        if np.any(self.data == 0):
            raise ValueError("explicit zeros are not allowed")
        if not np.all(self.data == np.round(self.data)):
            raise ValueError("constraint coefficients must be integers")

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> SparseMatrix:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        keys = rows * shape[1] + cols
        if np.unique(keys).size != keys.size:
            raise ValueError("duplicate (row, col) entries")
        m = sp.csr_matrix((vals, (rows, cols)), shape=shape)
        m.sort_indices()
        return cls(shape[0], shape[1], m.indptr.copy(), m.indices.copy(), m.data.copy())

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.data.size)

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=self.shape)

    @cached_property
    def _csr_t(self) -> sp.csr_matrix:
        return self._csr.T.tocsr()

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def to_scipy(self) -> sp.csr_matrix:
        return self._csr.copy()

    def row_counts(self) -> np.ndarray:
        return np.diff(self.indptr)

    def col_counts(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.n_cols)


def spmv(A: SparseMatrix, x) -> np.ndarray:
    """``A @ x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (A.n_cols,):
        raise ValueError(f"expected vector of length {A.n_cols}, got shape {x.shape}")
    return A._csr @ x


def spmv_t(A: SparseMatrix, y) -> np.ndarray:
    """``A.T @ y``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (A.n_rows,):
        raise ValueError(f"expected vector of length {A.n_rows}, got shape {y.shape}")
    return A._csr_t @ y


def write_matrix_market(A: SparseMatrix, b, prefix: str) -> tuple[str, str]:
    """Dump ``A`` (integer coordinate format) and ``b`` to ``prefix_A.mtx`` / ``prefix_b.mtx``."""
    a_path, b_path = f"{prefix}_A.mtx", f"{prefix}_b.mtx"
    scipy.io.mmwrite(a_path, A.to_scipy().astype(np.int64), field="integer")
    scipy.io.mmwrite(b_path, np.asarray(b, dtype=float)[:, None], precision=17)
    return a_path, b_path


@dataclass(frozen=True)
class BoardLayout:
    """Flat index map: ``N, E, S, W`` row-major, then named slacks ``(family, k)``."""

    n: int
    slacks: tuple[tuple[str, int], ...]

    @property
    def n_triangles(self) -> int:
        return 4 * self.n * self.n

    @property
    def p(self) -> int:
        return self.n_triangles + len(self.slacks)

    @cached_property
    def _slack_pos(self) -> dict[tuple[str, int], int]:
        return {key: self.n_triangles + m for m, key in enumerate(self.slacks)}

    def index(self, group: str, i: int, j: int | None = None) -> int:
        """Flat index of triangle ``group[i, j]`` or of slack ``(group, i)``."""
        if j is None:
            try:
                return self._slack_pos[(group, i)]
            except KeyError:
                raise KeyError(f"no slack variable {group}_{i}") from None
        g = GROUPS.index(group)
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(f"({i}, {j}) outside the {self.n}x{self.n} board")
        return g * self.n * self.n + i * self.n + j

    def locate(self, flat: int) -> tuple:
        """Inverse of :meth:`index`: ``(group, i, j)`` or ``(family, k)``."""
        if not 0 <= flat < self.p:
            raise IndexError(f"flat index {flat} outside [0, {self.p})")
        if flat < self.n_triangles:
            g, rem = divmod(flat, self.n * self.n)
            i, j = divmod(rem, self.n)
            return (GROUPS[g], i, j)
        return self.slacks[flat - self.n_triangles]

    def triangles(self, x: np.ndarray) -> np.ndarray:
        """View of the triangle block of ``x`` shaped ``(4, n, n)``."""
        return x[: self.n_triangles].reshape(4, self.n, self.n)

    def slack_block(self, x: np.ndarray) -> np.ndarray:
        return x[self.n_triangles :]


@dataclass(frozen=True)
class BoardTerm:
    """Rows fed by one summation family of the listed triangle groups (coefficient 1).

    ``rows[c]`` is the constraint row receiving family coordinate ``c``, or ``-1``.
    """

    groups: tuple[int, ...]
    kind: str
    rows: np.ndarray


@dataclass(frozen=True)
class BoardOperator:
    """Matrix-free ``A`` built from board terms plus single slack coefficients.

    Never stores the ``O(n^2)`` nonzeros; products cost a few passes over the
    triangle block.
    """

    layout: BoardLayout
    n_rows: int
    terms: tuple[BoardTerm, ...]
    slack_cols: np.ndarray
    slack_rows: np.ndarray
    slack_coefs: np.ndarray
    _group_terms: tuple = field(init=False, repr=False)

    def __post_init__(self):
        # dump slot q absorbs coordinates that feed no row
        for t in self.terms:
            if t.rows.shape != (family_size(self.layout.n, t.kind),):
                raise ValueError(f"term rows have wrong length for kind {t.kind!r}")
        per_group = tuple(
            tuple((t.kind, self._padded(t.rows)) for t in self.terms if g in t.groups) for g in range(4)
        )
        object.__setattr__(self, "_group_terms", per_group)

    def _padded(self, rows: np.ndarray) -> np.ndarray:
        return np.where(rows < 0, self.n_rows, rows).astype(np.intp)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.layout.p)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.layout.p,):
            raise ValueError(f"expected vector of length {self.layout.p}, got shape {x.shape}")
        tri = self.layout.triangles(x)
        q = self.n_rows

        def reduce(term):
            Z = tri[term.groups[0]]
            for g in term.groups[1:]:
                Z = Z + tri[g]
            return _family_sums(Z, term.kind)

        out = np.zeros(q + 1)
        for term, sums in zip(self.terms, _map(reduce, self.terms)):
            out += np.bincount(self._padded(term.rows), weights=sums, minlength=q + 1)
        out += np.bincount(self.slack_rows, weights=self.slack_coefs * x[self.slack_cols], minlength=q + 1)
        return out[:q]

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n_rows,):
            raise ValueError(f"expected vector of length {self.n_rows}, got shape {y.shape}")
        n = self.layout.n
        ypad = np.append(y, 0.0)

        out = np.empty(self.layout.p)
        tri = self.layout.triangles(out)

        def spread(g):
            acc = tri[g]
            acc[...] = 0.0
            for kind, rows in self._group_terms[g]:
                acc += _family_spread(ypad[rows], kind, n)

        _map(spread, range(4))
        slack = np.zeros(self.layout.p - self.layout.n_triangles)
        np.add.at(slack, self.slack_cols - self.layout.n_triangles, self.slack_coefs * ypad[self.slack_rows])
        out[self.layout.n_triangles :] = slack
        return out

    def row_norms_weighted(self, w: np.ndarray) -> np.ndarray:
        """``(A * A) @ w``: per-row sums of squared coefficients times ``w``."""
        tri = self.layout.triangles(w)
        q = self.n_rows
        out = np.zeros(q + 1)
        for term in self.terms:
            Z = sum(tri[g] for g in term.groups)
            out += np.bincount(self._padded(term.rows), weights=_family_sums(Z, term.kind), minlength=q + 1)
        out += np.bincount(self.slack_rows, weights=self.slack_coefs**2 * w[self.slack_cols], minlength=q + 1)
        return out[:q]

    def to_sparse(self) -> SparseMatrix:
        """Materialise the explicit CSR matrix (``O(n^2)`` memory)."""
        n = self.layout.n
        i = np.repeat(np.arange(n), n)
        j = np.tile(np.arange(n), n)
        coord = {
            "row": i,
            "col": j,
            "diag": i - j + n - 1,
            "anti": 2 * n - 2 - (i + j),
        }
        rows, cols, vals = [], [], []
        for term in self.terms:
            r = term.rows[coord[term.kind]]
            keep = r >= 0
            for g in term.groups:
                rows.append(r[keep])
                cols.append(g * n * n + (i * n + j)[keep])
                vals.append(np.ones(int(keep.sum())))
        rows.append(self.slack_rows)
        cols.append(self.slack_cols)
        vals.append(self.slack_coefs)
        return SparseMatrix.from_coo(
            np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), self.shape
        )


def family_rows(n: int, kind: str, first_row: int, *, shift: int = 0, keep=None) -> np.ndarray:
    """Row map for a family whose label is ``coordinate_label + shift``.

    For diagonals the label of coordinate ``c`` is ``k = c - (n - 1)``; rows are
    assigned consecutively to labels ``keep`` (an iterable of labels) starting
    at ``first_row``.  For rows/columns the label is the index itself.
    """
    size = family_size(n, kind)
    offset = n - 1 if kind in ("diag", "anti") else 0
    labels = np.arange(size) - offset + shift
    keep = list(keep)
    lookup = {label: first_row + m for m, label in enumerate(keep)}
    return np.array([lookup.get(int(lab), -1) for lab in labels], dtype=np.intp)
