"""Common interface of the equality-constrained entropy programs.

Every problem minimises a smooth strictly convex ``f`` over ``x > 0`` subject to
``A x = b``.  The Newton solver only touches a problem through

* ``matvec`` / ``rmatvec``      products with ``A`` and ``A.T``
* ``objective`` / ``gradient``  values of ``f`` and its gradient
* ``hess_inv_apply``            ``v -> inv(hess f(x)) @ v`` (block diagonal)
* ``b``, ``p``, ``q``
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .errors import DomainError
from .sparse_core import BoardLayout, BoardOperator, SparseMatrix


def check_nonneg(x: np.ndarray) -> None:
    if not np.all(x >= 0):
        raise DomainError("objective requires x >= 0")


def check_positive(x: np.ndarray) -> None:
    if not np.all(x > 0):
        raise DomainError("x must be strictly positive")


class Problem:
    """Base class; subclasses provide the objective oracles and an initial point."""

    kind = "generic"

    def __init__(self, n: int, layout: BoardLayout, op: BoardOperator, b: np.ndarray):
        self.n = n
        self.layout = layout
        self.op = op
        self.b = np.asarray(b, dtype=float)
        self.b.setflags(write=False)
        if self.b.shape != (op.n_rows,):
            raise ValueError("b does not match the number of constraint rows")

    @property
    def p(self) -> int:
        return self.layout.p

    @property
    def q(self) -> int:
        return self.op.n_rows

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.op.matvec(x)

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        return self.op.rmatvec(y)

    @cached_property
    def A(self) -> SparseMatrix:
        """Explicit CSR copy of the constraint matrix (quadratic memory in ``n``)."""
        return self.op.to_sparse()

    def primal_residual(self, x: np.ndarray) -> np.ndarray:
        return self.matvec(x) - self.b

    def objective(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess_apply(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess_inv_apply(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess_inv_diag(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess_inv_operator(self, x: np.ndarray):
        """``v -> hess_inv_apply(x, v)`` with per-point work done once."""
        return lambda v: self.hess_inv_apply(x, v)

    def initial_point(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, p={self.p}, q={self.q})"


class SeparableEntropyProblem(Problem):
    """``f(x) = c + w_tri * sum g(triangles) + w_slack * sum g(slacks)``.

    The Hessian is diagonal with entries ``w / x``.
    """

    def __init__(self, n, layout, op, b, *, constant: float, w_tri: float, w_slack: float):
        super().__init__(n, layout, op, b)
        self.constant = float(constant)
        self.w_tri = float(w_tri)
        self.w_slack = float(w_slack)

    def _split(self, x):
        nt = self.layout.n_triangles
        return x[:nt], x[nt:]

    def _weighted(self, fn, x):
        tri, slack = self._split(x)
        return self.w_tri * fn(tri), self.w_slack * fn(slack)

    def objective(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        check_nonneg(x)

        def ent(z):
            return np.sum(z * np.log(np.where(z > 0, z, 1.0)))

        t, s = self._weighted(ent, x)
        return self.constant + t + s

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        check_positive(x)
        out = np.log(x)
        out += 1.0
        nt = self.layout.n_triangles
        if self.w_tri != 1.0:
            out[:nt] *= self.w_tri
        if self.w_slack != 1.0:
            out[nt:] *= self.w_slack
        return out

    def hess_inv_diag(self, x: np.ndarray) -> np.ndarray:
        check_positive(x)
        nt = self.layout.n_triangles
        d = np.array(x, dtype=float)
        d[:nt] /= self.w_tri
        d[nt:] /= self.w_slack
        return d

    def hess_inv_operator(self, x: np.ndarray):
        d = self.hess_inv_diag(x)
        return lambda v: d * v

    def hess_inv_apply(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        check_positive(x)
        out = x * v
        nt = self.layout.n_triangles
        if self.w_tri != 1.0:
            out[:nt] /= self.w_tri
        if self.w_slack != 1.0:
            out[nt:] /= self.w_slack
        return out

    def hess_apply(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        check_positive(x)
        return v / self.hess_inv_diag(x)

    def dual(self, nu: np.ndarray) -> float:
        """Lagrange dual value ``inf_x f(x) + nu.(A x - b)``; a lower bound on the optimum for any ``nu``.

        Uses the multiplier sign of the residual ``grad f + A.T nu``; the
        minimiser of each term ``w g(x) + y x`` is ``exp(-y / w - 1)`` with value
        ``-w exp(-y / w - 1)``.
        """
        nu = np.asarray(nu, dtype=float)
        y = self.rmatvec(nu)
        tri, slack = self._split(y)
        with np.errstate(over="ignore"):
            conj = self.w_tri * np.sum(np.exp(-tri / self.w_tri - 1.0)) + self.w_slack * np.sum(
                np.exp(-slack / self.w_slack - 1.0)
            )
        if not np.isfinite(conj):
            return -np.inf
        return self.constant - float(self.b @ nu) - conj
