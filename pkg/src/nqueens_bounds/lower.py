"""Lower-bound program on an ``n x n`` board (entropy of triangle masses).

Variables: ``N, E, S, W`` (``4n^2``) then slacks ``d_k`` and ``a_k`` for
``k = -n..n-1``.  Constraint rows, in order:

* ``2n`` rows  ``D_k(S+W) + D_{k+1}(N+E) + d_k = 1/n``
* ``2n`` rows  ``A_k(S+E) + A_{k+1}(N+W) + a_k = 1/n``
* ``n-1`` rows ``sum_j (N+E+S+W)[i, j] = 1/n`` for ``i = 1..n-1`` (``i = 0`` is dependent)
* ``n`` rows   ``sum_i (N+E+S+W)[i, j] = 1/n`` for ``j = 0..n-1``

Objective ``sum g(x) + 4 log n + 2 log 2 + 3``.
"""

from __future__ import annotations

import numpy as np

from .problem import SeparableEntropyProblem, check_positive
from .sparse_core import BoardLayout, BoardOperator, BoardTerm, family_rows

N_, E_, S_, W_ = range(4)


def lower_constant(n: int) -> float:
    return 4.0 * np.log(n) + 2.0 * np.log(2.0) + 3.0


class LowerProblem(SeparableEntropyProblem):
    kind = "lower"

    def initial_point(self):
        return lower_init(self)


def build_lower(n: int) -> LowerProblem:
    if int(n) != n or n < 1:
        raise ValueError(f"board size must be a positive integer, got {n}")
    n = int(n)
    ks = range(-n, n)
    slacks = tuple(("d", k) for k in ks) + tuple(("a", k) for k in ks)
    layout = BoardLayout(n, slacks)
    all4 = (N_, E_, S_, W_)
    terms = (
        BoardTerm((S_, W_), "diag", family_rows(n, "diag", 0, keep=ks)),
        BoardTerm((N_, E_), "diag", family_rows(n, "diag", 0, shift=-1, keep=ks)),
        BoardTerm((S_, E_), "anti", family_rows(n, "anti", 2 * n, keep=ks)),
        BoardTerm((N_, W_), "anti", family_rows(n, "anti", 2 * n, shift=-1, keep=ks)),
        BoardTerm(all4, "row", family_rows(n, "row", 4 * n, keep=range(1, n))),
        BoardTerm(all4, "col", family_rows(n, "col", 5 * n - 1, keep=range(n))),
    )
    nt = layout.n_triangles
    slack_cols = nt + np.arange(4 * n)
    op = BoardOperator(
        layout,
        6 * n - 1,
        terms,
        slack_cols=slack_cols,
        slack_rows=np.arange(4 * n),
        slack_coefs=np.ones(4 * n),
    )
    b = np.full(6 * n - 1, 1.0 / n)
    return LowerProblem(n, layout, op, b, constant=lower_constant(n), w_tri=1.0, w_slack=1.0)


def lower_init(P: LowerProblem) -> tuple[np.ndarray, np.ndarray]:
    """Uniform triangles ``1/(4n^2)`` with slacks solved from their rows; ``nu = 0``.

    The point is strictly positive and satisfies ``A x = b``.
    """
    n = P.n
    x = np.zeros(P.p)
    x[: P.layout.n_triangles] = 1.0 / (4 * n * n)
    partial = P.matvec(x)
    x[P.layout.n_triangles :] = P.b[: 4 * n] - partial[: 4 * n]
    check_positive(x)
    return x, np.zeros(P.q)


def lower_objective(P: LowerProblem, x) -> float:
    return P.objective(x)


def lower_gradient(P: LowerProblem, x) -> np.ndarray:
    return P.gradient(x)


def lower_hess_inv_apply(P: LowerProblem, x, v) -> np.ndarray:
    return P.hess_inv_apply(x, v)


def lower_dual(P: LowerProblem, nu) -> float:
    """Dual bound ``-nu.b - sum exp(-(A.T nu)_i - 1) + c_n`` for solver multipliers ``nu``.

    Equals ``h(-nu)`` with ``h(mu) = mu.b - f*(A.T mu)``; valid for every ``nu``.
    """
    return P.dual(nu)
