"""Upper-bound program with pair-entropy integrals, and its Jensen approximation.

Exact problem variables: ``N, E, S, W`` then two interleaved slack blocks of
length ``4n - 2``::

    d-block: [dNE_{-n+1}, dSW_{-n+1}, dNE_{-n+2}, ..., dNE_{n-1}, dSW_{n-1}]
    a-block: [aSE_{-n+1}, aNW_{-n+1}, aSE_{-n+2}, ..., aSE_{n-1}, aNW_{n-1}]

so every objective pair, ``(dSW_{k-1}, dNE_k)`` or ``(aNW_{k-1}, aSE_k)``,
occupies adjacent positions and the Hessian is block diagonal with 1x1 blocks
(triangles, the two boundary slacks of each block) and 2x2 blocks.

Each pair couples the two half-squares that meet across one diagonal
(anti-diagonal) line of the board.  With anti-diagonal ``k`` holding
``i + j = n - 1 - k``, anti-diagonal ``k - 1`` lies on the south-east side of
``k``, so the SE half of ``k`` touches the NW half of ``k - 1``.

Constraint rows, in order (slack rows scaled by ``2n`` to keep integer entries):

* ``D_k(S+W) + 2n dSW_k = 2n``, ``D_k(N+E) + 2n dNE_k = 2n``,
  ``A_k(S+E) + 2n aSE_k = 2n``, ``A_k(N+W) + 2n aNW_k = 2n``  for ``k = -n+1..n-1``
* ``N`` row sums ``= n``; ``S`` row sums ``= n``; ``N+S`` column sums ``= 2n`` for ``j >= 1``
* ``E`` column sums ``= n``; ``W`` column sums ``= n``; ``E+W`` row sums ``= 2n`` for ``i >= 1``
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, SolverError
from .problem import Problem, SeparableEntropyProblem, check_nonneg, check_positive
from .scalar_funcs import pair_integral, pair_integral_grad, pair_integral_hess
from .sparse_core import BoardLayout, BoardOperator, BoardTerm, family_rows

N_, E_, S_, W_ = range(4)


def _board_terms(n: int, base: int) -> tuple[list[BoardTerm], np.ndarray]:
    """Row/column constraints shared by the exact and approximate problems."""
    rows = {
        "N_row": base,
        "S_row": base + n,
        "NS_col": base + 2 * n,
        "E_col": base + 3 * n - 1,
        "W_col": base + 4 * n - 1,
        "EW_row": base + 5 * n - 1,
    }
    terms = [
        BoardTerm((N_,), "row", family_rows(n, "row", rows["N_row"], keep=range(n))),
        BoardTerm((S_,), "row", family_rows(n, "row", rows["S_row"], keep=range(n))),
        BoardTerm((N_, S_), "col", family_rows(n, "col", rows["NS_col"], keep=range(1, n))),
        BoardTerm((E_,), "col", family_rows(n, "col", rows["E_col"], keep=range(n))),
        BoardTerm((W_,), "col", family_rows(n, "col", rows["W_col"], keep=range(n))),
        BoardTerm((E_, W_), "row", family_rows(n, "row", rows["EW_row"], keep=range(1, n))),
    ]
    b = np.concatenate(
        [
            np.full(n, float(n)),
            np.full(n, float(n)),
            np.full(n - 1, 2.0 * n),
            np.full(n, float(n)),
            np.full(n, float(n)),
            np.full(n - 1, 2.0 * n),
        ]
    )
    return terms, b


def _interleaved_slacks(n: int) -> tuple[tuple[str, int], ...]:
    ks = range(-n + 1, n)
    d = tuple(item for k in ks for item in (("dNE", k), ("dSW", k)))
    a = tuple(item for k in ks for item in (("aSE", k), ("aNW", k)))
    return d + a


class UpperProblem(Problem):
    """``3 + L0(N,E,S,W) + (1/n) sum F(dSW_{k-1}, dNE_k) + (1/n) sum F(aNW_{k-1}, aSE_k)``.

    Sums run over ``k = -n+1..n``; ``F`` is :func:`pair_integral` and the
    out-of-range slacks ``dSW_{-n}``, ``dNE_n``, ``aNW_{-n}``, ``aSE_n`` are the
    constant 1.
    """

    kind = "upper"

    def __init__(self, n, layout, op, b):
        super().__init__(n, layout, op, b)
        self.w_tri = 1.0 / (4.0 * n * n)
        self.w_pair = 1.0 / n
        self.block_len = 4 * n - 2

    def _blocks(self, x):
        nt = self.layout.n_triangles
        L = self.block_len
        return x[:nt], x[nt : nt + L], x[nt + L :]

    @staticmethod
    def _pairs(D):
        """(first, U, V, last): boundary singles and the interior pair arrays."""
        return D[0], D[1:-1:2], D[2::2], D[-1]

    def block_map(self) -> list[tuple[int, ...]]:
        """Hessian blocks as tuples of flat indices (sizes 1 or 2), covering every variable once."""
        nt = self.layout.n_triangles
        blocks = [(i,) for i in range(nt)]
        for start in (nt, nt + self.block_len):
            blocks.append((start,))
            blocks.extend((start + i, start + i + 1) for i in range(1, self.block_len - 1, 2))
            blocks.append((start + self.block_len - 1,))
        return blocks

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        check_nonneg(x)
        tri, D, Aa = self._blocks(x)
        total = self.w_tri * np.sum(tri * np.log(np.where(tri > 0, tri, 1.0)))
        for blk in (D, Aa):
            first, U, V, last = self._pairs(blk)
            s = pair_integral(1.0, first) + np.sum(pair_integral(U, V)) + pair_integral(last, 1.0)
            total += self.w_pair * s
        return 3.0 + float(total)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        check_positive(x)
        out = np.log(x)
        nt = self.layout.n_triangles
        out[:nt] += 1.0
        out[:nt] *= self.w_tri
        _, gD, gA = self._blocks(out)
        for blk, gblk in ((self._blocks(x)[1], gD), (self._blocks(x)[2], gA)):
            first, U, V, last = self._pairs(blk)
            gblk[0] = pair_integral_grad(1.0, first)[1]
            gu, gv = pair_integral_grad(U, V)
            gblk[1:-1:2] = gu
            gblk[2::2] = gv
            gblk[-1] = pair_integral_grad(last, 1.0)[0]
            gblk *= self.w_pair
        return out

    def _slack_hessians(self, blk):
        first, U, V, last = self._pairs(blk)
        h_first = self.w_pair * pair_integral_hess(1.0, first).vv
        h_last = self.w_pair * pair_integral_hess(last, 1.0).uu
        H = pair_integral_hess(U, V)
        return h_first, (self.w_pair * H.uu, self.w_pair * H.uv, self.w_pair * H.vv), h_last

    def hess_apply(self, x, v) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        check_positive(x)
        out = np.empty_like(x)
        tri, D, Aa = self._blocks(x)
        vt, vD, vA = self._blocks(np.asarray(v, dtype=float))
        ot, oD, oA = self._blocks(out)
        ot[:] = self.w_tri * vt / tri
        for blk, vb, ob in ((D, vD, oD), (Aa, vA, oA)):
            h_first, (huu, huv, hvv), h_last = self._slack_hessians(blk)
            ob[0] = h_first * vb[0]
            ob[-1] = h_last * vb[-1]
            vu, vv = vb[1:-1:2], vb[2::2]
            ob[1:-1:2] = huu * vu + huv * vv
            ob[2::2] = huv * vu + hvv * vv
        return out

    def hess_inv_apply(self, x, v) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        check_positive(x)
        out = np.empty_like(x)
        tri, D, Aa = self._blocks(x)
        vt, vD, vA = self._blocks(np.asarray(v, dtype=float))
        ot, oD, oA = self._blocks(out)
        np.multiply(tri, vt, out=ot)
        ot /= self.w_tri
        for blk, vb, ob in ((D, vD, oD), (Aa, vA, oA)):
            h_first, (huu, huv, hvv), h_last = self._slack_hessians(blk)
            det = huu * hvv - huv * huv
            if not np.all(det > 0):
                raise SolverError("pair Hessian block lost positive definiteness")
            ob[0] = vb[0] / h_first
            ob[-1] = vb[-1] / h_last
            vu, vv = vb[1:-1:2], vb[2::2]
            ob[1:-1:2] = (hvv * vu - huv * vv) / det
            ob[2::2] = (huu * vv - huv * vu) / det
        return out

    def hess_inv_diag(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        check_positive(x)
        out = np.empty_like(x)
        tri, D, Aa = self._blocks(x)
        ot, oD, oA = self._blocks(out)
        ot[:] = tri / self.w_tri
        for blk, ob in ((D, oD), (Aa, oA)):
            h_first, (huu, huv, hvv), h_last = self._slack_hessians(blk)
            det = huu * hvv - huv * huv
            ob[0] = 1.0 / h_first
            ob[-1] = 1.0 / h_last
            ob[1:-1:2] = hvv / det
            ob[2::2] = huu / det
        return out

    def initial_point(self):
        return upper_init(self)


class ApproxUpperProblem(SeparableEntropyProblem):
    """Jensen approximation: each pair integral replaced by ``g`` of the pair mean.

    Stored in condensed form: the averaged slacks ``d_k, a_k`` (``k = -n+1..n``)
    are expressed directly through the triangles,

        4n d_k + D_{k-1}(S+W) + D_k(N+E) = 4n,
        4n a_k + A_{k-1}(N+W) + A_k(S+E) = 4n,

    which is the averaging row plus the two scaled slack rows it references.
    The per-pair slacks of the exact problem carry no objective term here, so
    they are eliminated rather than kept as Hessian-free variables and are
    recovered in :func:`lift_approx_solution`.
    """

    kind = "approx_upper"

    def initial_point(self):
        return np.ones(self.p), np.zeros(self.q)


def build_upper(n: int) -> UpperProblem:
    if int(n) != n or n < 1:
        raise ValueError(f"board size must be a positive integer, got {n}")
    n = int(n)
    layout = BoardLayout(n, _interleaved_slacks(n))
    ks = range(-n + 1, n)
    m = 2 * n - 1
    terms = [
        BoardTerm((S_, W_), "diag", family_rows(n, "diag", 0, keep=ks)),
        BoardTerm((N_, E_), "diag", family_rows(n, "diag", m, keep=ks)),
        BoardTerm((S_, E_), "anti", family_rows(n, "anti", 2 * m, keep=ks)),
        BoardTerm((N_, W_), "anti", family_rows(n, "anti", 3 * m, keep=ks)),
    ]
    board, b_board = _board_terms(n, 4 * m)
    nt = layout.n_triangles
    pos = np.arange(m)
    # slack rows: dSW, dNE, aSE, aNW families in that order, k = -n+1..n-1
    slack_cols = np.concatenate(
        [nt + 2 * pos + 1, nt + 2 * pos, nt + 2 * m + 2 * pos, nt + 2 * m + 2 * pos + 1]
    )
    op = BoardOperator(
        layout,
        14 * n - 6,
        tuple(terms + board),
        slack_cols=slack_cols,
        slack_rows=np.arange(4 * m),
        slack_coefs=np.full(4 * m, 2.0 * n),
    )
    b = np.concatenate([np.full(4 * m, 2.0 * n), b_board])
    return UpperProblem(n, layout, op, b)


def build_approx_upper(n: int) -> ApproxUpperProblem:
    if int(n) != n or n < 1:
        raise ValueError(f"board size must be a positive integer, got {n}")
    n = int(n)
    ks = range(-n + 1, n + 1)
    slacks = tuple(("d", k) for k in ks) + tuple(("a", k) for k in ks)
    layout = BoardLayout(n, slacks)
    terms = [
        BoardTerm((S_, W_), "diag", family_rows(n, "diag", 0, shift=1, keep=ks)),
        BoardTerm((N_, E_), "diag", family_rows(n, "diag", 0, keep=ks)),
        BoardTerm((N_, W_), "anti", family_rows(n, "anti", 2 * n, shift=1, keep=ks)),
        BoardTerm((S_, E_), "anti", family_rows(n, "anti", 2 * n, keep=ks)),
    ]
    board, b_board = _board_terms(n, 4 * n)
    nt = layout.n_triangles
    op = BoardOperator(
        layout,
        10 * n - 2,
        tuple(terms + board),
        slack_cols=nt + np.arange(4 * n),
        slack_rows=np.arange(4 * n),
        slack_coefs=np.full(4 * n, 4.0 * n),
    )
    b = np.concatenate([np.full(4 * n, 4.0 * n), b_board])
    return ApproxUpperProblem(
        n, layout, op, b, constant=3.0, w_tri=1.0 / (4.0 * n * n), w_slack=1.0 / n
    )


def upper_init(P: UpperProblem) -> tuple[np.ndarray, np.ndarray]:
    """All-ones primal point (interior, violates the slack rows) and ``nu = 0``."""
    return np.ones(P.p), np.zeros(P.q)


def lift_approx_solution(
    P_exact: UpperProblem, P_approx: ApproxUpperProblem, x_approx, nu_approx
) -> tuple[np.ndarray, np.ndarray]:
    """Warm start for the exact problem from a solution of the approximate one.

    Triangles are copied and the pair slacks recomputed from their defining
    rows, so ``x0`` is feasible whenever ``x_approx`` is.  The multiplier of the
    averaging row for ``d_k`` becomes the multiplier of the ``dSW_{k-1}`` and
    ``dNE_k`` slack rows (``aNW_{k-1}`` and ``aSE_k`` for ``a_k``); row/column
    multipliers are copied.
    """
    n = P_exact.n
    if P_approx.n != n:
        raise ValueError("problems are built for different board sizes")
    x_approx = np.asarray(x_approx, dtype=float)
    nu_approx = np.asarray(nu_approx, dtype=float)
    nt = P_exact.layout.n_triangles
    check_positive(x_approx[:nt])

    x0 = np.zeros(P_exact.p)
    x0[:nt] = x_approx[:nt]
    m = 2 * n - 1
    partial = P_exact.matvec(x0)
    x0[P_exact.op.slack_cols] = (P_exact.b[: 4 * m] - partial[: 4 * m]) / (2.0 * n)
    if not np.all(x0 > 0):
        raise DomainError("lifted slack variables are not strictly positive")

    nu0 = np.empty(P_exact.q)
    mu_d, mu_a = nu_approx[: 2 * n], nu_approx[2 * n : 4 * n]
    nu0[:m] = mu_d[1:]  # dSW_k pairs with d_{k+1}
    nu0[m : 2 * m] = mu_d[:-1]  # dNE_k pairs with d_k
    nu0[2 * m : 3 * m] = mu_a[:-1]  # aSE_k pairs with a_k
    nu0[3 * m : 4 * m] = mu_a[1:]  # aNW_k pairs with a_{k+1}
    nu0[4 * m :] = nu_approx[4 * n :]
    return x0, nu0


def upper_objective(P: UpperProblem, x) -> float:
    return P.objective(x)


def upper_gradient(P: UpperProblem, x) -> np.ndarray:
    return P.gradient(x)


def upper_hess_inv_apply(P: UpperProblem, x, v) -> np.ndarray:
    return P.hess_inv_apply(x, v)
