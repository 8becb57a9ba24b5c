"""Matrix-free MINRES for symmetric (positive definite) systems ``S z = rhs``.

Standard Paige-Saunders recurrence: Lanczos tridiagonalisation with the
two-term recurrence, Givens QR of the tridiagonal, short solution update.  No
restarting or reorthogonalisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import MinresBreakdown


@dataclass(frozen=True)
class LinearOperator:
    """Symmetric operator of size ``dim`` given by its action ``apply(y) -> S y``."""

    dim: int
    apply: Callable[[np.ndarray], np.ndarray]

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return self.apply(y)

    @classmethod
    def from_matrix(cls, S) -> LinearOperator:
        return cls(S.shape[0], lambda y: S @ y)


@dataclass
class MinresResult:
    solution: np.ndarray
    relres: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list)


def _as_operator(op) -> LinearOperator:
    if isinstance(op, LinearOperator):
        return op
    if callable(op):
        raise TypeError("wrap bare callables in LinearOperator(dim, apply)")
    return LinearOperator.from_matrix(op)


def minres(
    op, rhs, rel_tol: float = 1e-12, max_iters: int | None = None, precond=None, callback=None
) -> MinresResult:
    """Solve ``op(z) = rhs`` starting from ``z = 0``.

    Parameters
    ----------
    op : LinearOperator or array-like
        Symmetric operator.
    rhs : ndarray
        Right-hand side.
    rel_tol : float
        Stop once ``||rhs - op(z)|| <= rel_tol * ||rhs||`` (norms in the
        preconditioner's inner product when ``precond`` is given).
    max_iters : int, optional
        Iteration cap, default ``op.dim``.
    precond : callable, optional
        SPD approximation of ``inv(S)``.
    callback : callable, optional
        Called as ``callback(itn, z)`` after every iteration.

    Returns
    -------
    MinresResult
        On hitting the cap the last iterate (MINRES residuals are monotone, so
        it is the best) comes back with ``converged=False``.  ``history`` holds
        the recurrence estimate of the relative residual after each iteration.
    """
    op = _as_operator(op)
    b = np.asarray(rhs, dtype=float)
    if b.shape != (op.dim,):
        raise ValueError(f"rhs has shape {b.shape}, operator dimension is {op.dim}")
    if not np.all(np.isfinite(b)):
        raise MinresBreakdown("non-finite right-hand side")
    if max_iters is None:
        max_iters = op.dim
    M = precond if precond is not None else (lambda r: r)

    x = np.zeros_like(b)
    r1 = b.copy()
    y = M(r1)
    beta1_sq = float(r1 @ y)
    if beta1_sq < 0:
        raise MinresBreakdown("preconditioner is not positive definite")
    beta1 = np.sqrt(beta1_sq)
    if beta1 == 0.0:
        return MinresResult(x, 0.0, 0, True, [])

    def true_relres():
        r = b - op(x)
        return np.sqrt(max(float(r @ M(r)), 0.0)) / beta1

    oldb, beta = 0.0, beta1
    dbar = epsln = 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros_like(b)
    w2 = np.zeros_like(b)
    r2 = r1
    history: list[float] = []
    eps = np.finfo(float).eps

    for itn in range(1, max_iters + 1):
        v = y / beta
        y = op(v)
        if itn >= 2:
            y = y - (beta / oldb) * r1
        alfa = float(v @ y)
        y = y - (alfa / beta) * r2
        r1, r2 = r2, y
        y = M(r2)
        oldb = beta
        beta_sq = float(r2 @ y)
        if beta_sq < 0:
            raise MinresBreakdown("preconditioner is not positive definite")
        beta = np.sqrt(beta_sq)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), eps)
        cs, sn = gbar / gamma, beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w
        if not (np.isfinite(phibar) and np.isfinite(alfa) and np.all(np.isfinite(w))):
            raise MinresBreakdown(f"non-finite values at iteration {itn}")

        est = phibar / beta1
        history.append(est)
        if callback is not None:
            callback(itn, x)
        if est <= rel_tol or beta == 0.0:
            achieved = true_relres()
            if achieved <= rel_tol:
                return MinresResult(x, achieved, itn, True, history)
            if beta == 0.0 or est <= 1e-3 * rel_tol:
                # Krylov space exhausted or rounding floor: cannot improve further
                return MinresResult(x, achieved, itn, False, history)
    return MinresResult(x, true_relres(), max_iters, False, history)
