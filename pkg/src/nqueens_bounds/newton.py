"""Infeasible-start Newton method for ``minimize f(x) s.t. A x = b`` over ``x > 0``.

Each step eliminates ``dx`` from the KKT system and solves the reduced system

    (A H^-1 A.T) dnu = r_p - A H^-1 r_d,     dx = -H^-1 (r_d + A.T dnu)

with matrix-free MINRES, then backtracks on the norm of the primal-dual
residual ``(grad f(x) + A.T nu, A x - b)``.  Positivity of ``x`` is kept by
capping the step at a fraction of the distance to the boundary.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, LineSearchError, SolverError, StepError
from .minres import LinearOperator, minres

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NewtonConfig:
    alpha: float = 0.01
    beta: float = 0.9
    eps: float = 1e-9
    max_iters: int = 200
    t_max_fraction: float = 0.95
    minres_rel_tol: float = 1e-12
    minres_max_iters: int | None = None  # None -> q, per MINRES call
    minres_restarts: int = 4
    jacobi: bool = False
    # Smallest backtracking exponent tried; 1 never takes the undamped step.
    first_exponent: int = 0
    max_backtracks: int = 200

    def __post_init__(self):
        if not 0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 1/2)")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.t_max_fraction < 1:
            raise ValueError("t_max_fraction must lie in (0, 1)")
        if self.minres_rel_tol <= 0:
            raise ValueError("minres_rel_tol must be positive")
        if self.minres_restarts < 0:
            raise ValueError("minres_restarts must be >= 0")
        if self.first_exponent < 0:
            raise ValueError("first_exponent must be >= 0")


@dataclass
class Iterate:
    x: np.ndarray
    nu: np.ndarray
    k: int = 0


@dataclass
class Residual:
    r_d: np.ndarray
    r_p: np.ndarray
    norm: float

    @property
    def rp_norm(self) -> float:
        return float(np.sqrt(self.r_p @ self.r_p))

    @property
    def rd_norm(self) -> float:
        return float(np.sqrt(self.r_d @ self.r_d))


class KrylovStats(NamedTuple):
    iterations: int
    relres: float


class StepLength(NamedTuple):
    t: float
    ell: int
    residual: Residual


@dataclass
class IterationRecord:
    k: int
    r_norm: float
    rp_norm: float
    t: float | None = None
    ell: int | None = None
    minres_iters: int | None = None
    minres_relres: float | None = None
    wall_ms: float = 0.0


@dataclass
class SolveTrace:
    records: list[IterationRecord] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        """Number of Newton steps taken."""
        return sum(1 for r in self.records if r.t is not None)

    @property
    def final_norm(self) -> float:
        return self.records[-1].r_norm if self.records else float("nan")

    @property
    def wall_time(self) -> float:
        return sum(r.wall_ms for r in self.records) / 1000.0

    def jsonl_lines(self, phase: str | None = None) -> list[str]:
        keys = ("k", "r_norm", "t", "ell", "minres_iters", "minres_relres", "wall_ms")
        lines = []
        for rec in self.records:
            d = asdict(rec)
            row = {"phase": phase} if phase else {}
            row.update({key: d[key] for key in keys})
            lines.append(json.dumps(row))
        return lines


@dataclass
class SolveResult:
    x: np.ndarray
    nu: np.ndarray
    residual: Residual
    trace: SolveTrace


def compute_residual(P, x: np.ndarray, nu: np.ndarray) -> Residual:
    r_d = P.gradient(x)
    r_d += P.rmatvec(nu)
    r_p = P.matvec(x) - P.b
    norm = float(np.sqrt(r_d @ r_d + r_p @ r_p))
    return Residual(r_d, r_p, norm)


def schur_operator(P, x: np.ndarray) -> tuple[LinearOperator, callable]:
    """``y -> A H^-1 A.T y`` at ``x`` together with the ``H^-1`` apply it uses."""
    hinv = P.hess_inv_operator(x)
    return LinearOperator(P.q, lambda y: P.matvec(hinv(P.rmatvec(y)))), hinv


def newton_step(P, x, nu, cfg: NewtonConfig, residual: Residual | None = None):
    """Return ``(dx, dnu, KrylovStats)`` solving the linearised optimality conditions."""
    if residual is None:
        residual = compute_residual(P, x, nu)
    S, hinv = schur_operator(P, x)
    rhs = residual.r_p - P.matvec(hinv(residual.r_d))
    precond = None
    if cfg.jacobi:
        diag = P.op.row_norms_weighted(P.hess_inv_diag(x))
        precond = lambda r: r / diag  # noqa: E731
    cap = cfg.minres_max_iters or P.q
    res = minres(S, rhs, cfg.minres_rel_tol, cap, precond=precond)
    dnu, iters, relres = res.solution, res.iterations, res.relres
    # Lanczos vectors lose orthogonality in floating point, so q steps may
    # fall short; restart from the true residual a bounded number of times.
    restarts = 0
    rhs_norm = float(np.linalg.norm(rhs))
    while relres > cfg.minres_rel_tol and restarts < cfg.minres_restarts:
        resid = rhs - S(dnu)
        tol = cfg.minres_rel_tol * rhs_norm / max(float(np.linalg.norm(resid)), 1e-300)
        fix = minres(S, resid, min(tol, 1.0), cap, precond=precond)
        dnu = dnu + fix.solution
        iters += fix.iterations
        relres = float(np.linalg.norm(rhs - S(dnu))) / rhs_norm
        restarts += 1
    if relres > cfg.minres_rel_tol:
        raise StepError(
            f"MINRES stopped at relative residual {relres:.3e} after {iters} iterations",
            best=dnu,
            relres=relres,
        )
    tmp = residual.r_d + P.rmatvec(dnu)
    dx = hinv(tmp)
    np.negative(dx, out=dx)
    return dx, dnu, KrylovStats(iters, relres)


def max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest ``t`` with ``x + t dx >= 0`` (``inf`` if ``dx >= 0``)."""
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(x[neg] / -dx[neg]))


def line_search(P, x, nu, dx, dnu, cfg: NewtonConfig, r_norm: float | None = None) -> StepLength:
    """Backtrack from ``min(0.95 t_max, 1)`` until the residual norm contracts."""
    if r_norm is None:
        r_norm = compute_residual(P, x, nu).norm
    t_tilde = min(cfg.t_max_fraction * max_step(x, dx), 1.0)
    for ell in range(cfg.first_exponent, cfg.first_exponent + cfg.max_backtracks + 1):
        t = cfg.beta**ell * t_tilde
        xt = x + t * dx
        if not np.all(xt > 0):
            continue
        res = compute_residual(P, xt, nu + t * dnu)
        if res.norm <= (1.0 - cfg.alpha * t) * r_norm:
            return StepLength(t, ell, res)
    raise LineSearchError(f"no acceptable step after {cfg.max_backtracks} backtracks (t_tilde={t_tilde:.3e})")


def solve(P, init: Iterate, cfg: NewtonConfig | None = None, callback=None) -> SolveResult:
    """Run Newton iterations until the residual norm drops below ``cfg.eps``.

    ``callback(k, x, nu, residual)`` is invoked at every accepted iterate,
    including the initial one.
    """
    cfg = cfg or NewtonConfig()
    x = np.array(init.x, dtype=float)
    nu = np.array(init.nu, dtype=float)
    if not np.all(x > 0):
        raise SolverError("initial point must be strictly positive")
    trace = SolveTrace()
    residual = compute_residual(P, x, nu)
    k = init.k
    while True:
        if callback is not None:
            callback(k, x, nu, residual)
        rec = IterationRecord(k, residual.norm, residual.rp_norm)
        trace.records.append(rec)
        if residual.norm < cfg.eps:
            trace.converged = True
            log.info("%s n=%d converged: k=%d |r|=%.3e", P.kind, P.n, k, residual.norm)
            return SolveResult(x, nu, residual, trace)
        if trace.iterations >= cfg.max_iters:
            raise ConvergenceError(f"no convergence within {cfg.max_iters} iterations", trace)
        start = time.perf_counter()
        try:
            dx, dnu, stats = newton_step(P, x, nu, cfg, residual)
            step = line_search(P, x, nu, dx, dnu, cfg, residual.norm)
        except SolverError as err:
            err.trace = trace
            raise
        x += step.t * dx
        nu += step.t * dnu
        del dx, dnu
        residual = step.residual
        rec.t, rec.ell = step.t, step.ell
        rec.minres_iters, rec.minres_relres = stats.iterations, stats.relres
        rec.wall_ms = 1000.0 * (time.perf_counter() - start)
        log.info(
            "%s n=%d k=%d |r|=%.3e t=%.4f ell=%d minres=%d (%.1e) %.0f ms",
            P.kind, P.n, k, rec.r_norm, step.t, step.ell, stats.iterations, stats.relres, rec.wall_ms,
        )
        k += 1
