"""Turn solver output into bounds that do not depend on solver accuracy.

* Lower bounds come from the Lagrange dual, valid for any multiplier vector.
* Upper bounds come from evaluating the objective at a feasible point, obtained
  by projecting the solver's iterate onto ``{x : A x = b}``.

Everything is in floating point; no rational or interval arithmetic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from decimal import ROUND_CEILING, ROUND_FLOOR, Decimal

import numpy as np

from .errors import CertificationError, SolverError
from .lower import LowerProblem, lower_dual, lower_init
from .minres import LinearOperator, minres
from .upper import UpperProblem

FEASIBILITY_TOL = 1e-10
ROUNDING_QUANTUM = Decimal("1e-9")


@dataclass(frozen=True)
class BoundCertificate:
    """A bound on the n-queens constant and the numbers that justify it."""

    n: int
    kind: str
    certified_value: float
    primal_objective: float
    dual_value: float | None
    primal_residual_norm: float
    newton_iterations: int
    wall_time_seconds: float

    def __post_init__(self):
        if self.kind not in ("lower", "upper"):
            raise ValueError(f"kind must be 'lower' or 'upper', got {self.kind!r}")

    def rounded_value(self) -> Decimal:
        """``certified_value`` rounded outward to the 1e-9 digit."""
        return outward_round(self.certified_value, self.kind)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_json(self) -> str:
        """One-line JSON with every real printed to 17 significant digits."""
        parts = [f"{json.dumps(k)}: {_json_value(v)}" for k, v in self.to_dict().items()]
        return "{" + ", ".join(parts) + "}"

    @classmethod
    def from_json(cls, text: str) -> BoundCertificate:
        return cls(**json.loads(text))

    def to_text(self) -> str:
        dual = "n/a" if self.dual_value is None else f"{self.dual_value:.17g}"
        return "\n".join(
            [
                f"{self.kind} bound, n = {self.n}",
                f"  certified value      {self.rounded_value()}  ({self.certified_value:.17g})",
                f"  primal objective     {self.primal_objective:.17g}",
                f"  dual value           {dual}",
                f"  primal residual      {self.primal_residual_norm:.3e}",
                f"  newton iterations    {self.newton_iterations}",
                f"  wall time            {self.wall_time_seconds:.2f} s",
            ]
        )


def _json_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, float):
        if not math.isfinite(v):
            return "null"
        text = format(v, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    return json.dumps(v)


def outward_round(value: float, kind: str) -> Decimal:
    """Round a lower bound down and an upper bound up to a multiple of 1e-9."""
    mode = ROUND_FLOOR if kind == "lower" else ROUND_CEILING
    return Decimal(value).quantize(ROUNDING_QUANTUM, rounding=mode)


def certify_lower(
    P: LowerProblem,
    nu,
    x=None,
    *,
    newton_iterations: int = 0,
    wall_time_seconds: float = 0.0,
) -> BoundCertificate:
    """Lower bound ``lower_dual(P, nu)``; any ``nu`` gives a valid (possibly loose) bound.

    ``x`` is the primal point reported alongside; without it the feasible
    starting point is used, so ``primal_objective`` is always an upper bound on
    the optimal value.
    """
    if x is None:
        x, _ = lower_init(P)
    x = np.asarray(x, dtype=float)
    dual = float(lower_dual(P, nu))
    rp = P.primal_residual(x)
    return BoundCertificate(
        n=P.n,
        kind="lower",
        certified_value=dual,
        primal_objective=float(P.objective(x)),
        dual_value=dual,
        primal_residual_norm=float(np.linalg.norm(rp)),
        newton_iterations=int(newton_iterations),
        wall_time_seconds=float(wall_time_seconds),
    )


def project_feasible(P, x, *, tol: float = FEASIBILITY_TOL, max_rounds: int = 6) -> np.ndarray:
    """Minimum-norm correction ``x + A.T lam`` with ``A A.T lam = b - A x``.

    A few rounds of iterative refinement push ``||A x - b||`` to ``tol``.
    Raises :class:`CertificationError` if a component becomes nonpositive.
    """
    x = np.array(x, dtype=float)
    if x.shape != (P.p,):
        raise ValueError(f"x has shape {x.shape}, expected ({P.p},)")
    gram = LinearOperator(P.q, lambda y: P.matvec(P.rmatvec(y)))
    r = P.b - P.matvec(x)
    rnorm = float(np.linalg.norm(r))
    for _ in range(max_rounds):
        if rnorm <= tol:
            break
        res = minres(gram, r, rel_tol=1e-14, max_iters=10 * P.q)
        if res.relres > 1e-6:
            raise SolverError(f"projection solve stalled at relative residual {res.relres:.2e}")
        cand = x + P.rmatvec(res.solution)
        r_new = P.b - P.matvec(cand)
        new_norm = float(np.linalg.norm(r_new))
        if new_norm >= rnorm:
            break
        x, r, rnorm = cand, r_new, new_norm
    if rnorm > tol:
        raise SolverError(f"projection reached ||Ax - b|| = {rnorm:.3e} > {tol:.0e}")
    if not np.all(x > 0):
        raise CertificationError("projected point has nonpositive components")
    return x


def certify_upper(
    P: UpperProblem,
    x,
    *,
    newton_iterations: int = 0,
    wall_time_seconds: float = 0.0,
) -> BoundCertificate:
    """Upper bound: objective at the projection of ``x`` onto the constraint set."""
    x = np.asarray(x, dtype=float)
    if not np.all(x > 0):
        raise CertificationError("candidate point must be strictly positive")
    xf = project_feasible(P, x)
    value = float(P.objective(xf))
    return BoundCertificate(
        n=P.n,
        kind="upper",
        certified_value=value,
        primal_objective=value,
        dual_value=None,
        primal_residual_norm=float(np.linalg.norm(P.primal_residual(xf))),
        newton_iterations=int(newton_iterations),
        wall_time_seconds=float(wall_time_seconds),
    )
