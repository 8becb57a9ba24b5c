"""Command-line driver: ``nqueens-bounds --bound {lower,upper} --n N``.

The certificate goes to stdout and progress logging to stderr.  Exit codes:
0 certified, 1 usage error, 2 solver did not converge, 3 certification failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field

from . import sparse_core
from .certify import BoundCertificate, certify_lower, certify_upper
from .errors import CertificationError, DomainError, SolverError
from .lower import build_lower, lower_init
from .newton import Iterate, NewtonConfig, SolveTrace, solve
from .upper import build_approx_upper, build_upper, lift_approx_solution, upper_init

log = logging.getLogger("nqueens_bounds")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_CONVERGENCE = 2
EXIT_CERTIFICATION = 3


@dataclass(frozen=True)
class RunConfig:
    n: int
    bound: str
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    warm_start: bool = True
    output: str = "json"
    trace_path: str | None = None
    threads: int = 1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"--n must be a positive integer, got {self.n}")
        if self.bound not in ("lower", "upper"):
            raise ValueError(f"--bound must be 'lower' or 'upper', got {self.bound!r}")
        if self.output not in ("json", "text"):
            raise ValueError(f"--output must be 'json' or 'text', got {self.output!r}")
        if self.threads < 1:
            raise ValueError(f"--threads must be >= 1, got {self.threads}")


@dataclass
class RunOutcome:
    exit_code: int
    certificate: BoundCertificate | None
    phases: list[tuple[str, SolveTrace]]
    message: str = ""

    def trace_lines(self) -> list[str]:
        return [line for phase, tr in self.phases for line in tr.jsonl_lines(phase)]


def _solve_phase(phases, name, P, init, cfg, callback):
    hook = None
    if callback is not None:
        hook = lambda k, x, nu, r: callback(name, P, k, x, nu, r)  # noqa: E731
    try:
        result = solve(P, init, cfg, callback=hook)
    except SolverError as err:
        if err.trace is not None:
            phases.append((name, err.trace))
        raise
    phases.append((name, result.trace))
    return result


def run(config: RunConfig, callback=None) -> RunOutcome:
    """Build, solve and certify; never raises on solver or certification failure.

    ``callback(phase, P, k, x, nu, residual)`` observes every Newton iterate.
    """
    sparse_core.set_num_threads(config.threads)
    phases: list[tuple[str, SolveTrace]] = []
    cfg = config.newton
    start = time.perf_counter()
    try:
        if config.bound == "lower":
            P = build_lower(config.n)
            res = _solve_phase(phases, "lower", P, Iterate(*lower_init(P)), cfg, callback)
        elif config.warm_start:
            Q = build_approx_upper(config.n)
            approx = _solve_phase(phases, "approx", Q, Iterate(*Q.initial_point()), cfg, callback)
            P = build_upper(config.n)
            x0, nu0 = lift_approx_solution(P, Q, approx.x, approx.nu)
            res = _solve_phase(phases, "exact", P, Iterate(x0, nu0), cfg, callback)
        else:
            P = build_upper(config.n)
            res = _solve_phase(phases, "exact", P, Iterate(*upper_init(P)), cfg, callback)
    except (SolverError, DomainError) as err:
        log.error("solver failed: %s", err)
        return RunOutcome(EXIT_NO_CONVERGENCE, None, phases, str(err))
    finally:
        sparse_core.set_num_threads(1)

    iters = sum(tr.iterations for _, tr in phases)
    try:
        elapsed = time.perf_counter() - start
        if config.bound == "lower":
            cert = certify_lower(P, res.nu, res.x, newton_iterations=iters, wall_time_seconds=elapsed)
        else:
            cert = certify_upper(P, res.x, newton_iterations=iters, wall_time_seconds=elapsed)
    except (CertificationError, SolverError) as err:
        log.error("certification failed: %s", err)
        return RunOutcome(EXIT_CERTIFICATION, None, phases, str(err))
    log.info("%s bound n=%d certified %.17g", cert.kind, cert.n, cert.certified_value)
    return RunOutcome(EXIT_OK, cert, phases)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nqueens-bounds", description="Certified bounds on the n-queens constant.")
    p.add_argument("--n", type=int, required=True, help="board size (>= 1)")
    p.add_argument("--bound", choices=("lower", "upper"), required=True)
    p.add_argument("--eps", type=float, default=1e-9, help="residual-norm stopping tolerance")
    p.add_argument("--alpha", type=float, default=0.01, help="line-search sufficient decrease")
    p.add_argument("--beta", type=float, default=0.9, help="line-search backtracking factor")
    p.add_argument("--max-iters", type=int, default=200, help="Newton iteration cap per phase")
    p.add_argument("--minres-tol", type=float, default=1e-12, help="MINRES relative tolerance")
    p.add_argument("--no-warm-start", action="store_true", help="upper bound: skip the approximate phase")
    p.add_argument("--output", choices=("json", "text"), default="json")
    p.add_argument("--trace", metavar="FILE", help="write one JSON line per Newton iterate")
    p.add_argument("--threads", type=int, default=1, help="worker threads for board products")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    newton = NewtonConfig(
        alpha=args.alpha,
        beta=args.beta,
        eps=args.eps,
        max_iters=args.max_iters,
        minres_rel_tol=args.minres_tol,
    )
    return RunConfig(
        n=args.n,
        bound=args.bound,
        newton=newton,
        warm_start=not args.no_warm_start,
        output=args.output,
        trace_path=args.trace,
        threads=args.threads,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
    except ValueError as err:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)

    outcome = run(config)
    if config.trace_path:
        with open(config.trace_path, "w") as fh:
            for line in outcome.trace_lines():
                fh.write(line + "\n")
    if outcome.certificate is not None:
        cert = outcome.certificate
        print(cert.to_json() if config.output == "json" else cert.to_text())
    else:
        print(f"{parser.prog}: {outcome.message}", file=sys.stderr)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
