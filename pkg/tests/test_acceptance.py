"""Acceptance suite: one group of checks per criterion, summarised by conftest.

The two large runs (lower n = 2048, upper n = 1024) are session fixtures and
dominate the wall time of the whole suite.
"""

import itertools
import time
from decimal import Decimal

import numpy as np
import pytest

from nqueens_bounds.cli import RunConfig, run
from nqueens_bounds.lower import build_lower
from nqueens_bounds.minres import minres
from nqueens_bounds.newton import NewtonConfig, compute_residual, newton_step
from nqueens_bounds.scalar_funcs import pair_integral
from nqueens_bounds.upper import build_upper

import oracles

LOWER_2048 = 1.944000752019729
UPPER_1024 = 1.9440010813092217
HEADLINE_TOL = 5e-9
DEFAULTS = NewtonConfig()

# every iterate of every solve below: (label, phase, problem kind, t of the step into it, x.min, r_p, |r|, b norm)
SOLVE_LOG: list[dict] = []


def logged_run(n, bound, **kw):
    """``cli.run`` that records each iterate for the invariant checks."""
    label = f"{bound} n={n}" + ("" if kw.get("warm_start", True) else " cold")
    iterates = []

    def cb(phase, P, k, x, nu, r):
        iterates.append(
            {"phase": phase, "kind": P.kind, "xmin": float(x.min()), "rp": r.r_p.copy(), "norm": r.norm,
             "b_norm": float(np.linalg.norm(P.b))}
        )

    start = time.perf_counter()
    out = run(RunConfig(n=n, bound=bound, **kw), callback=cb)
    elapsed = time.perf_counter() - start
    assert out.exit_code == 0, out.message
    # attach the accepted step length to the iterate it produced
    steps = {phase: [rec.t for rec in tr.records] for phase, tr in out.phases}
    for phase in steps:
        rows = [it for it in iterates if it["phase"] == phase]
        for prev, cur, t in zip(rows, rows[1:], steps[phase]):
            cur["t"] = t
            cur["prev"] = prev
    SOLVE_LOG.append({"label": label, "iterates": iterates})
    return out, elapsed


@pytest.fixture(scope="session")
def lower_2048():
    return logged_run(2048, "lower")


@pytest.fixture(scope="session")
def upper_1024():
    return logged_run(1024, "upper")


@pytest.fixture(scope="session")
def small_pairs():
    """Certified (lower, upper) values on small boards."""
    return {n: (logged_run(n, "lower")[0].certificate, logged_run(n, "upper")[0].certificate) for n in (4, 8, 17, 32, 64)}


@pytest.fixture(scope="session")
def warm_cold():
    out = {}
    for n in (64, 256):
        warm, _ = logged_run(n, "upper")
        cold, _ = logged_run(n, "upper", warm_start=False)
        out[n] = (warm, cold)
    return out


@pytest.mark.slow
@pytest.mark.criterion(1)
class TestLowerHeadline:
    def test_value(self, lower_2048, detail):
        out, elapsed = lower_2048
        cert = out.certificate
        detail(f"L_2048 = {cert.certified_value!r}  ({cert.newton_iterations} Newton steps, {elapsed:.0f} s)")
        assert abs(cert.certified_value - LOWER_2048) <= HEADLINE_TOL

    def test_rounded(self, lower_2048, detail):
        rounded = lower_2048[0].certificate.rounded_value()
        detail(f"rounded down: {rounded}")
        assert rounded >= Decimal("1.944000752")

    def test_runtime(self, lower_2048):
        assert lower_2048[1] <= 30 * 60


@pytest.mark.slow
@pytest.mark.criterion(2)
class TestUpperHeadline:
    def test_value(self, upper_1024, detail):
        out, elapsed = upper_1024
        cert = out.certificate
        counts = " + ".join(str(tr.iterations) for _, tr in out.phases)
        detail(f"U_1024 = {cert.certified_value!r}  ({counts} Newton steps, {elapsed:.0f} s)")
        assert abs(cert.certified_value - UPPER_1024) <= HEADLINE_TOL

    def test_rounded(self, upper_1024, detail):
        rounded = upper_1024[0].certificate.rounded_value()
        detail(f"rounded up: {rounded}")
        assert rounded <= Decimal("1.944001082")

    def test_runtime(self, upper_1024):
        assert upper_1024[1] <= 10 * 60


@pytest.mark.criterion(3)
class TestSmallBoards:
    def test_bounds_and_runtime(self, detail):
        (low, t_low), (up, t_up) = logged_run(17, "lower"), logged_run(12, "upper")
        detail(f"L_17 = {low.certificate.certified_value:.12f}, U_12 = {up.certificate.certified_value:.12f}, "
               f"{t_low + t_up:.2f} s")
        assert low.certificate.certified_value >= 1.94
        assert up.certificate.certified_value <= 1.9449
        assert t_low + t_up <= 10.0


@pytest.mark.criterion(4)
class TestSandwich:
    def test_small_pairs(self, small_pairs):
        for n, (low, up) in small_pairs.items():
            assert low.certified_value <= up.certified_value, n

    def test_all_lower_below_all_upper(self, small_pairs):
        lows = [low.certified_value for low, _ in small_pairs.values()]
        ups = [up.certified_value for _, up in small_pairs.values()]
        assert max(lows) <= min(ups)

    @pytest.mark.slow
    def test_headline_interval(self, lower_2048, upper_1024, small_pairs, detail):
        low, up = lower_2048[0].certificate, upper_1024[0].certificate
        detail(f"[{low.rounded_value()}, {up.rounded_value()}]")
        assert low.certified_value <= up.certified_value
        assert (low.rounded_value(), up.rounded_value()) == (Decimal("1.944000752"), Decimal("1.944001082"))
        assert max(lo.certified_value for lo, _ in small_pairs.values()) <= up.certified_value
        assert low.certified_value <= min(u.certified_value for _, u in small_pairs.values())


@pytest.mark.criterion(5)
class TestConicReference:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_lower(self, n, detail):
        cert = logged_run(n, "lower")[0].certificate
        ref, _ = oracles.cvxpy_lower(n)
        detail(f"lower n={n}: |delta| = {abs(cert.primal_objective - ref):.1e}")
        assert abs(cert.primal_objective - ref) <= 1e-6

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_upper(self, n, detail):
        cert = logged_run(n, "upper")[0].certificate
        ref, _ = oracles.cvxpy_upper(n)
        detail(f"upper n={n}: |delta| = {abs(cert.primal_objective - ref):.1e}")
        assert abs(cert.primal_objective - ref) <= 1e-6

    @pytest.mark.parametrize("kind", ["lower", "upper"])
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_newton_step(self, kind, n):
        P = build_lower(n) if kind == "lower" else build_upper(n)
        rng = np.random.default_rng(100 + n)
        x, nu = rng.uniform(0.2, 2.0, P.p), rng.standard_normal(P.q)
        if kind == "lower":
            A, _ = oracles.dense_lower(n)
            H = np.diag(1.0 / x)
        else:
            A, _ = oracles.dense_upper(n)
            H = oracles.upper_hessian(n, x)
        r = compute_residual(P, x, nu)
        ref = np.concatenate(oracles.kkt_direction(H, A, r.r_d, r.r_p))
        dx, dnu, _ = newton_step(P, x, nu, DEFAULTS)
        got = np.concatenate([dx, dnu])
        assert np.linalg.norm(got - ref) <= 1e-8 * np.linalg.norm(ref)


@pytest.mark.criterion(6)
class TestDerivatives:
    @pytest.mark.parametrize("build", [build_lower, build_upper])
    def test_gradients(self, build, detail):
        P = build(3)
        worst = 0.0
        for seed in range(20):
            x = np.random.default_rng(seed).uniform(0.2, 2.0, P.p)
            grad = P.gradient(x)
            fd = oracles.central_gradient(P.objective, x)
            worst = max(worst, np.linalg.norm(grad - fd) / np.linalg.norm(grad))
        detail(f"{P.kind} gradient: worst relative error {worst:.1e} over 20 points")
        assert worst <= 1e-6

    def test_pair_integral_grid(self, detail):
        grid = [0.0, 0.01, 0.5, 1.0, 2.0, 10.0]
        worst = max(abs(pair_integral(u, v) - oracles.pair_integral_quad(u, v)) for u, v in itertools.product(grid, grid))
        detail(f"pair integral: worst abs error {worst:.1e} on the 6x6 grid")
        assert worst <= 1e-10

    @pytest.mark.parametrize("build", [build_lower, build_upper])
    def test_hessian_inverse(self, build, detail):
        P = build(3)
        worst = 0.0
        for seed in range(3):
            x = np.random.default_rng(seed).uniform(0.2, 2.0, P.p)
            H = oracles.richardson_jacobian(P.gradient, x)
            Hinv = np.column_stack([P.hess_inv_apply(x, e) for e in np.eye(P.p)])
            worst = max(worst, np.abs(H @ Hinv - np.eye(P.p)).max())
        detail(f"{P.kind} Hessian inverse: max |H_fd H^-1 - I| = {worst:.1e}")
        assert worst <= 1e-8


@pytest.mark.criterion(8)
class TestDualityGap:
    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 16, 17, 32, 64])
    def test_gap(self, n):
        cert = logged_run(n, "lower")[0].certificate
        assert abs(cert.primal_objective - cert.dual_value) <= 1e-8


def spd(q, cond, seed):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((q, q)))
    ev = np.logspace(0, np.log10(cond), q)
    rng.shuffle(ev)
    S = (Q * ev) @ Q.T
    return 0.5 * (S + S.T), rng.standard_normal(q)


@pytest.mark.criterion(9)
class TestMinres:
    CASES = list(itertools.product([2, 10, 40, 100], [1.0, 1e2, 1e4, 1e6], range(3)))

    def test_direct_solve_agreement(self, detail):
        worst = 0.0
        for q, cond, seed in self.CASES:
            S, b = spd(q, cond, seed)
            res = minres(S, b, 1e-12, max_iters=20 * q)
            z = np.linalg.solve(S, b)
            err = np.linalg.norm(res.solution - z) / np.linalg.norm(z)
            worst = max(worst, err)
            assert err <= 1e-10, (q, cond, seed)
        detail(f"{len(self.CASES)} systems, worst relative error {worst:.1e}")

    def test_monotone_residuals(self):
        eps = np.finfo(float).eps
        for q, cond, seed in self.CASES:
            S, b = spd(q, cond, seed)
            seen = []
            res = minres(S, b, 1e-12, max_iters=20 * q, callback=lambda i, z: seen.append(z.copy()))
            assert np.all(np.diff(res.history) <= 0), (q, cond, seed)
            true = np.array([np.linalg.norm(b - S @ z) for z in seen])
            floor = q * eps * np.linalg.norm(S, 2) * np.array([np.linalg.norm(z) for z in seen[1:]])
            assert np.all(np.diff(true) <= floor), (q, cond, seed)


@pytest.mark.criterion(10)
class TestWarmStart:
    @pytest.mark.parametrize("n", [64, 256])
    def test_fewer_exact_iterations(self, warm_cold, n, detail):
        warm, cold = warm_cold[n]
        phases = dict(warm.phases)
        warm_exact, cold_exact = phases["exact"].iterations, dict(cold.phases)["exact"].iterations
        detail(f"n={n}: warm {phases['approx'].iterations} + {warm_exact}, cold {cold_exact}")
        assert warm_exact < cold_exact
        assert warm.certificate.certified_value == pytest.approx(cold.certificate.certified_value, abs=1e-9)


def all_steps():
    for solve in SOLVE_LOG:
        for it in solve["iterates"]:
            yield solve["label"], it


@pytest.mark.criterion(7)
class TestInvariants:
    # runs last, so every solve made by the classes above is in the log
    @pytest.fixture(autouse=True)
    def populate(self, lower_2048, upper_1024, small_pairs, warm_cold):
        assert len(SOLVE_LOG) >= 10

    def test_residual_decrease(self, detail):
        count = 0
        for label, it in all_steps():
            if "prev" in it:
                count += 1
                assert it["norm"] <= (1 - DEFAULTS.alpha * it["t"]) * it["prev"]["norm"], label
        detail(f"{count} accepted steps over {len(SOLVE_LOG)} solves")

    def test_primal_residual_contraction(self, detail):
        worst = 0.0
        for label, it in all_steps():
            if "prev" in it:
                prev = it["prev"]["rp"]
                gap = np.linalg.norm(it["rp"] - (1 - it["t"]) * prev)
                rel = gap / max(np.linalg.norm(prev), it["b_norm"])
                worst = max(worst, rel)
                assert rel <= 1e-10, label
        detail(f"worst |r_p+ - (1-t) r_p| / max(|r_p|, |b|) = {worst:.1e}")

    def test_strict_positivity(self):
        for label, it in all_steps():
            assert it["xmin"] > 0, label

    def test_lower_stays_feasible(self, detail):
        worst = 0.0
        for label, it in all_steps():
            if it["kind"] == "lower":
                rel = np.linalg.norm(it["rp"]) / it["b_norm"]
                worst = max(worst, rel)
                assert rel <= 1e-10, label
        detail(f"lower solves: worst |r_p| / |b| = {worst:.1e}")
