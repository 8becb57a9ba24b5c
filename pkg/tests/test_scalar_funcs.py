import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nqueens_bounds.errors import DomainError
from nqueens_bounds.scalar_funcs import (
    PAIR_SWITCH,
    g,
    g1,
    g2,
    g_conj,
    pair_integral,
    pair_integral_grad,
    pair_integral_hess,
)

import oracles

positive = st.floats(1e-6, 1e3, allow_nan=False)
GRID = [0.0, 0.01, 0.5, 1.0, 2.0, 10.0]


def closed_form(u, v):
    def t2logt(t):
        return t * t * np.log(t) if t > 0 else 0.0

    return (t2logt(v) - t2logt(u)) / (2 * (v - u)) - (u + v) / 4


class TestEntropy:
    def test_values(self):
        assert g(0.0) == 0.0
        assert g(1.0) == 0.0
        assert g(np.e) == pytest.approx(np.e)

    @pytest.mark.parametrize("x", [0.1, 1.0, 10.0])
    def test_derivatives_by_differences(self, x):
        h = 1e-6 * x
        assert g1(x) == pytest.approx((g(x + h) - g(x - h)) / (2 * h), rel=1e-6)
        assert g2(x) == pytest.approx((g1(x + h) - g1(x - h)) / (2 * h), rel=1e-6)

    def test_domain(self):
        with pytest.raises(DomainError):
            g(-1e-3)
        for f in (g1, g2):
            with pytest.raises(DomainError):
                f(0.0)

    def test_vectorised(self):
        x = np.array([0.0, 1.0, 2.0])
        np.testing.assert_allclose(g(x), [0.0, 0.0, 2 * np.log(2)])
        assert isinstance(g(2.0), float)

    def test_conjugate(self):
        assert g_conj(1.0) == 1.0
        assert g_conj(0.0) == pytest.approx(0.36787944117, abs=1e-11)
        for x in (0.5, 2.0):
            assert g_conj(g1(x)) - (x * g1(x) - g(x)) == pytest.approx(0.0, abs=1e-14)
        assert g_conj(1e4) == np.inf


class TestPairIntegral:
    def test_special_values(self):
        assert pair_integral(1.0, 1.0) == 0.0
        assert pair_integral(0.0, 1.0) == pytest.approx(-0.25, abs=1e-15)
        assert pair_integral(0.0, 0.0) == 0.0

    def test_against_quadrature_grid(self):
        worst = max(
            abs(pair_integral(u, v) - oracles.pair_integral_quad(u, v)) for u, v in itertools.product(GRID, GRID)
        )
        assert worst <= 1e-10

    @given(positive, positive)
    @settings(max_examples=60, deadline=None)
    def test_symmetric(self, u, v):
        assert pair_integral(u, v) == pytest.approx(pair_integral(v, u), rel=1e-13, abs=1e-13)

    @given(positive, positive)
    @settings(max_examples=60, deadline=None)
    def test_jensen_domination(self, u, v):
        assert g(0.5 * (u + v)) <= pair_integral(u, v) + 1e-13 * max(1.0, abs(g(0.5 * (u + v))))

    @pytest.mark.parametrize("u", [0.01, 0.7, 3.0, 250.0])
    def test_continuity_at_branch_switch(self, u):
        v = u * (1 + PAIR_SWITCH)
        for a, b in ((u, v), (v, u)):
            assert abs(pair_integral(a, b) - closed_form(a, b)) <= 1e-12 * max(1.0, abs(closed_form(a, b)))
            below = pair_integral(a, b * (1 - 1e-12))
            above = pair_integral(a, b * (1 + 1e-12))
            assert abs(below - above) <= 1e-11 * max(1.0, abs(above))

    @pytest.mark.parametrize("u", [1e-3, 1.0, 50.0])
    def test_limit_on_diagonal(self, u):
        assert pair_integral(u, u + 1e-8) == pytest.approx(g(u), abs=1e-7)

    def test_domain(self):
        with pytest.raises(DomainError):
            pair_integral(-1.0, 1.0)
        with pytest.raises(DomainError):
            pair_integral_grad(0.0, 1.0)
        with pytest.raises(DomainError):
            pair_integral_hess(1.0, 0.0)

    def test_broadcasting(self):
        u = np.array([0.5, 1.0, 2.0])
        np.testing.assert_allclose(pair_integral(u, 1.0), [pair_integral(x, 1.0) for x in u])


class TestPairDerivatives:
    @pytest.mark.parametrize("u", [0.05, 1.0, 7.0])
    def test_gradient_on_diagonal(self, u):
        du, dv = pair_integral_grad(u, u)
        assert du == pytest.approx((np.log(u) + 1) / 2, rel=1e-14, abs=1e-15)
        assert dv == pytest.approx((np.log(u) + 1) / 2, rel=1e-14, abs=1e-15)

    @pytest.mark.parametrize("u,v", [(0.3, 0.7), (1.0, 1.0), (2.0, 0.01), (1.0, 1.05), (5.0, 0.2)])
    def test_gradient_by_differences(self, u, v):
        fd = oracles.central_gradient(
            lambda z: pair_integral(z[0], z[1]), np.array([u, v]), rel_step=1e-4 * min(u, v) / max(1.0, u, v)
        )
        grad = np.array(pair_integral_grad(u, v))
        assert np.linalg.norm(grad - fd) <= 1e-6 * np.linalg.norm(grad)

    @pytest.mark.parametrize("u,v", [(0.5, 1.5), (1.0, 1.0), (0.3, 0.31), (0.01, 2.0), (40.0, 3.0)])
    def test_hessian_against_quadrature(self, u, v):
        H = pair_integral_hess(u, v)
        np.testing.assert_allclose(H.matrix(), oracles.pair_hessian_quad(u, v), rtol=1e-11)

    def test_hessian_positive_definite(self):
        assert np.all(np.linalg.eigvalsh(pair_integral_hess(0.5, 1.5).matrix()) > 0)

    def test_equal_arguments_off_diagonal(self):
        for u in (0.2, 1.0, 9.0):
            assert pair_integral_hess(u, u).uv == pytest.approx(1 / (6 * u), rel=1e-14)

    @given(positive, positive)
    @settings(max_examples=80, deadline=None)
    def test_convexity_witness(self, u, v):
        H = pair_integral_hess(u, v)
        assert H.uu > 0
        assert H.det() > 0

    @given(st.floats(1e-3, 1e2), st.floats(1e-3, 1e2))
    @settings(max_examples=40, deadline=None)
    def test_hessian_matches_gradient_differences(self, u, v):
        H = pair_integral_hess(u, v).matrix()
        J = oracles.richardson_jacobian(lambda z: np.array(pair_integral_grad(z[0], z[1])), np.array([u, v]))
        np.testing.assert_allclose(H, J, rtol=1e-6, atol=1e-9 * np.abs(H).max())
