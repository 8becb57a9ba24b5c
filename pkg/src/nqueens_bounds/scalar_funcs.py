"""Negative entropy and the pair-entropy integral used by the upper-bound objective.

All functions are vectorised over numpy arrays and return floats for scalar
input.  The pair integral is

    F(u, v) = int_0^1 g((1 - y) u + y v) dy,    g(t) = t log t,

written around the midpoint ``m = (u + v) / 2`` with relative half-difference
``s = (v - u) / (u + v)`` as ``F = g(m) + m * phi(s)`` where

    phi(s) = sum_{j>=1} s^(2j) / ((2j)(2j - 1)(2j + 1)).

Close to the diagonal ``u = v`` the divided-difference closed form cancels
catastrophically, so the series is used there instead.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DomainError

# Series branch when |u - v| <= PAIR_SWITCH * max(u, v), i.e. |s| <= 1/9.
PAIR_SWITCH = 0.2
_TERMS = 12
_J = np.arange(1, _TERMS + 1)
_PHI = 1.0 / ((2 * _J) * (2 * _J - 1) * (2 * _J + 1))
_DPHI = 1.0 / ((2 * _J - 1) * (2 * _J + 1))
_I = np.arange(_TERMS)
_MU0 = 1.0 / (2 * _I + 1)
_MU2 = 1.0 / (2 * _I + 3)


def _out(a):
    return a[()] if isinstance(a, np.ndarray) and a.ndim == 0 else a


def _nonneg(x, name="x"):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise DomainError(f"{name} must be >= 0")
    return x


def _positive(x, name="x"):
    x = np.asarray(x, dtype=float)
    if not np.all(x > 0):
        raise DomainError(f"{name} must be > 0")
    return x


def _xlogx(x):
    return x * np.log(np.where(x > 0, x, 1.0))


def g(x):
    """``x log x`` with ``g(0) = 0``."""
    return _out(_xlogx(_nonneg(x)))


def g1(x):
    """First derivative ``log x + 1``."""
    return _out(np.log(_positive(x)) + 1.0)


def g2(x):
    """Second derivative ``1 / x``."""
    return _out(1.0 / _positive(x))


def g_conj(y):
    """Convex conjugate of ``g``: ``exp(y - 1)`` (overflows to ``inf``)."""
    with np.errstate(over="ignore"):
        return _out(np.exp(np.asarray(y, dtype=float) - 1.0))


def _poly_even(s2, coefs):
    # sum_i coefs[i] * s2**i by Horner
    acc = np.zeros_like(s2)
    for c in coefs[::-1]:
        acc = acc * s2 + c
    return acc


def _midpoint_split(u, v):
    total = u + v
    m = 0.5 * total
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(total > 0, (v - u) / np.where(total > 0, total, 1.0), 0.0)
    near = np.abs(u - v) <= PAIR_SWITCH * np.maximum(u, v)
    return m, s, near


def pair_integral(u, v):
    """``int_0^1 g((1 - y) u + y v) dy`` for ``u, v >= 0``."""
    u, v = np.broadcast_arrays(_nonneg(u, "u"), _nonneg(v, "v"))
    m, s, near = _midpoint_split(u, v)
    s2 = s * s
    series = _xlogx(m) + m * s2 * _poly_even(s2, _PHI)
    with np.errstate(invalid="ignore", divide="ignore"):
        diff = np.where(near, 1.0, v - u)
        closed = (v * _xlogx(v) - u * _xlogx(u)) / (2.0 * diff) - 0.5 * m
    return _out(np.where(near, series, closed))


def pair_integral_grad(u, v):
    """Partial derivatives ``(dF/du, dF/dv)`` for ``u, v > 0``."""
    u, v = np.broadcast_arrays(_positive(u, "u"), _positive(v, "v"))
    m, s, near = _midpoint_split(u, v)
    s2 = s * s
    phi = s2 * _poly_even(s2, _PHI)
    dphi = s * _poly_even(s2, _DPHI)
    base = np.log(m) + 1.0 + phi
    du_near = 0.5 * (base - (1.0 + s) * dphi)
    dv_near = 0.5 * (base + (1.0 - s) * dphi)

    F = pair_integral(u, v)
    diff = np.where(near, 1.0, v - u)
    du_far = (F - _xlogx(u)) / diff
    dv_far = (_xlogx(v) - F) / diff
    return _out(np.where(near, du_near, du_far)), _out(np.where(near, dv_near, dv_far))


class PairHessian(NamedTuple):
    """Entries of the symmetric 2x2 Hessian of the pair integral."""

    uu: np.ndarray | float
    uv: np.ndarray | float
    vv: np.ndarray | float

    def det(self):
        return self.uu * self.vv - self.uv * self.uv

    def matrix(self) -> np.ndarray:
        return np.array([[self.uu, self.uv], [self.uv, self.vv]])


def pair_integral_hess(u, v) -> PairHessian:
    """Second derivatives of the pair integral for ``u, v > 0``.

    Uses the moments ``mu_k = 1/2 int_{-1}^{1} z^k / (1 + s z) dz``:
    ``h_uu = (mu0 - 2 mu1 + mu2) / 4m``, ``h_vv = (mu0 + 2 mu1 + mu2) / 4m``,
    ``h_uv = (mu0 - mu2) / 4m``.
    """
    u, v = np.broadcast_arrays(_positive(u, "u"), _positive(v, "v"))
    m, s, near = _midpoint_split(u, v)
    s2 = s * s
    mu0_n = _poly_even(s2, _MU0)
    mu2_n = _poly_even(s2, _MU2)
    mu1_n = -s * mu2_n

    with np.errstate(invalid="ignore", divide="ignore"):
        sf = np.where(near, 1.0, s)
        mu0_f = np.log(v / u) / (2.0 * sf)
        mu1_f = (1.0 - mu0_f) / sf
        mu2_f = (mu0_f - 1.0) / (sf * sf)
    mu0 = np.where(near, mu0_n, mu0_f)
    mu1 = np.where(near, mu1_n, mu1_f)
    mu2 = np.where(near, mu2_n, mu2_f)
    scale = 0.25 / m
    return PairHessian(
        _out(scale * (mu0 - 2.0 * mu1 + mu2)),
        _out(scale * (mu0 - mu2)),
        _out(scale * (mu0 + 2.0 * mu1 + mu2)),
    )
