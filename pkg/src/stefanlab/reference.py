"""Closed-form reference solutions.

* the similarity constant ``A`` of the constant-Dirichlet Stefan problem,
  ``u0 = (A/2) exp(A^2/4) int_0^A exp(-tau^2/4) dtau``, with front ``A sqrt(t)``;
* the matching similarity profile;
* the explicit decaying supersolution ``v(t, x) = eps exp(-alpha t) V(x / sigma(t))``
  used to certify exponential decay for small data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf

from .errors import InvalidSpecError

SQRT_PI = math.sqrt(math.pi)


def gauss_integral(a):
    """``int_0^a exp(-tau^2/4) dtau`` (closed form through erf)."""
    return SQRT_PI * erf(np.asarray(a, dtype=float) / 2.0)


def similarity_rhs(A: float) -> float:
    """``(A/2) exp(A^2/4) int_0^A exp(-tau^2/4) dtau``; ``inf`` past the float range."""
    if A <= 0:
        return 0.0
    log_rhs = math.log(0.5 * A) + A * A / 4.0 + math.log(float(gauss_integral(A)))
    return math.exp(log_rhs) if log_rhs < 709.0 else math.inf


@dataclass(frozen=True)
class SimilarityConstant:
    u0: float
    A: float
    residual: float


def neumann_similarity_A(u0: float, tol: float = 1e-12) -> SimilarityConstant:
    """Root ``A >= 0`` of ``similarity_rhs(A) = u0``.

    The right-hand side is strictly increasing with value 0 at ``A = 0``, so
    the root is unique; it is bracketed by doubling and polished by Brent's
    method to ``tol`` (absolute on ``A``, plus a relative floor).
    """
    if not np.isfinite(u0) or u0 < 0:
        raise InvalidSpecError(f"u0 must be >= 0, got {u0}")
    if tol <= 0:
        raise InvalidSpecError("tol must be positive")
    if u0 == 0:
        return SimilarityConstant(0.0, 0.0, 0.0)
    # small-u0 start: rhs ~ A^2/2
    hi = max(2.0 * math.sqrt(2.0 * u0), 1e-300)
    while similarity_rhs(hi) < u0:
        hi *= 2.0
    A = brentq(lambda a: similarity_rhs(a) - u0, 0.0, hi,
               xtol=min(tol, 1e-15), rtol=4 * np.finfo(float).eps, maxiter=500)
    return SimilarityConstant(float(u0), float(A), abs(similarity_rhs(A) - u0))


def dirichlet_similarity_profile(u0: float, t: float, x, A: float = None):
    """Similarity solution of the constant-Dirichlet problem at time ``t``.

    ``z(t, x) = u0 (1 - erf(x / (2 sqrt t)) / erf(A / 2))`` on ``[0, A sqrt t]``
    and 0 beyond the front.
    """
    if t <= 0:
        raise InvalidSpecError("similarity profile needs t > 0")
    if A is None:
        A = neumann_similarity_A(u0).A
    x = np.asarray(x, dtype=float)
    if A == 0.0:
        return np.zeros_like(x)
    z = u0 * (1.0 - erf(x / (2.0 * math.sqrt(t))) / erf(A / 2.0))
    front = A * math.sqrt(t)
    return np.where((x >= 0) & (x <= front), np.maximum(z, 0.0), 0.0)


def similarity_front(A: float, t):
    return A * np.sqrt(t)


# ---------------------------------------------------------------------------
# Decaying supersolution
# ---------------------------------------------------------------------------

def decay_delta(p: float) -> float:
    """Smallness constant ``(5/4) min{1/24, 2^{-(p+2)/(p-1)}}``."""
    if not (p > 1):
        raise InvalidSpecError(f"p must exceed 1, got {p}")
    return 1.25 * min(1.0 / 24.0, 2.0 ** (-(p + 2.0) / (p - 1.0)))


def smallness_bound(s0: float, p: float) -> float:
    """Sup-norm bound under which the supersolution dominates the data."""
    return decay_delta(p) * min(1.0, s0 ** (-1.0 / (p - 1.0)))


def V(y):
    y = np.asarray(y, dtype=float)
    return -y * y - y + 2.0


def dV(y):
    return -2.0 * np.asarray(y, dtype=float) - 1.0


@dataclass(frozen=True)
class DecaySupersolution:
    s0: float
    p: float
    epsilon: float
    alpha: float

    def sigma(self, t):
        return 2.0 * self.s0 * (2.0 - np.exp(-self.alpha * np.asarray(t, float)))

    def sigma_dot(self, t):
        return 2.0 * self.s0 * self.alpha * np.exp(-self.alpha * np.asarray(t, float))

    def __call__(self, t, x):
        """Evaluate ``v(t, x)``; zero beyond ``sigma(t)``."""
        t = np.asarray(t, float)
        x = np.asarray(x, float)
        y = x / self.sigma(t)
        val = self.epsilon * np.exp(-self.alpha * t) * V(y)
        return np.where((y >= 0) & (y <= 1), val, 0.0)

    def v_x(self, t, x):
        t = np.asarray(t, float)
        sig = self.sigma(t)
        return self.epsilon * np.exp(-self.alpha * t) * dV(np.asarray(x, float) / sig) / sig

    # residuals: each must be >= 0 (== 0 for the front value)

    def front_value(self, t):
        return self(t, self.sigma(t))

    def front_residual(self, t):
        """``sigma' + v_x(t, sigma)``."""
        return self.sigma_dot(t) + self.v_x(t, self.sigma(t))

    def heat_residual(self, t, x):
        """``v_t - v_xx`` from the closed form."""
        t = np.asarray(t, float)
        x = np.asarray(x, float)
        sig = self.sigma(t)
        y = x / sig
        amp = self.epsilon * np.exp(-self.alpha * t)
        vt = amp * (-self.alpha * V(y) - x * self.sigma_dot(t) / sig ** 2 * dV(y))
        vxx = amp * (-2.0) / sig ** 2
        return vt - vxx

    def flux_residual(self, t):
        """``-v_x(t, 0) - v(t, 0)^p``."""
        v0 = self(t, 0.0)
        return -self.v_x(t, 0.0) - v0 ** self.p

    def audit(self, n_t: int = 100, n_x: int = 100, t_max: float = None) -> dict:
        """Minimum of every residual over an ``n_t x n_x`` grid on ``[0, t_max] x [0, sigma(t)]``."""
        if t_max is None:
            t_max = 10.0 * self.s0 ** 2
        t = np.linspace(0.0, t_max, n_t)
        frac = np.linspace(0.0, 1.0, n_x)
        T, F = np.meshgrid(t, frac, indexing="ij")
        X = F * self.sigma(T)
        out = {
            "front_value_max_abs": float(np.max(np.abs(self.front_value(t)))),
            "front_residual_min": float(np.min(self.front_residual(t))),
            "heat_residual_min": float(np.min(self.heat_residual(T, X))),
            "flux_residual_min": float(np.min(self.flux_residual(t))),
        }
        scale = self.epsilon
        out["ok"] = bool(out["front_value_max_abs"] <= 1e-14 * scale
                         and out["front_residual_min"] >= 0
                         and out["heat_residual_min"] >= 0
                         and out["flux_residual_min"] >= 0)
        return out


def decay_supersolution(s0: float, p: float, alpha: float = None) -> DecaySupersolution:
    """Explicit supersolution for small data; ``alpha`` defaults to ``1/(24 s0^2)``."""
    if not (s0 > 0) or not (p > 1):
        raise InvalidSpecError(f"need s0 > 0 and p > 1, got s0={s0}, p={p}")
    eps = min(1.0 / 24.0, 2.0 ** (-(p + 2.0) / (p - 1.0)) * s0 ** (-1.0 / (p - 1.0)))
    if alpha is None:
        alpha = 1.0 / (24.0 * s0 ** 2)
    lo, hi = 1.0 / (32.0 * s0 ** 2), 1.0 / (16.0 * s0 ** 2)
    if not (lo * (1 - 1e-12) <= alpha <= hi * (1 + 1e-12)):
        raise InvalidSpecError(f"alpha must lie in [{lo}, {hi}]")
    return DecaySupersolution(float(s0), float(p), float(eps), float(alpha))
