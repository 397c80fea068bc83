"""Predictions to compare against the engines: asymptotics, bounds and limits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .dist import SQRT_2_OVER_PI, Psi

BOUND_FACTOR = 4.0
APPLICABILITY_FACTOR = 24.0
UPPER_RHO_LIMIT = 1.0 / 24.0


class UninformativeLimit(ValueError):
    """The limit formula degenerates to zero (f(0) = 0)."""


def main_asymptotic(E_n: float) -> float:
    """Predicted ``P(T_n > n)``, ``sqrt(2/pi) * E_n``."""
    if E_n < 0:
        raise ValueError("E_n must be non-negative")
    return SQRT_2_OVER_PI * E_n


def survival_bound(E_n: float, B_m: float, rho: float) -> tuple[float, bool]:
    """``4 E_n / B_m`` and whether it is guaranteed (``B_m >= 24 rho``)."""
    if B_m <= 0:
        raise ValueError("B_m must be positive")
    return BOUND_FACTOR * E_n / B_m, B_m >= APPLICABILITY_FACTOR * rho


def rate_bounds(E_n: float, rho: float, C1: float = 1.0, C2: float = 1.0) -> tuple[float, float, bool]:
    """Lower and upper ``sqrt(2/pi) E_n (1 -+ C rho^{2/3})`` and the upper-bound validity flag.

    The constants are not known numerically; defaults of 1 only fix the shape.
    """
    main = main_asymptotic(E_n)
    corr = rho ** (2.0 / 3.0)
    return main * (1.0 - C1 * corr), main * (1.0 + C2 * corr), rho <= UPPER_RHO_LIMIT


@dataclass(frozen=True)
class BoundReport:
    E_n: float
    rho: float
    B_m: float
    main_prediction: float
    bound: float
    bound_applicable: bool
    lower: float
    upper: float
    upper_valid: bool


def bound_report(E_n: float, rho: float, B_m: float, C1: float = 1.0, C2: float = 1.0) -> BoundReport:
    bound, applicable = survival_bound(E_n, B_m, rho)
    lower, upper, valid = rate_bounds(E_n, rho, C1, C2)
    return BoundReport(E_n, rho, B_m, main_asymptotic(E_n), bound, applicable, lower, upper, valid)


def regime_ratio(a: float) -> float:
    """Limit of ``P(T_n > n) / E_n`` when the increment bound tends to ``a``: ``Psi(a)/a``."""
    if a < 0:
        raise ValueError("a must be non-negative")
    if a == 0:
        return SQRT_2_OVER_PI
    return Psi(a) / a


def ar_sigma(gamma: float, n: int) -> float:
    """``sqrt((gamma^{-2n} - 1) / (1 - gamma^2))``, stable for gamma near 1."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    log_g = math.log1p(gamma - 1.0)
    num = math.expm1(-2.0 * n * log_g)
    den = -math.expm1(2.0 * log_g)
    return math.sqrt(num / den)


def gaposhkin_sigma(f: Callable[[float], float], n: int, EX2: float) -> tuple[float, float]:
    """``(sigma_n(f), sigma(f))`` for weights ``f(j/n)``.

    ``sigma_n^2 = EX2/n * sum f(j/n)^2`` and its Riemann limit
    ``sigma^2 = EX2 * int_0^1 f^2``.
    """
    if EX2 <= 0:
        raise ValueError("EX2 must be positive")
    vals = np.array([f(j / n) for j in range(1, n + 1)], dtype=float)
    if np.any(vals < 0):
        raise ValueError("f must be non-negative")
    s_n2 = EX2 * math.fsum(vals * vals) / n
    integral, _ = integrate.quad(lambda t: f(t) ** 2, 0.0, 1.0, limit=200)
    if s_n2 <= 0 or integral <= 0:
        raise ValueError("f is degenerate (identically zero)")
    return math.sqrt(s_n2), math.sqrt(EX2 * integral)


def limit_coefficient(kind: str, *, EX2: float = 1.0, f0: float = 1.0, sigma_f: float = 1.0) -> float:
    """Coefficient ``c`` in ``normalizer * P(T > n) -> c * E[-S_tau]``."""
    if kind in ("scaled_iid", "weighted"):
        return SQRT_2_OVER_PI
    if kind == "gaposhkin":
        if f0 == 0:
            raise UninformativeLimit("f(0) = 0: the limit constant is zero")
        return SQRT_2_OVER_PI * f0 / sigma_f
    if kind == "ar1":
        return math.sqrt(2.0 / (math.pi * EX2))
    raise ValueError(f"no limit formula for scenario kind {kind!r}")


def predicted_limit(kind: str, params: dict, overshoot: float) -> float:
    """Right-hand limit constant for a scenario, given the overshoot ``E[-S_tau]``.

    ``params`` may carry ``EX2`` (ar1), ``f0`` and ``sigma_f`` (gaposhkin).
    """
    if overshoot < 0:
        raise ValueError("overshoot must be non-negative")
    return limit_coefficient(kind, **params) * overshoot


def rate_fit(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of ``log(deviation)`` against ``log(rho)``."""
    if len(points) < 3:
        raise ValueError("need at least 3 points")
    exact = [p for p in points if p[1] <= 0]
    if exact:
        raise ValueError(f"nonpositive deviations (exact agreement) at {exact}")
    x = np.log([p[0] for p in points])
    y = np.log([p[1] for p in points])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)
