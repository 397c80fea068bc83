"""Result records shared by the exact and Monte Carlo engines."""

from __future__ import annotations

from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Any

import numpy as np

from .dist import SQRT_2_OVER_PI


def z_value(level: float) -> float:
    return NormalDist().inv_cdf(0.5 + level / 2.0)


@dataclass(frozen=True)
class EstimatorResult:
    """Point estimate with its standard error (``sample std / sqrt(paths)``)."""

    estimate: float
    se: float
    paths: int
    level: float = 0.99
    cov: np.ndarray | None = None

    @property
    def half_width(self) -> float:
        return z_value(self.level) * self.se

    @property
    def ci(self) -> tuple[float, float]:
        h = self.half_width
        return self.estimate - h, self.estimate + h

    def covers(self, value: float) -> bool:
        lo, hi = self.ci
        return lo <= value <= hi


@dataclass
class ExitResult:
    """Survival curve ``P(T_n > m)`` for m = 1..n and the boundary functional E_n.

    ``E_n_alt`` is the optional-stopping form ``E[-S_T; T <= n] - g_n P(T > n)``.
    Monte Carlo results also carry standard errors and the path count.
    """

    n: int
    survival: np.ndarray
    E_n: float
    E_n_alt: float | None = None
    engine: str = "exact"
    survival_se: np.ndarray | None = None
    E_n_se: float | None = None
    paths: int | None = None
    ratio: EstimatorResult | None = None
    extras: dict[str, Any] = field(default_factory=dict)

    def P(self, m: int | None = None) -> float:
        m = self.n if m is None else m
        if m == 0:
            return 1.0
        return float(self.survival[m - 1])

    def P_se(self, m: int | None = None) -> float | None:
        if self.survival_se is None:
            return None
        m = self.n if m is None else m
        return float(self.survival_se[m - 1])

    @property
    def main_prediction(self) -> float:
        return SQRT_2_OVER_PI * self.E_n

    @property
    def ratio_value(self) -> float:
        """``P(T_n > n) / (sqrt(2/pi) E_n)``."""
        if self.ratio is not None:
            return self.ratio.estimate
        return self.P() / self.main_prediction if self.E_n > 0 else float("nan")
