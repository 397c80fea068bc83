"""Exit probabilities of triangular-array random walks above moving boundaries."""

from __future__ import annotations

from .dist import IncrementSpec, Psi, SpecError, normal_cdf, phi
from .exact import LatticeRequired, ResourceGuardError, exit_exact
from .mc import estimate_overshoot, simulate_exit
from .model import BoundarySpec, ModelError, RowModel, diagnostics
from .results import EstimatorResult, ExitResult
from .scenarios import Scenario, ScenarioConfig, ScenarioError, build
from .theory import bound_report, main_asymptotic, rate_bounds, regime_ratio, survival_bound

__version__ = "0.1.0"

__all__ = [
    "BoundarySpec", "EstimatorResult", "ExitResult", "IncrementSpec", "LatticeRequired",
    "ModelError", "Psi", "ResourceGuardError", "RowModel", "Scenario", "ScenarioConfig",
    "ScenarioError", "SpecError", "bound_report", "build", "diagnostics", "estimate_overshoot",
    "exit_exact", "main_asymptotic", "normal_cdf", "phi", "rate_bounds", "regime_ratio",
    "simulate_exit", "survival_bound",
]
