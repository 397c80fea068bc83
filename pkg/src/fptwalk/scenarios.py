"""Named row generators for the worked examples, with attached predictions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .dist import SQRT_2_OVER_PI, IncrementSpec, SpecError
from .exact import DEFAULT_GUARD, cell_updates
from .model import BoundarySpec, ModelError, RowModel
from .theory import ar_sigma, gaposhkin_sigma, limit_coefficient, regime_ratio

SCENARIO_KINDS = ("scaled_iid", "lind", "lind2", "gaposhkin", "ar1")

_PARAM_KEYS = {
    "scaled_iid": {"increment", "boundary"},
    "lind": {"N", "M", "base", "require_identity"},
    "lind2": {"N"},
    "gaposhkin": {"f", "increment"},
    "ar1": {"c", "innovation"},
}


class ScenarioError(ValueError):
    """Invalid scenario configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    n: int
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    name: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in SCENARIO_KINDS:
            raise ScenarioError(f"unknown scenario kind {self.kind!r}")
        if not isinstance(self.n, int) or self.n < 1:
            raise ScenarioError("n must be a positive integer")
        extra = set(self.params) - _PARAM_KEYS[self.kind]
        if extra:
            raise ScenarioError(f"{self.kind} does not accept {sorted(extra)}")

    @property
    def label(self) -> str:
        return self.name or self.kind

    def with_n(self, n: int) -> ScenarioConfig:
        return ScenarioConfig(self.kind, n, self.params, self.seed, self.name)

    def to_dict(self) -> dict[str, Any]:
        d = {"kind": self.kind, "n": self.n, "params": self.params, "seed": self.seed}
        if self.name:
            d["name"] = self.name
        return d


@dataclass(frozen=True)
class ScenarioMeta:
    """What the theory predicts for a built row.

    ``predicted_ratio`` is the limit of ``P(T_n > n) / E_n``. The weighted-walk
    limit reads ``normalizer * P(T_n > n) -> coefficient * E[-S_tau]``; it is
    only ``limit_supported`` for continuous increments with ``f(0) > 0``.
    """

    exact_solvable: bool
    predicted_ratio: float | None = None
    predicted_P: float | None = None
    predicted_E: float | None = None
    limit_normalizer: float | None = None
    limit_coefficient: float | None = None
    limit_supported: bool = False
    overshoot_increment: IncrementSpec | None = None
    details: dict[str, float] = field(default_factory=dict)

    def predicted_limit_P(self, overshoot: float) -> float | None:
        """Predicted ``P(T_n > n)`` from an overshoot estimate, if supported."""
        if not self.limit_supported:
            return None
        return self.limit_coefficient * overshoot / self.limit_normalizer


@dataclass(frozen=True)
class Scenario:
    config: ScenarioConfig
    model: RowModel
    meta: ScenarioMeta


def level_schedule(spec: Any, n: int) -> float:
    """Resolve an ``N_n`` schedule: a number, ``{"fixed": v}``,
    ``{"sqrt": a}`` (``max(1, round(a sqrt n))``) or ``{"linear": M, "offset": d}``."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return float(spec)
    if not isinstance(spec, dict) or len(set(spec) - {"offset"}) != 1:
        raise ScenarioError(f"bad N schedule {spec!r}")
    if "fixed" in spec:
        return float(spec["fixed"])
    if "sqrt" in spec:
        return float(max(1, round(spec["sqrt"] * math.sqrt(n))))
    if "linear" in spec:
        return float(spec["linear"] * n + spec.get("offset", 0))
    raise ScenarioError(f"bad N schedule {spec!r}")


def weight_function(spec: dict[str, Any]) -> tuple[Callable[[float], float], float]:
    """Weight function and its exact value at 0."""
    kind = spec.get("kind")
    if kind == "constant":
        c = float(spec.get("c", 1.0))
        return (lambda t: c), c
    if kind == "power":
        alpha = float(spec["alpha"])
        return (lambda t: t**alpha), (1.0 if alpha == 0 else 0.0)
    if kind == "affine":
        a, b = float(spec["a"]), float(spec["b"])
        return (lambda t: a + b * t), a
    if kind == "grid":
        values = np.asarray(spec["values"], dtype=float)
        grid = np.linspace(0.0, 1.0, len(values))
        return (lambda t: float(np.interp(t, grid, values))), float(values[0])
    raise ScenarioError(f"unknown weight function {spec!r}")


def _increment(d: dict | None, default: IncrementSpec) -> IncrementSpec:
    try:
        return default if d is None else IncrementSpec.from_dict(d)
    except SpecError as exc:
        raise ScenarioError(str(exc)) from exc


def _solvable(model: RowModel) -> bool:
    info = model.lattice_info
    return info is not None and cell_updates(info.shifts) <= DEFAULT_GUARD


def ar1_gamma(config: ScenarioConfig) -> float:
    c = float(config.params.get("c", 1.0))
    gamma = 1.0 - c / config.n
    if not 0.0 < gamma < 1.0:
        raise ScenarioError(f"gamma = 1 - c/n = {gamma} must lie in (0, 1)")
    return gamma


def ar1_transform(config: ScenarioConfig) -> RowModel:
    """Weighted-walk row for the AR(1) exit problem.

    ``U_k > 0`` for all k <= n iff ``sum_{j<=k} gamma^{-j} X_j > 0`` for all k,
    so the row uses weights ``gamma^{-k}`` and a zero boundary.
    """
    if config.kind != "ar1":
        raise ScenarioError("ar1_transform needs an ar1 config")
    gamma = ar1_gamma(config)
    spec = _increment(config.params.get("innovation"), IncrementSpec.uniform_symmetric(math.sqrt(3.0)))
    log_g = math.log1p(gamma - 1.0)
    weights = [math.exp(-k * log_g) for k in range(1, config.n + 1)]
    return RowModel.normalized((spec,) * config.n, weights=weights)


def build(config: ScenarioConfig) -> Scenario:
    try:
        return _BUILDERS[config.kind](config)
    except (ModelError, SpecError) as exc:
        raise ScenarioError(f"{config.label}: {exc}") from exc


def _build_scaled_iid(config: ScenarioConfig) -> Scenario:
    p = config.params
    spec = _increment(p.get("increment"), IncrementSpec.rademacher())
    boundary = BoundarySpec.from_dict(p.get("boundary", {"kind": "zero"}))
    model = RowModel.iid(spec, config.n, boundary)
    meta = ScenarioMeta(
        exact_solvable=_solvable(model),
        predicted_ratio=SQRT_2_OVER_PI,
        limit_normalizer=math.sqrt(config.n * spec.variance),
        limit_coefficient=limit_coefficient("scaled_iid"),
        limit_supported=spec.is_continuous,
        overshoot_increment=spec,
    )
    return Scenario(config, model, meta)


def _build_lind(config: ScenarioConfig) -> Scenario:
    p, n = config.params, config.n
    if n < 2:
        raise ScenarioError("lind needs n >= 2")
    base = _increment(p.get("base"), IncrementSpec.rademacher())
    if abs(base.variance - 1.0) > 1e-12:
        raise ScenarioError("lind base increments must have unit variance")
    M = float(p.get("M", base.support_bound))
    if base.support_bound > M:
        raise ScenarioError(f"base support {base.support_bound} exceeds M = {M}")
    N = level_schedule(p.get("N", {"linear": M, "offset": 1}), n)
    above = N > (n - 1) * M
    if p.get("require_identity", True) and not above:
        raise ScenarioError(f"N_n = {N} <= (n-1)M = {(n - 1) * M}: exit identity not guaranteed")
    first = IncrementSpec.three_point(N)
    model = RowModel.normalized((first,) + (base,) * (n - 1))
    pn = first.p
    meta = ScenarioMeta(
        exact_solvable=_solvable(model),
        predicted_ratio=math.sqrt(n) / N if above else None,
        predicted_P=pn if above else None,
        predicted_E=pn * N / math.sqrt(n) if above else None,
        details={"N_n": N, "p_n": pn, "M": M, "r_n": N / math.sqrt(n)},
    )
    return Scenario(config, model, meta)


def _build_lind2(config: ScenarioConfig) -> Scenario:
    n = config.n
    if n < 2:
        raise ScenarioError("lind2 needs n >= 2")
    N = level_schedule(config.params.get("N", {"sqrt": 1.0}), n)
    if N != int(N):
        raise ScenarioError(f"lind2 needs a natural N_n, got {N}")
    first = IncrementSpec.three_point(N)
    model = RowModel.normalized((first,) + (IncrementSpec.rademacher(),) * (n - 1))
    r_n = N / math.sqrt(n)
    meta = ScenarioMeta(
        exact_solvable=_solvable(model),
        predicted_ratio=regime_ratio(r_n),
        predicted_E=first.p * r_n,
        details={"N_n": N, "p_n": first.p, "r_n": r_n},
    )
    return Scenario(config, model, meta)


def _build_gaposhkin(config: ScenarioConfig) -> Scenario:
    p, n = config.params, config.n
    spec = _increment(p.get("increment"), IncrementSpec.uniform_symmetric(math.sqrt(3.0)))
    f, f0 = weight_function(p.get("f", {"kind": "constant", "c": 1.0}))
    weights = [float(f(j / n)) for j in range(1, n + 1)]
    if any(w < 0 for w in weights):
        raise ScenarioError("weight function must be non-negative")
    model = RowModel.normalized((spec,) * n, weights=weights)
    sigma_n, sigma_f = gaposhkin_sigma(f, n, spec.variance)
    supported = spec.is_continuous and f0 > 0
    meta = ScenarioMeta(
        exact_solvable=_solvable(model),
        predicted_ratio=SQRT_2_OVER_PI,
        limit_normalizer=math.sqrt(n),
        limit_coefficient=limit_coefficient("gaposhkin", f0=f0, sigma_f=sigma_f) if f0 > 0 else 0.0,
        limit_supported=supported,
        overshoot_increment=spec,
        details={"f0": f0, "sigma_n": sigma_n, "sigma_f": sigma_f},
    )
    return Scenario(config, model, meta)


def _build_ar1(config: ScenarioConfig) -> Scenario:
    gamma = ar1_gamma(config)
    spec = _increment(config.params.get("innovation"), IncrementSpec.uniform_symmetric(math.sqrt(3.0)))
    model = ar1_transform(config)
    meta = ScenarioMeta(
        exact_solvable=_solvable(model),
        predicted_ratio=SQRT_2_OVER_PI,
        limit_normalizer=ar_sigma(gamma, config.n),
        limit_coefficient=limit_coefficient("ar1", EX2=spec.variance),
        limit_supported=spec.is_continuous,
        overshoot_increment=spec,
        details={"gamma": gamma},
    )
    return Scenario(config, model, meta)


_BUILDERS = {
    "scaled_iid": _build_scaled_iid,
    "lind": _build_lind,
    "lind2": _build_lind2,
    "gaposhkin": _build_gaposhkin,
    "ar1": _build_ar1,
}


# ---------------------------------------------------------------- random rows

def _random_discrete(rng: np.random.Generator, max_atom: int) -> IncrementSpec:
    kind = rng.integers(3)
    if kind == 0:
        return IncrementSpec.rademacher()
    if kind == 1:
        return IncrementSpec.three_point(int(rng.integers(1, max_atom + 1)))
    # mixture of centred two-point laws {a w.p. b/(a+b), -b w.p. a/(a+b)} and an atom at 0
    atoms: list[tuple[float, float]] = []
    pairs = int(rng.integers(1, 3))
    mix = rng.dirichlet(np.ones(pairs + 1))
    for i in range(pairs):
        a, b = (int(v) for v in rng.integers(1, max_atom + 1, size=2))
        atoms += [(a, mix[i] * b / (a + b)), (-b, mix[i] * a / (a + b))]
    atoms.append((0, mix[-1]))
    total = math.fsum(p for _, p in atoms)
    return IncrementSpec.finite_discrete([(v, p / total) for v, p in atoms])


def random_lattice_model(
    rng: np.random.Generator,
    n_range: tuple[int, int] = (2, 200),
    max_atom: int = 3,
    boundary_range: tuple[int, int] = (-2, 1),
    weights: tuple[int, ...] = (1, 2),
) -> RowModel:
    """A random lattice row with heterogeneous integer-atom increments and an
    integer walk-unit boundary. Rows with ``P(T_n > n) = 0`` are redrawn."""
    while True:
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        pool = [(_random_discrete(rng, max_atom), float(rng.choice(weights))) for _ in range(3)]
        picks = rng.integers(len(pool), size=n)
        incs = [pool[i][0] for i in picks]
        ws = [pool[i][1] for i in picks]
        bound = rng.integers(boundary_range[0], boundary_range[1] + 1, size=n)
        try:
            return RowModel.normalized(
                incs, weights=ws,
                boundary=BoundarySpec("explicit_array", values=tuple(float(b) for b in bound), units="walk"),
            )
        except ModelError:
            continue


def random_lattice_models(count: int, seed: int, **kwargs) -> list[RowModel]:
    rng = np.random.default_rng(seed)
    return [random_lattice_model(rng, **kwargs) for _ in range(count)]
