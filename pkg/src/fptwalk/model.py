"""One row of a triangular array: increments, boundary and diagnostics.

A row is stored in *walk units*: step ``k`` adds ``weights[k] * X_k`` where
``X_k ~ increments[k]``, and survival at step ``k`` means the walk-unit sum
stays strictly above ``boundary[k]``. The normalized array entries are
``X_{k,n} = scale * weights[k] * X_k`` and ``g_{k,n} = scale * boundary[k]``,
with ``scale`` chosen so the variances sum to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, Sequence

import numpy as np

from .dist import IncrementSpec

VARIANCE_TOL = 1e-9
MAX_DENOMINATOR = 10**6


class ModelError(ValueError):
    """Raised for a row that violates the model assumptions."""


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary description.

    ``zero``: g identically 0. ``constant_scaled``: walk-unit level ``value``,
    i.e. ``g_{k,n} = value / B_n``. ``explicit_array``: ``values`` of length n,
    in scaled units unless ``units == "walk"``.
    """

    kind: str = "zero"
    value: float = 0.0
    values: tuple[float, ...] = ()
    units: str = "scaled"

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "constant_scaled", "explicit_array"):
            raise ModelError(f"unknown boundary kind {self.kind!r}")
        if self.units not in ("scaled", "walk"):
            raise ModelError(f"unknown boundary units {self.units!r}")
        if not math.isfinite(self.value) or not all(math.isfinite(v) for v in self.values):
            raise ModelError("boundary values must be finite")

    def walk_values(self, n: int, scale: float) -> tuple[float, ...]:
        if self.kind == "zero":
            return (0.0,) * n
        if self.kind == "constant_scaled":
            return (float(self.value),) * n
        if len(self.values) != n:
            raise ModelError(f"explicit boundary has {len(self.values)} values, row has {n}")
        if self.units == "walk":
            return tuple(float(v) for v in self.values)
        return tuple(float(v) / scale for v in self.values)

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "zero":
            return {"kind": "zero"}
        if self.kind == "constant_scaled":
            return {"kind": "constant_scaled", "g": self.value}
        return {"kind": "explicit_array", "values": list(self.values), "units": self.units}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> BoundarySpec:
        d = dict(d)
        kind = d.pop("kind", None)
        allowed = {"zero": set(), "constant_scaled": {"g"}, "explicit_array": {"values", "units"}}
        if kind not in allowed:
            raise ModelError(f"unknown boundary kind {kind!r}")
        if not set(d) <= allowed[kind]:
            raise ModelError(f"unexpected boundary keys {sorted(set(d) - allowed[kind])}")
        if kind == "zero":
            return cls()
        if kind == "constant_scaled":
            return cls("constant_scaled", value=float(d["g"]))
        if "values" not in d:
            raise ModelError("explicit_array boundary needs 'values'")
        return cls("explicit_array", values=tuple(float(v) for v in d["values"]),
                   units=d.get("units", "scaled"))


@dataclass(frozen=True)
class ScalingReport:
    B_n: float
    variances: tuple[float, ...]
    boundary: tuple[float, ...]


def normalize_sequence(raw_variances: Sequence[float], raw_boundary: Sequence[float]) -> ScalingReport:
    """Rescale a single sequence into a row with unit total variance."""
    if any(v < 0 for v in raw_variances):
        raise ModelError("variances must be non-negative")
    total = math.fsum(raw_variances)
    if total <= 0:
        raise ModelError("total variance is zero")
    B_n = math.sqrt(total)
    return ScalingReport(
        B_n=B_n,
        variances=tuple(v / total for v in raw_variances),
        boundary=tuple(g / B_n for g in raw_boundary),
    )


@dataclass(frozen=True)
class LatticeInfo:
    """Integer representation of a lattice row.

    ``walk_step`` is the common step in walk units and ``step`` the same step
    in scaled units. ``shifts[k]`` / ``probs[k]`` are the integer atoms of the
    k-th increment (weight included); survival at step k means the integer
    state exceeds ``thresholds[k] = floor(boundary[k] / walk_step)``.
    """

    walk_step: Fraction
    step: float
    shifts: tuple[tuple[int, ...], ...]
    probs: tuple[tuple[float, ...], ...]
    thresholds: tuple[int, ...]


@dataclass(frozen=True)
class ArrayDiagnostics:
    r_n: float
    g_n_star: float
    rho: float
    B: np.ndarray
    B_tail: np.ndarray

    def B_at(self, m: int) -> float:
        """``B_m`` for 1 <= m <= n."""
        return float(self.B[m - 1])


@dataclass(frozen=True, eq=True)
class RowModel:
    increments: tuple[IncrementSpec, ...]
    weights: tuple[float, ...]
    scale: float
    boundary: tuple[float, ...]
    allow_degenerate: bool = False

    def __post_init__(self) -> None:
        n = len(self.increments)
        if n < 1:
            raise ModelError("row must have at least one increment")
        if len(self.weights) != n or len(self.boundary) != n:
            raise ModelError("increments, weights and boundary must have equal length")
        if not all(math.isfinite(w) and w >= 0 for w in self.weights):
            raise ModelError("weights must be finite and non-negative")
        if not all(math.isfinite(g) for g in self.boundary):
            raise ModelError("boundary values must be finite")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ModelError("scale must be positive")
        total = math.fsum(self.variances)
        if abs(total - 1.0) > VARIANCE_TOL:
            raise ModelError(f"row variances sum to {total!r}, expected 1")
        if not self.allow_degenerate and not survival_possible(self):
            raise ModelError("no path stays above the boundary: P(T_n > n) = 0")

    @classmethod
    def normalized(
        cls,
        increments: Sequence[IncrementSpec],
        weights: Sequence[float] | None = None,
        boundary: BoundarySpec | None = None,
        allow_degenerate: bool = False,
    ) -> RowModel:
        """Build a row, choosing ``scale`` so the total variance is one."""
        increments = tuple(increments)
        n = len(increments)
        weights = (1.0,) * n if weights is None else tuple(float(w) for w in weights)
        total = math.fsum(w * w * s.variance for w, s in zip(weights, increments))
        if total <= 0:
            raise ModelError("total variance is zero")
        scale = 1.0 / math.sqrt(total)
        boundary = boundary or BoundarySpec()
        return cls(increments, weights, scale, boundary.walk_values(n, scale), allow_degenerate)

    @classmethod
    def iid(cls, spec: IncrementSpec, n: int, boundary: BoundarySpec | None = None,
            allow_degenerate: bool = False) -> RowModel:
        return cls.normalized((spec,) * n, boundary=boundary, allow_degenerate=allow_degenerate)

    @property
    def n(self) -> int:
        return len(self.increments)

    @property
    def variances(self) -> tuple[float, ...]:
        s2 = self.scale * self.scale
        return tuple(s2 * w * w * spec.variance for w, spec in zip(self.weights, self.increments))

    @property
    def g(self) -> np.ndarray:
        """Boundary in scaled units, ``g_{k,n}``."""
        return self.scale * np.asarray(self.boundary, dtype=float)

    @cached_property
    def lattice_info(self) -> LatticeInfo | None:
        return detect_lattice(self)

    def to_dict(self) -> dict[str, Any]:
        return {
            "increments": [s.to_dict() for s in self.increments],
            "weights": list(self.weights),
            "scale": self.scale,
            "boundary": list(self.boundary),
            "allow_degenerate": self.allow_degenerate,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RowModel:
        extra = set(d) - {"increments", "weights", "scale", "boundary", "allow_degenerate"}
        if extra:
            raise ModelError(f"unknown row keys {sorted(extra)}")
        return cls(
            tuple(IncrementSpec.from_dict(s) for s in d["increments"]),
            tuple(float(w) for w in d["weights"]),
            float(d["scale"]),
            tuple(float(g) for g in d["boundary"]),
            bool(d.get("allow_degenerate", False)),
        )


def diagnostics(model: RowModel) -> ArrayDiagnostics:
    r_n = max(model.scale * w * s.support_bound for w, s in zip(model.weights, model.increments))
    g_star = float(np.max(np.abs(model.g)))
    cum = np.cumsum(model.variances)
    # pin the last entry: B_n is 1 by construction
    cum = np.minimum(cum / cum[-1], 1.0)
    B = np.sqrt(cum)
    B_tail = np.sqrt(np.maximum(1.0 - cum, 0.0))
    return ArrayDiagnostics(r_n=r_n, g_n_star=g_star, rho=r_n + g_star, B=B, B_tail=B_tail)


def _rational(x: float) -> Fraction | None:
    q = Fraction(x).limit_denominator(MAX_DENOMINATOR)
    return q if float(q) == x else None


def _lattice_gcd(values: Sequence[Fraction]) -> Fraction:
    den = 1
    for q in values:
        den = den * q.denominator // math.gcd(den, q.denominator)
    num = 0
    for q in values:
        num = math.gcd(num, abs(q.numerator * (den // q.denominator)))
    return Fraction(num, den)


def detect_lattice(model: RowModel) -> LatticeInfo | None:
    """Common lattice of all atoms, or None if any increment is off-lattice."""
    return lattice_from_steps(model.increments, model.weights, model.boundary, model.scale)


def lattice_from_steps(
    increments: Sequence[IncrementSpec],
    weights: Sequence[float],
    boundary: Sequence[float],
    scale: float = 1.0,
) -> LatticeInfo | None:
    if any(s.is_continuous for s in increments):
        return None
    cache: dict[tuple[float, IncrementSpec], tuple[tuple[Fraction, ...], tuple[float, ...]]] = {}
    per_step = []
    for w, spec in zip(weights, increments):
        key = (w, spec)
        if key not in cache:
            vals = []
            for v, _ in spec.atoms:
                q = _rational(w * v)
                if q is None:
                    return None
                vals.append(q)
            cache[key] = (tuple(vals), tuple(p for _, p in spec.atoms))
        per_step.append(cache[key])
    bcache: dict[float, Fraction | None] = {}
    for g in boundary:
        if g not in bcache:
            bcache[g] = _rational(g)
            if bcache[g] is None:
                return None
    nonzero = {q for vals, _ in cache.values() for q in vals if q != 0}
    if not nonzero:
        return None
    h = _lattice_gcd(sorted(nonzero))
    int_cache: dict[tuple[Fraction, ...], tuple[int, ...]] = {}
    for vals, _ in cache.values():
        if vals not in int_cache:
            ints = []
            for q in vals:
                z = q / h
                if z.denominator != 1:
                    return None
                ints.append(int(z))
            int_cache[vals] = tuple(ints)
    floors = {g: math.floor(q / h) for g, q in bcache.items()}
    return LatticeInfo(
        walk_step=h,
        step=scale * float(h),
        shifts=tuple(int_cache[vals] for vals, _ in per_step),
        probs=tuple(p for _, p in per_step),
        thresholds=tuple(floors[g] for g in boundary),
    )


def survival_possible(model: RowModel) -> bool:
    """True iff some path stays strictly above the boundary up to step n.

    The path taking the largest atom at every step dominates all others, so
    it suffices to check that one.
    """
    info = model.lattice_info
    if info is not None:
        top = 0
        for shifts, thr in zip(info.shifts, info.thresholds):
            top += max(shifts)
            if top <= thr:
                return False
        return True
    top = 0.0
    for w, spec, g in zip(model.weights, model.increments, model.boundary):
        top += w * spec.max_value
        if top <= g:
            return False
    return True
