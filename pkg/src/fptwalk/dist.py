"""Bounded mean-zero increment laws and the standard normal helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

KINDS = ("rademacher", "three_point", "uniform_symmetric", "finite_discrete")

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_MOMENT_TOL = 1e-12


class SpecError(ValueError):
    """Raised for an invalid increment distribution."""


def phi(u: float) -> float:
    """Standard normal density."""
    return _INV_SQRT_2PI * math.exp(-0.5 * u * u)


def normal_cdf(x: float) -> float:
    # erfc keeps full relative accuracy in the lower tail
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def Psi(x: float) -> float:
    """``2 * integral_0^{x+} phi``, i.e. ``P(|eta| <= x)`` for positive ``x``."""
    if x <= 0.0:
        return 0.0
    return math.erf(x / math.sqrt(2.0))


@dataclass(frozen=True)
class IncrementSpec:
    """One bounded, centred increment law.

    Use the named constructors rather than the raw initializer. Discrete laws
    keep their atoms as ``(value, probability)`` pairs with zero-probability
    atoms dropped; ``uniform_symmetric`` carries only its half-width.
    """

    kind: str
    atoms: tuple[tuple[float, float], ...] = ()
    level: float | None = None
    half_width: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SpecError(f"unknown increment kind {self.kind!r}")
        if self.kind == "uniform_symmetric":
            b = self.half_width
            if b is None or not math.isfinite(b) or b <= 0:
                raise SpecError("uniform_symmetric needs a positive finite half-width")
            return
        if not self.atoms:
            raise SpecError(f"{self.kind} needs at least one atom")
        for v, p in self.atoms:
            if not (math.isfinite(v) and math.isfinite(p)) or p <= 0:
                raise SpecError(f"bad atom ({v}, {p})")
        total = math.fsum(p for _, p in self.atoms)
        if abs(total - 1.0) > _MOMENT_TOL:
            raise SpecError(f"atom probabilities sum to {total!r}, not 1")
        mean = math.fsum(v * p for v, p in self.atoms)
        if abs(mean) > _MOMENT_TOL:
            raise SpecError(f"increment mean is {mean!r}; centre the atoms yourself")
        if self.variance <= 0:
            raise SpecError("increment must have positive variance")

    # constructors

    @classmethod
    def rademacher(cls) -> IncrementSpec:
        return cls("rademacher", ((-1.0, 0.5), (1.0, 0.5)))

    @classmethod
    def three_point(cls, level: float) -> IncrementSpec:
        """``+-N`` with probability ``1/(2N^2)`` each, else 0; unit variance."""
        level = float(level)
        if not math.isfinite(level) or level < 1.0:
            raise SpecError(f"three_point level must be >= 1, got {level}")
        p = 1.0 / (2.0 * level * level)
        atoms = [(-level, p), (0.0, 1.0 - 2.0 * p), (level, p)]
        return cls("three_point", tuple((v, q) for v, q in atoms if q > 0), level=level)

    @classmethod
    def uniform_symmetric(cls, half_width: float) -> IncrementSpec:
        return cls("uniform_symmetric", half_width=float(half_width))

    @classmethod
    def finite_discrete(cls, atoms: Sequence[tuple[float, float]]) -> IncrementSpec:
        merged: dict[float, float] = {}
        for v, p in atoms:
            merged[float(v)] = merged.get(float(v), 0.0) + float(p)
        return cls("finite_discrete", tuple(sorted((v, p) for v, p in merged.items() if p > 0)))

    # moments

    @property
    def p(self) -> float:
        if self.kind != "three_point":
            raise AttributeError("p is defined for three_point only")
        return 1.0 / (2.0 * self.level * self.level)

    @property
    def support_bound(self) -> float:
        if self.kind == "uniform_symmetric":
            return self.half_width
        return max(abs(v) for v, _ in self.atoms)

    @property
    def max_value(self) -> float:
        """Largest attainable value (right end of the support)."""
        if self.kind == "uniform_symmetric":
            return self.half_width
        return max(v for v, _ in self.atoms)

    @property
    def mean(self) -> float:
        if self.kind == "uniform_symmetric":
            return 0.0
        return math.fsum(v * p for v, p in self.atoms)

    @property
    def variance(self) -> float:
        if self.kind == "rademacher":
            return 1.0
        if self.kind == "three_point":
            return 1.0  # N^2 * 2p, exactly
        if self.kind == "uniform_symmetric":
            return self.half_width**2 / 3.0
        return math.fsum(v * v * p for v, p in self.atoms)

    @property
    def is_continuous(self) -> bool:
        return self.kind == "uniform_symmetric"

    # sampling

    def cumulative(self) -> tuple[np.ndarray, np.ndarray]:
        """Atom values and right-continuous cumulative probabilities."""
        values = np.array([v for v, _ in self.atoms], dtype=float)
        cum = np.cumsum([p for _, p in self.atoms])
        cum[-1] = 1.0
        return values, cum

    def from_uniform(self, u):
        """Inverse-CDF transform of uniforms in [0, 1)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "uniform_symmetric":
            out = self.half_width * (2.0 * u - 1.0)
        else:
            values, cum = self.cumulative()
            idx = np.searchsorted(cum, u, side="right")
            out = values[np.minimum(idx, len(values) - 1)]
        return out if out.ndim else float(out)

    # serialization

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "rademacher":
            return {"kind": "rademacher"}
        if self.kind == "three_point":
            return {"kind": "three_point", "N": self.level}
        if self.kind == "uniform_symmetric":
            return {"kind": "uniform_symmetric", "b": self.half_width}
        return {"kind": "finite_discrete", "atoms": [[v, p] for v, p in self.atoms]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> IncrementSpec:
        d = dict(d)
        kind = d.pop("kind", None)
        allowed = {"rademacher": set(), "three_point": {"N"},
                   "uniform_symmetric": {"b"}, "finite_discrete": {"atoms"}}
        if kind not in allowed:
            raise SpecError(f"unknown increment kind {kind!r}")
        if set(d) != allowed[kind]:
            raise SpecError(f"{kind} expects keys {sorted(allowed[kind])}, got {sorted(d)}")
        if kind == "rademacher":
            return cls.rademacher()
        if kind == "three_point":
            return cls.three_point(d["N"])
        if kind == "uniform_symmetric":
            return cls.uniform_symmetric(d["b"])
        return cls.finite_discrete([tuple(a) for a in d["atoms"]])


def sample(spec: IncrementSpec, stream) -> float:
    """Draw one increment from ``spec`` using the next uniform of ``stream``."""
    return spec.from_uniform(stream.next_uniform())
