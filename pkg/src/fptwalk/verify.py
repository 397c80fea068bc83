"""Invariant suites run by ``fptwalk verify``.

Engines are injectable so a deliberately broken double can be checked to
fail the suites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exact import LatticeDP, exit_exact, martingale_table, reflection_table
from .model import RowModel, diagnostics
from .scenarios import random_lattice_models
from .theory import survival_bound

SUITES = ("reflection", "martingale", "optional_stopping", "i33", "mass_conservation")

RANDOM_SEED = 20240601
RANDOM_COUNT = 100
EXTENDED_SEED = 20240602
EXTENDED_COUNT = 20
EXTENDED_KW = dict(n_range=(2500, 4000), max_atom=1, boundary_range=(-1, 1), weights=(1,))


@dataclass
class SuiteResult:
    name: str
    checks: int = 0
    failures: int = 0
    worst: float = 0.0
    notes: dict[str, int] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.checks > 0

    def record(self, deviation: float, tol: float) -> None:
        self.checks += 1
        self.worst = max(self.worst, deviation)
        if not deviation <= tol:
            self.failures += 1

    def line(self) -> str:
        extra = "".join(f" {k}={v}" for k, v in self.notes.items())
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.checks} checks, {self.failures} failures, worst {self.worst:.3g}{extra}"


def random_models() -> list[RowModel]:
    return random_lattice_models(RANDOM_COUNT, RANDOM_SEED)


def extended_models() -> list[RowModel]:
    """Long rows with small increments, where ``B_m >= 24 rho`` is attainable."""
    return random_lattice_models(EXTENDED_COUNT, EXTENDED_SEED, **EXTENDED_KW)


def reflection_suite(table: Callable = reflection_table, N_max: int = 20, m_max: int = 200,
                     tol: float = 1e-12) -> SuiteResult:
    res = SuiteResult("reflection")
    for N in range(1, N_max + 1):
        lhs, rhs = table(N, m_max)
        for d in np.abs(np.asarray(lhs) - np.asarray(rhs)):
            res.record(float(d), tol)
    return res


def martingale_suite(table: Callable = martingale_table, N_max: int = 10, m_max: int = 100,
                     tol: float = 1e-12) -> SuiteResult:
    res = SuiteResult("martingale")
    for N in range(1, N_max + 1):
        for v in table(N, m_max):
            res.record(abs(float(v) - N), tol)
    return res


def optional_stopping_suite(engine: Callable = exit_exact, models=None, tol: float = 1e-10) -> SuiteResult:
    res = SuiteResult("optional_stopping")
    for model in models if models is not None else random_models():
        r = engine(model)
        res.record(abs(r.E_n - r.E_n_alt), tol)
    return res


def i33_suite(engine: Callable = exit_exact, models=None, extended=None, slack: float = 1e-12) -> SuiteResult:
    """Check ``P(T > m) <= 4 E_n / B_m`` at every checkpoint where it applies.

    Short rows (n <= 200) have ``rho >= n^{-1/2} > 1/24``, so no checkpoint
    qualifies there; the long ``extended`` rows are where the bound is tested.
    """
    res = SuiteResult("i33")
    groups = {
        "base": list(models if models is not None else random_models()),
        "extended": list(extended if extended is not None else extended_models()),
    }
    for label, rows in groups.items():
        applicable = 0
        for model in rows:
            r = engine(model)
            d = diagnostics(model)
            for m in range(1, model.n + 1):
                bound, ok = survival_bound(r.E_n, d.B_at(m), d.rho)
                if ok:
                    applicable += 1
                    res.record(max(r.P(m) - bound, 0.0), slack)
        res.notes[f"{label}_rows"] = len(rows)
        res.notes[f"{label}_applicable"] = applicable
    return res


def mass_conservation_suite(models=None, tol: float = 1e-12) -> SuiteResult:
    res = SuiteResult("mass_conservation")
    for model in models if models is not None else random_models():
        info = model.lattice_info
        totals = []

        def obs(k, states, f, u):
            totals.append(math.fsum(u))

        dp = LatticeDP.from_lattice(info, track_unrestricted=True).run(obs)
        absorbed = np.cumsum(dp.crossed)
        for k in range(model.n):
            res.record(abs(totals[k] - 1.0), tol)
            res.record(abs(dp.survival[k] + absorbed[k] - 1.0), tol)
        # P(T > k) nonincreasing, up to rounding
        res.record(float(max(np.diff(dp.survival).max(initial=0.0), 0.0)), 1e-14)
    return res


def run_suites(names=None, **engines) -> list[SuiteResult]:
    """Run the named suites (all by default). ``engines`` may override
    ``engine``, ``reflection`` or ``martingale`` with test doubles."""
    names = list(names or SUITES)
    unknown = set(names) - set(SUITES)
    if unknown:
        raise ValueError(f"unknown suites {sorted(unknown)}")
    engine = engines.get("engine", exit_exact)
    shared = random_models() if {"optional_stopping", "i33", "mass_conservation"} & set(names) else None
    out = []
    for name in names:
        if name == "reflection":
            out.append(reflection_suite(engines.get("reflection", reflection_table)))
        elif name == "martingale":
            out.append(martingale_suite(engines.get("martingale", martingale_table)))
        elif name == "optional_stopping":
            out.append(optional_stopping_suite(engine, shared))
        elif name == "i33":
            out.append(i33_suite(engine, shared))
        else:
            out.append(mass_conservation_suite(shared))
    return out
