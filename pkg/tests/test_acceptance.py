"""Acceptance criteria 1-11, one PASS/FAIL line each.

Lines are collected in ``REPORT`` and printed in the pytest terminal
summary; run this file directly to get only the acceptance run.
"""

from __future__ import annotations

import math
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

from fptwalk.dist import SQRT_2_OVER_PI, IncrementSpec, Psi, normal_cdf
from fptwalk.exact import exit_exact, martingale_table, reflection_table
from fptwalk.mc import estimate_overshoot, simulate_exit
from fptwalk.model import RowModel
from fptwalk.results import EstimatorResult
from fptwalk.scenarios import ScenarioConfig, build, random_lattice_models
from fptwalk.theory import rate_fit, regime_ratio
from fptwalk.verify import extended_models, i33_suite, optional_stopping_suite, random_models

import oracles

REPORT: list[str] = []

RAD = IncrementSpec.rademacher()
UNIF = IncrementSpec.uniform_symmetric(math.sqrt(3))
UNIF_D = UNIF.to_dict()
MC_PATHS = 10**6
SEED = 1


class Clock:
    def __init__(self):
        self.start = time.perf_counter()

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.start


@contextmanager
def timed():
    yield Clock()


def record(num: int, title: str, ok: bool, detail: str, clock: Clock, limit_s: float) -> None:
    elapsed = clock.elapsed
    ok = ok and elapsed < limit_s
    REPORT.append(f"{'PASS' if ok else 'FAIL'} [{num:2d}] {title}: {detail} ({elapsed:.1f} s, limit {limit_s:g} s)")
    assert ok, REPORT[-1]


def combined_z(a: float, sa: float, b: float, sb: float) -> float:
    return abs(a - b) / math.hypot(sa, sb)


# ---------------------------------------------------------------- 1

def test_c01_ssrw_main_asymptotic():
    with timed() as clock:
        worst_E = 0.0
        worst_excess = -math.inf
        worst_oracle = 0.0
        points = []
        for n in (100, 400, 1600, 6400):
            r = exit_exact(RowModel.iid(RAD, n))
            worst_E = max(worst_E, abs(r.E_n * math.sqrt(n) - 0.5))
            dev = abs(r.ratio_value - 1.0)
            worst_excess = max(worst_excess, dev - (1 / (4 * n) + 1e-6))
            worst_oracle = max(worst_oracle, abs(r.P() / oracles.SSRW_SURVIVAL[n] - 1))
            points.append((1 / math.sqrt(n), dev))
        slope = rate_fit(points)
    ok = worst_E <= 1e-10 and worst_excess <= 0 and worst_oracle <= 1e-12 and slope > 0
    record(1, "SSRW main asymptotic", ok,
           f"max|E[S;T>n]-1/2|={worst_E:.2e}, max(|ratio-1|-1/(4n)-1e-6)={worst_excess:.2e}, "
           f"closed-form rel err={worst_oracle:.1e}, rate exponent={slope:.3f}", clock, 60)


# ---------------------------------------------------------------- 2

def test_c02_reflection_identity():
    with timed() as clock:
        worst = max(float(np.max(np.abs(np.subtract(*reflection_table(N, 200))))) for N in range(1, 21))
    record(2, "reflection identity", worst <= 1e-12, f"4000 pairs, max diff {worst:.2e}", clock, 10)


# ---------------------------------------------------------------- 3

def test_c03_martingale_identity():
    with timed() as clock:
        worst = max(float(np.max(np.abs(martingale_table(N, 100) - N))) for N in range(1, 11))
    record(3, "martingale identity", worst <= 1e-12, f"1000 pairs, max |value - N| {worst:.2e}", clock, 5)


# ---------------------------------------------------------------- 4

def test_c04_lind_closed_forms():
    with timed() as clock:
        errs, ratios = [], []
        for n in (10, 50, 100):
            sc = build(ScenarioConfig("lind", n, {"M": 1, "N": {"linear": 1, "offset": 1}}))
            N = sc.meta.details["N_n"]
            p = 1 / (2 * N * N)
            r = exit_exact(sc.model)
            errs += [abs(r.P() - p), abs(r.E_n - p * N / math.sqrt(n))]
            ratios.append((r.P() / r.E_n, math.sqrt(n) / N))
    ok = max(errs) <= 1e-12 and all(abs(a - b) <= 1e-9 and a < 1 for a, b in ratios)
    record(4, "Lind closed forms", ok,
           f"max err {max(errs):.1e}, P/E_n = {', '.join(f'{a:.4f}' for a, _ in ratios)}", clock, 30)


# ---------------------------------------------------------------- 5

def test_c05_lind2_regimes():
    n = 10**4
    with timed() as clock:
        sc = build(ScenarioConfig("lind2", n, {"N": {"sqrt": 1.0}}))
        r = exit_exact(sc.model)
        r_n = sc.meta.details["r_n"]
        target = Psi(r_n) / r_n
        quad = oracles.psi_quad(r_n) / r_n
        dev_a1 = abs(r.P() / r.E_n / target - 1)

        sc0 = build(ScenarioConfig("lind2", n, {"N": 1}))
        r0 = exit_exact(sc0.model)
        dev_a0 = abs(r0.P() / r0.E_n / SQRT_2_OVER_PI - 1)
    ok = dev_a1 <= 0.02 and dev_a0 <= 0.01 and abs(target - quad) < 1e-12 and target == regime_ratio(r_n)
    record(5, "Lind2 regimes", ok,
           f"a=1: P/E_n={r.P() / r.E_n:.6f} vs Psi(1)={target:.6f} (dev {dev_a1:.1e}); "
           f"a->0: {r0.P() / r0.E_n:.6f} vs sqrt(2/pi) (dev {dev_a0:.1e})", clock, 300)


# ---------------------------------------------------------------- 6, 7

@pytest.fixture(scope="module")
def random_rows():
    return random_models()


def test_c06_survival_bound(random_rows):
    with timed() as clock:
        base = i33_suite(models=random_rows, extended=[])
        ext = i33_suite(models=[], extended=extended_models())
    ok = base.failures == 0 and ext.passed
    record(6, "survival bound 4E_n/B_m", ok,
           f"100 rows n<=200: {base.notes['base_applicable']} applicable checkpoints "
           f"(rho >= n^-1/2 > 1/24), {base.failures} violations; "
           f"{ext.notes['extended_rows']} long rows: {ext.notes['extended_applicable']} applicable, "
           f"{ext.failures} violations", clock, 120)


def test_c07_optional_stopping(random_rows):
    with timed() as clock:
        res = optional_stopping_suite(models=random_rows, tol=1e-10)
    record(7, "optional stopping", res.passed, f"{res.checks} rows, max |E_n - E_n_alt| {res.worst:.1e}",
           clock, 120)


# ---------------------------------------------------------------- 8

def _solvable_rows():
    configs = [
        ScenarioConfig("scaled_iid", 400),
        ScenarioConfig("lind", 50),
        ScenarioConfig("lind2", 400, {"N": {"sqrt": 1.0}}),
        ScenarioConfig("scaled_iid", 200, {"boundary": {"kind": "constant_scaled", "g": -3.0}}),
    ]
    return [build(c).model for c in configs] + random_lattice_models(16, seed=808)


def test_c08_mc_exact_agreement():
    with timed() as clock:
        worst = 0.0
        for i, m in enumerate(_solvable_rows()):
            ex = exit_exact(m)
            r = simulate_exit(m, MC_PATHS, seed=SEED + i)
            worst = max(worst, abs(r.P() - ex.P()) / r.P_se(), abs(r.E_n - ex.E_n) / r.E_n_se)
        m = random_lattice_models(1, seed=909)[0]
        ex = exit_exact(m)
        cover_P = cover_E = 0
        for s in range(200):
            r = simulate_exit(m, 10**5, seed=s, level=0.99)
            cover_P += EstimatorResult(r.P(), r.P_se(), r.paths, 0.99).covers(ex.P())
            cover_E += r.extras["E_n"].covers(ex.E_n)
    ok = worst <= 4 and cover_P >= 193 and cover_E >= 193
    record(8, "MC vs exact", ok,
           f"20 rows at 1e6 paths, max |z| {worst:.2f}; 99% coverage P {cover_P}/200, E_n {cover_E}/200",
           clock, 600)


# ---------------------------------------------------------------- 9, 10

@pytest.fixture(scope="module")
def overshoot():
    clock = Clock()
    est, trunc = estimate_overshoot(UNIF, 0.0, 10**6, MC_PATHS, seed=SEED)
    return est, trunc, clock.elapsed


def test_c09_ar1_transition(overshoot):
    ov, trunc, spent = overshoot
    with timed() as clock:
        clock.start -= spent  # the shared overshoot run counts against both budgets
        vals = {}
        for n in (10**3, 10**4):
            sc = build(ScenarioConfig("ar1", n, {"c": 1.0, "innovation": UNIF_D}))
            r = simulate_exit(sc.model, MC_PATHS, seed=SEED)
            s = sc.meta.limit_normalizer
            vals[n] = (s * r.P(), s * r.P_se())
        coef = SQRT_2_OVER_PI  # EX^2 = 1
        pred, pred_se = coef * ov.estimate, coef * ov.se
        stab = combined_z(*vals[10**3], *vals[10**4])
        zs = {n: combined_z(v, se, pred, pred_se) for n, (v, se) in vals.items()}
    ok = trunc < 1e-3 and stab <= 3 and all(z <= 4 for z in zs.values())
    record(9, "AR(1) transition", ok,
           f"sigma_n P = {vals[10**3][0]:.4f}, {vals[10**4][0]:.4f} (n=1e3, 1e4; stability z {stab:.2f}); "
           f"limit {pred:.4f} (z {zs[10**3]:.2f}, {zs[10**4]:.2f}); overshoot {ov.estimate:.5f}, "
           f"truncation {trunc:.1e}", clock, 900)


def test_c10_gaposhkin(overshoot):
    ov, trunc, spent = overshoot
    with timed() as clock:
        clock.start -= spent
        n = 10**4
        g1 = build(ScenarioConfig("gaposhkin", n, {"f": {"kind": "constant", "c": 1.0}, "increment": UNIF_D}))
        iid = build(ScenarioConfig("scaled_iid", n, {"increment": UNIF_D}))
        same = g1.model.to_dict() == iid.model.to_dict()

        sc = build(ScenarioConfig("gaposhkin", n, {"f": {"kind": "affine", "a": 1, "b": 1},
                                                   "increment": UNIF_D}))
        r = simulate_exit(sc.model, MC_PATHS, seed=SEED)
        val, val_se = math.sqrt(n) * r.P(), math.sqrt(n) * r.P_se()
        coef = sc.meta.limit_coefficient
        pred, pred_se = coef * ov.estimate, coef * ov.se
        z = combined_z(val, val_se, pred, pred_se)
    ok = same and z <= 4 and trunc < 1e-3
    record(10, "Gaposhkin reduction", ok,
           f"f=1 row equals scaled_iid: {same}; f=1+t: sqrt(n) P = {val:.4f} +- {val_se:.4f} "
           f"vs {pred:.4f} (z {z:.2f})", clock, 900)


# ---------------------------------------------------------------- 11

def test_c11_normal_helpers():
    with timed() as clock:
        err = abs(Psi(1.0) - oracles.psi_quad(1.0))
        grid = np.linspace(-8, 8, 3201)
        sym = max(abs(normal_cdf(-x) + normal_cdf(x) - 1) for x in grid)
    ok = err <= 1e-10 and sym <= 1e-12 and abs(Psi(1.0) - 0.682689492137) < 1e-12
    record(11, "normal helpers", ok, f"|Psi(1) - quad| {err:.1e}, max symmetry error {sym:.1e}", clock, 1)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
