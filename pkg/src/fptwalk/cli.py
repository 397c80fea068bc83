"""Config-driven experiment runner.

Commands::

    fptwalk run SPEC.json
    fptwalk sweep KIND --n 100 400 1600 [--engine exact] [--param key=value ...]
    fptwalk verify [--suite NAME ...]

Exit codes: 0 ok, 1 verification failure, 2 invalid config, 3 engine
mismatch, 4 resource guard. ``FPTWALK_WORKERS`` sets the worker count.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .exact import DEFAULT_GUARD, ResourceGuardError, exit_exact
from .mc import MIN_PATHS, default_workers, estimate_overshoot, simulate_exit
from .model import diagnostics
from .scenarios import SCENARIO_KINDS, Scenario, ScenarioConfig, ScenarioError, build
from .theory import bound_report
from .verify import SUITES, run_suites

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_ENGINE, EXIT_GUARD = 0, 1, 2, 3, 4

COLUMNS = [
    "scenario", "n", "engine", "P", "P_se", "E_n", "E_n_se", "ratio", "ratio_se", "rho",
    "B_checkpoints", "main_prediction", "i33_bound", "i33_applicable", "predicted_limit",
    "runtime_ms",
]
PLOT_COLUMNS = ["scenario", "n", "engine", "m", "B_m", "P_m", "P_m_se", "i33_bound", "i33_applicable"]

_SPEC_KEYS = {"scenarios", "n_grid", "engine", "mc", "exact", "checkpoints", "bounds", "overshoot",
              "output", "record_timing"}
_SCENARIO_KEYS = {"name", "kind", "params", "seed"}
_MC_KEYS = {"paths", "seed", "level"}
_OVERSHOOT_KEYS = {"horizon", "paths", "seed"}
_OUTPUT_KEYS = {"csv", "json", "plot_csv"}


class ConfigError(ValueError):
    pass


class EngineMismatch(ValueError):
    pass


@dataclass
class RunSpec:
    scenarios: list[ScenarioConfig]
    n_grid: list[int]
    engine: str = "exact"
    paths: int = 100_000
    seed: int = 1
    level: float = 0.99
    guard: int = DEFAULT_GUARD
    checkpoints: list[float] = field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0])
    C1: float = 1.0
    C2: float = 1.0
    overshoot: dict[str, int] | None = None
    output: dict[str, str] = field(default_factory=dict)
    record_timing: bool = False

    def __post_init__(self) -> None:
        if not self.scenarios:
            raise ConfigError("scenario list is empty")
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n_grid must be non-empty and strictly increasing")
        if any(not isinstance(n, int) or n < 1 for n in self.n_grid):
            raise ConfigError("n_grid entries must be positive integers")
        if self.engine not in ("exact", "mc", "both"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.paths < MIN_PATHS:
            raise ConfigError(f"mc.paths must be >= {MIN_PATHS}")
        if not 0 < self.level < 1:
            raise ConfigError("mc.level must lie in (0, 1)")
        if not self.checkpoints or any(not 0 < c <= 1 for c in self.checkpoints):
            raise ConfigError("checkpoints are fractions of n in (0, 1]")
        labels = [s.label for s in self.scenarios]
        if len(set(labels)) != len(labels):
            raise ConfigError("scenario names must be unique")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RunSpec:
        _check_keys(d, _SPEC_KEYS, "run spec")
        for key in ("scenarios", "n_grid"):
            if key not in d:
                raise ConfigError(f"run spec needs {key!r}")
        if not isinstance(d["scenarios"], list):
            raise ConfigError("'scenarios' must be a list")
        scenarios = []
        for s in d["scenarios"]:
            _check_keys(s, _SCENARIO_KEYS, "scenario")
            try:
                # n is a placeholder until the grid is applied
                scenarios.append(ScenarioConfig(s["kind"], 1, s.get("params", {}),
                                                int(s.get("seed", 0)), s.get("name")))
            except (KeyError, ScenarioError) as exc:
                raise ConfigError(f"bad scenario {s!r}: {exc}") from exc
        mc = d.get("mc", {})
        _check_keys(mc, _MC_KEYS, "mc")
        exact = d.get("exact", {})
        _check_keys(exact, {"guard"}, "exact")
        bounds = d.get("bounds", {})
        _check_keys(bounds, {"C1", "C2"}, "bounds")
        overshoot = d.get("overshoot")
        if overshoot is not None:
            _check_keys(overshoot, _OVERSHOOT_KEYS, "overshoot")
            if "horizon" not in overshoot:
                raise ConfigError("overshoot needs 'horizon'")
        output = d.get("output", {})
        _check_keys(output, _OUTPUT_KEYS, "output")
        kw = {}
        if "checkpoints" in d:
            kw["checkpoints"] = [float(c) for c in d["checkpoints"]]
        return cls(
            scenarios=scenarios,
            n_grid=list(d["n_grid"]),
            engine=d.get("engine", "exact"),
            paths=int(mc.get("paths", 100_000)),
            seed=int(mc.get("seed", 1)),
            level=float(mc.get("level", 0.99)),
            guard=int(exact.get("guard", DEFAULT_GUARD)),
            C1=float(bounds.get("C1", 1.0)),
            C2=float(bounds.get("C2", 1.0)),
            overshoot=overshoot,
            output=output,
            record_timing=bool(d.get("record_timing", False)),
            **kw,
        )

    def checkpoint_steps(self, n: int) -> list[int]:
        # m = n is always included so the i33 columns can be recomputed from the row
        return sorted({max(1, math.ceil(c * n - 1e-9)) for c in self.checkpoints} | {n})


def _check_keys(d: Any, allowed: set[str], where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def load_spec(path: str | Path) -> RunSpec:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return RunSpec.from_dict(data)


# ---------------------------------------------------------------- running

def _fmt(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _overshoot_value(spec: RunSpec, scenario: Scenario, cache: dict) -> float | None:
    meta = scenario.meta
    if spec.overshoot is None or not meta.limit_supported:
        return None
    boundary = 0.0
    if scenario.config.kind == "scaled_iid":
        b = scenario.config.params.get("boundary", {"kind": "zero"})
        if b.get("kind") == "explicit_array":
            return None
        boundary = float(b.get("g", 0.0))
    key = (meta.overshoot_increment, boundary)
    if key not in cache:
        est, _ = estimate_overshoot(meta.overshoot_increment, boundary, int(spec.overshoot["horizon"]),
                                    int(spec.overshoot.get("paths", 100_000)),
                                    int(spec.overshoot.get("seed", spec.seed)), spec.level)
        cache[key] = est.estimate
    return cache[key]


def _rows_for(spec: RunSpec, scenario: Scenario, engine: str, overshoot: float | None):
    t0 = time.perf_counter()
    model, meta = scenario.model, scenario.meta
    n = model.n
    if engine == "exact":
        res = exit_exact(model, guard=spec.guard)
    else:
        res = simulate_exit(model, spec.paths, spec.seed + scenario.config.seed, level=spec.level)
    runtime = (time.perf_counter() - t0) * 1e3
    diag = diagnostics(model)
    rep = bound_report(res.E_n, diag.rho, diag.B_at(n), spec.C1, spec.C2)
    steps = spec.checkpoint_steps(n)

    if meta.predicted_P is not None:
        predicted = meta.predicted_P
    elif scenario.config.kind == "lind2":
        predicted = meta.predicted_ratio * meta.predicted_E
    elif overshoot is not None:
        predicted = meta.predicted_limit_P(overshoot)
    else:
        predicted = None

    row = {
        "scenario": scenario.config.label,
        "n": n,
        "engine": engine,
        "P": res.P(),
        "P_se": res.P_se(),
        "E_n": res.E_n,
        "E_n_se": res.E_n_se,
        "ratio": res.ratio_value if res.E_n > 0 else None,
        "ratio_se": res.ratio.se if res.ratio is not None else None,
        "rho": diag.rho,
        "B_checkpoints": ";".join(f"{m}:{diag.B_at(m):.17g}" for m in steps),
        "main_prediction": rep.main_prediction,
        "i33_bound": rep.bound,
        "i33_applicable": rep.bound_applicable,
        "predicted_limit": predicted,
        "runtime_ms": round(runtime, 3) if spec.record_timing else None,
    }
    plot = []
    for m in steps:
        b = bound_report(res.E_n, diag.rho, diag.B_at(m), spec.C1, spec.C2)
        plot.append({
            "scenario": row["scenario"], "n": n, "engine": engine, "m": m, "B_m": diag.B_at(m),
            "P_m": res.P(m), "P_m_se": res.P_se(m), "i33_bound": b.bound,
            "i33_applicable": b.bound_applicable,
        })
    return row, plot


def run(spec: RunSpec, workers: int | None = None) -> tuple[list[dict], list[dict]]:
    """Evaluate every (scenario, n, engine) job; rows come back in (scenario, n) order."""
    engines = ["exact", "mc"] if spec.engine == "both" else [spec.engine]
    built = []
    for cfg in spec.scenarios:
        for n in spec.n_grid:
            try:
                sc = build(cfg.with_n(n))
            except ScenarioError as exc:
                raise ConfigError(str(exc)) from exc
            # off-lattice rows are a mismatch; oversized lattice rows hit the guard later
            if "exact" in engines and sc.model.lattice_info is None:
                raise EngineMismatch(f"{cfg.label} at n={n} has no lattice; the exact engine cannot run")
            built.append(sc)
    cache: dict = {}
    overshoots = [_overshoot_value(spec, sc, cache) for sc in built]
    jobs = [(sc, eng, ov) for sc, ov in zip(built, overshoots) for eng in engines]
    workers = workers or default_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: _rows_for(spec, *j), jobs))
    else:
        results = [_rows_for(spec, *j) for j in jobs]
    rows = [r for r, _ in results]
    plot = [p for _, ps in results for p in ps]
    return rows, plot


def to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def write_outputs(spec: RunSpec, rows: list[dict], plot: list[dict]) -> None:
    out = spec.output
    if "csv" in out:
        Path(out["csv"]).write_text(to_csv(rows, COLUMNS))
    if "plot_csv" in out:
        Path(out["plot_csv"]).write_text(to_csv(plot, PLOT_COLUMNS))
    if "json" in out:
        payload = {"columns": COLUMNS, "rows": rows,
                   "scenarios": [s.to_dict() for s in spec.scenarios], "n_grid": spec.n_grid}
        Path(out["json"]).write_text(json.dumps(payload, indent=2, sort_keys=True))


# ---------------------------------------------------------------- entry

def _parse_param(text: str) -> tuple[str, Any]:
    key, sep, value = text.partition("=")
    if not sep:
        raise ConfigError(f"--param expects key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _execute(spec: RunSpec) -> int:
    rows, plot = run(spec)
    write_outputs(spec, rows, plot)
    if "csv" not in spec.output:
        sys.stdout.write(to_csv(rows, COLUMNS))
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fptwalk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a JSON experiment spec")
    p_run.add_argument("spec")

    p_sweep = sub.add_parser("sweep", help="grid shorthand for one scenario")
    p_sweep.add_argument("kind", choices=SCENARIO_KINDS)
    p_sweep.add_argument("--n", type=int, nargs="+", required=True)
    p_sweep.add_argument("--engine", default="exact", choices=["exact", "mc", "both"])
    p_sweep.add_argument("--param", action="append", default=[], help="key=JSON value")
    p_sweep.add_argument("--name")
    p_sweep.add_argument("--paths", type=int, default=100_000)
    p_sweep.add_argument("--seed", type=int, default=1)
    p_sweep.add_argument("--csv")
    p_sweep.add_argument("--plot-csv")

    p_ver = sub.add_parser("verify", help="run the invariant suites")
    p_ver.add_argument("--suite", action="append", choices=SUITES)

    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            results = run_suites(args.suite)
            for r in results:
                print(r.line())
            return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL
        if args.command == "run":
            spec = load_spec(args.spec)
        else:
            output = {k: v for k, v in (("csv", args.csv), ("plot_csv", args.plot_csv)) if v}
            scenario = {"kind": args.kind, "params": dict(_parse_param(p) for p in args.param)}
            if args.name:
                scenario["name"] = args.name
            spec = RunSpec.from_dict({
                "scenarios": [scenario], "n_grid": args.n, "engine": args.engine,
                "mc": {"paths": args.paths, "seed": args.seed}, "output": output,
            })
        return _execute(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EngineMismatch as exc:
        print(f"engine mismatch: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    except ResourceGuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_GUARD


if __name__ == "__main__":
    sys.exit(main())
