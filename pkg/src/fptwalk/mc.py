"""Monte Carlo estimation of exit probabilities, E_n and overshoots.

Paths are processed in fixed blocks of ``BLOCK`` paths. Each block is a pure
function of ``(seed, block)`` and block statistics are merged in block order,
so estimates are bit-identical for any worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numba
import numpy as np

from .dist import SQRT_2_OVER_PI, IncrementSpec
from .model import RowModel
from .results import EstimatorResult, ExitResult
from .rng import path_state_nb, seed_key, uniform_nb

BLOCK = 1 << 16
MIN_PATHS = 1000


def default_workers() -> int:
    return max(1, int(os.environ.get("FPTWALK_WORKERS", "1")))


# ---------------------------------------------------------------- kernels

@numba.njit(cache=True, nogil=True)
def _walk_kernel(key, first_path, paths, kinds, half_width, values, cum, natoms,
                 step_spec, step_w, bound, out_t, out_s):
    n = step_spec.shape[0]
    for i in range(paths):
        st = path_state_nb(key, first_path + i)
        s = 0.0
        t = n + 1
        for k in range(n):
            j = step_spec[k]
            u = uniform_nb(st, k)
            if kinds[j] == 1:
                x = half_width[j] * (2.0 * u - 1.0)
            else:
                # branchless inverse CDF; atom counts are tiny
                a = 0
                for q in range(natoms[j] - 1):
                    a += u >= cum[j, q]
                x = values[j, a]
            s += step_w[k] * x
            if s <= bound[k]:
                t = k + 1
                break
        out_t[i] = t
        out_s[i] = s


@numba.njit(cache=True, nogil=True)
def _ar1_kernel(key, first_path, paths, gamma, n, kinds, half_width, values, cum, natoms, out_t):
    for i in range(paths):
        st = path_state_nb(key, first_path + i)
        y = 0.0
        t = n + 1
        for k in range(n):
            u = uniform_nb(st, k)
            if kinds[0] == 1:
                x = half_width[0] * (2.0 * u - 1.0)
            else:
                a = 0
                for q in range(natoms[0] - 1):
                    a += u >= cum[0, q]
                x = values[0, a]
            y = gamma * y + x
            if y <= 0.0:
                t = k + 1
                break
        out_t[i] = t


# ---------------------------------------------------------------- plumbing

class _SpecTable:
    """Flat arrays describing a set of increment laws for the kernels."""

    def __init__(self, specs: Sequence[IncrementSpec]):
        uniq: dict[IncrementSpec, int] = {}
        for s in specs:
            uniq.setdefault(s, len(uniq))
        width = max((len(s.atoms) for s in uniq), default=1) or 1
        m = len(uniq)
        self.kinds = np.zeros(m, dtype=np.int8)
        self.half_width = np.zeros(m)
        self.values = np.zeros((m, width))
        self.cum = np.ones((m, width))
        self.natoms = np.ones(m, dtype=np.int64)
        for s, j in uniq.items():
            if s.is_continuous:
                self.kinds[j] = 1
                self.half_width[j] = s.half_width
            else:
                vals, cum = s.cumulative()
                self.values[j, :len(vals)] = vals
                self.cum[j, :len(vals)] = cum
                self.natoms[j] = len(vals)
        self.index = np.array([uniq[s] for s in specs], dtype=np.int32)

    def args(self):
        return self.kinds, self.half_width, self.values, self.cum, self.natoms


def _blocks(paths: int):
    return [(b, min(BLOCK, paths - b)) for b in range(0, paths, BLOCK)]


def _map_blocks(fn, paths: int, workers: int | None):
    blocks = _blocks(paths)
    workers = workers or default_workers()
    if workers <= 1 or len(blocks) == 1:
        return [fn(b, size) for b, size in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda bs: fn(*bs), blocks))


def _walk_block(model_arrays, key, first, size):
    table, step_w, bound = model_arrays
    out_t = np.empty(size, dtype=np.int64)
    out_s = np.empty(size)
    _walk_kernel(key, first, size, *table.args(), table.index, step_w, bound, out_t, out_s)
    return out_t, out_s


def _model_arrays(increments, weights, boundary):
    return (_SpecTable(increments), np.asarray(weights, dtype=float),
            np.asarray(boundary, dtype=float))


def exit_times(model: RowModel, paths: int, seed: int, first_path: int = 0):
    """Per-path exit time (``n + 1`` if the path survives) and final walk-unit sum."""
    arrays = _model_arrays(model.increments, model.weights, model.boundary)
    return _walk_block(arrays, np.uint64(seed_key(seed)), first_path, paths)


def ar1_exit_times(gamma: float, innovation: IncrementSpec, n: int, paths: int, seed: int,
                   first_path: int = 0) -> np.ndarray:
    """Exit times of ``U_k = gamma U_{k-1} + X_k`` below 0, using the recursion itself."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    table = _SpecTable([innovation])
    out_t = np.empty(paths, dtype=np.int64)
    _ar1_kernel(np.uint64(seed_key(seed)), first_path, paths, gamma, n, *table.args(), out_t)
    return out_t


# ---------------------------------------------------------------- estimators

def _mean_se(total: float, total_sq: float, paths: int) -> tuple[float, float, float]:
    mean = total / paths
    var = max(total_sq - paths * mean * mean, 0.0) / (paths - 1)
    return mean, math.sqrt(var / paths), var


def simulate_exit(
    model: RowModel,
    paths: int,
    seed: int,
    checkpoints: Sequence[int] | None = None,
    level: float = 0.99,
    workers: int | None = None,
) -> ExitResult:
    """Joint Monte Carlo estimates of ``P(T_n > m)``, ``E_n`` and the ratio.

    The ratio ``P(T_n > n) / (sqrt(2/pi) E_n)`` gets a delta-method error from
    the joint sample covariance of ``1{T > n}`` and ``(S_n - g_n) 1{T > n}``.
    """
    if paths < MIN_PATHS:
        raise ValueError(f"need at least {MIN_PATHS} paths")
    n = model.n
    arrays = _model_arrays(model.increments, model.weights, model.boundary)
    key = np.uint64(seed_key(seed))
    b_n = model.boundary[-1]

    def block(first, size):
        t, s = _walk_block(arrays, key, first, size)
        alive = t > n
        y = np.where(alive, s - b_n, 0.0)
        y_alt = np.where(alive, -b_n, -s)
        return np.bincount(t, minlength=n + 2), y.sum(), (y * y).sum(), y_alt.sum()

    parts = _map_blocks(block, paths, workers)
    counts = np.sum([p[0] for p in parts], axis=0)
    sy, syy = math.fsum(p[1] for p in parts), math.fsum(p[2] for p in parts)
    sa = math.fsum(p[3] for p in parts)

    # survivors beyond step m: exit time > m
    beyond = paths - np.cumsum(counts)[1:n + 1]
    surv = beyond / paths
    surv_se = np.sqrt(surv * (1.0 - surv) / (paths - 1))

    sc = model.scale
    y_mean, y_se, y_var = _mean_se(sy, syy, paths)
    E_n, E_se, var_y = sc * y_mean, sc * y_se, sc * sc * y_var
    E_alt = sc * sa / paths
    p = float(surv[-1])
    var_i = p * (1.0 - p) * paths / (paths - 1)
    cov_iy = sc * (sy - paths * p * y_mean) / (paths - 1)
    cov = np.array([[var_i, cov_iy], [cov_iy, var_y]])

    ratio = None
    if E_n > 0:
        c = SQRT_2_OVER_PI
        grad = np.array([1.0 / (c * E_n), -p / (c * E_n * E_n)])
        r_var = float(grad @ cov @ grad) / paths
        ratio = EstimatorResult(p / (c * E_n), math.sqrt(max(r_var, 0.0)), paths, level, cov)

    result = ExitResult(
        n=n,
        survival=surv,
        E_n=E_n,
        E_n_alt=E_alt,
        engine="mc",
        survival_se=surv_se,
        E_n_se=E_se,
        paths=paths,
        ratio=ratio,
    )
    if checkpoints is not None:
        result.extras["checkpoints"] = {
            m: EstimatorResult(result.P(m), result.P_se(m), paths, level) for m in checkpoints
        }
    result.extras["E_n"] = EstimatorResult(E_n, E_se, paths, level)
    return result


def estimate_overshoot(
    increments: IncrementSpec | Sequence[IncrementSpec],
    boundary: float | Sequence[float],
    horizon: int,
    paths: int,
    seed: int,
    level: float = 0.99,
    workers: int | None = None,
) -> tuple[EstimatorResult, float]:
    """Estimate ``E[-S_tau; tau <= H]`` and the surviving fraction ``P(tau > H)``.

    ``tau = inf{k >= 1: S_k <= g_k}`` for the unscaled walk. Per-step laws or
    boundaries shorter than the horizon repeat their last entry.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if isinstance(increments, IncrementSpec):
        steps = [increments] * horizon
    else:
        steps = list(increments)[:horizon]
        steps += [steps[-1]] * (horizon - len(steps))
    if np.isscalar(boundary):
        bound = np.full(horizon, float(boundary))
    else:
        bound = np.asarray(boundary, dtype=float)[:horizon]
        bound = np.concatenate([bound, np.full(horizon - len(bound), bound[-1])])
    arrays = _model_arrays(steps, np.ones(horizon), bound)
    key = np.uint64(seed_key(seed))

    def block(first, size):
        t, s = _walk_block(arrays, key, first, size)
        v = np.where(t <= horizon, -s, 0.0)
        return v.sum(), (v * v).sum(), int((t > horizon).sum())

    parts = _map_blocks(block, paths, workers)
    mean, se, _ = _mean_se(math.fsum(p[0] for p in parts), math.fsum(p[1] for p in parts), paths)
    truncated = sum(p[2] for p in parts) / paths
    return EstimatorResult(mean, se, paths, level), truncated
