"""Exact first-passage computations for lattice walks.

Masses live on integer states; a walk state ``x`` stands for ``x * step`` in
the scaled (or walk) units of the caller. All boundary comparisons happen on
integers, so ties ``S_k == g_k`` are resolved exactly.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .dist import IncrementSpec, Psi
from .model import LatticeInfo, RowModel, lattice_from_steps
from .results import ExitResult

DEFAULT_GUARD = 2 * 10**9

Observer = Callable[[int, np.ndarray, np.ndarray, "np.ndarray | None"], None]


class LatticeRequired(ValueError):
    """The row has no common lattice, so the exact engine cannot run."""


class ResourceGuardError(RuntimeError):
    """The DP would exceed the cell-update budget."""


def cell_updates(shifts: Sequence[Sequence[int]], start_width: int = 1) -> int:
    """Upper bound on the number of cell updates of one sweep."""
    width = start_width
    total = 0
    for s in shifts:
        total += width * len(s)
        width += max(s) - min(s)
    return total


class LatticeDP:
    """Forward sweep of survival mass ``f_k(x) = P(S_k = x, T > k)``.

    Optionally carries the unrestricted law ``u_k(x) = P(S_k = x)``. After
    :meth:`run`, ``survival[k-1] = P(T > k)``, ``crossed[k-1]`` is the mass
    absorbed at step k and ``crossed_moment[k-1]`` its first moment (integer
    state units). ``observer(k, states, f, u)`` is called after every step.
    """

    def __init__(
        self,
        shifts: Sequence[Sequence[int]],
        probs: Sequence[Sequence[float]],
        thresholds: Sequence[int],
        start: int = 0,
        track_unrestricted: bool = False,
        guard: int = DEFAULT_GUARD,
    ):
        if not (len(shifts) == len(probs) == len(thresholds)):
            raise ValueError("shifts, probs and thresholds must have equal length")
        self.shifts = shifts
        self.probs = probs
        self.thresholds = thresholds
        self.start = int(start)
        self.track_unrestricted = track_unrestricted
        cost = cell_updates(shifts) * (2 if track_unrestricted else 1)
        if cost > guard:
            raise ResourceGuardError(f"DP needs ~{cost:.3g} cell updates, guard is {guard:.3g}")
        self.base = self.start + sum(min(s) for s in shifts)
        top = self.start + sum(max(s) for s in shifts)
        self.states = np.arange(self.base, top + 1, dtype=float)
        self.n = len(shifts)

    @classmethod
    def from_lattice(cls, info: LatticeInfo, **kwargs) -> LatticeDP:
        return cls(info.shifts, info.probs, info.thresholds, **kwargs)

    @staticmethod
    def _step(src, dst, lo, hi, shifts, probs):
        # dst is all-zero on entry; src is cleared on exit to keep that true
        nlo, nhi = lo + min(shifts), hi + max(shifts)
        seg = src[lo:hi + 1]
        for s, p in zip(shifts, probs):
            dst[lo + s:hi + s + 1] += p * seg
        seg[:] = 0.0
        return nlo, nhi

    def run(self, observer: Observer | None = None) -> LatticeDP:
        size = len(self.states)
        f, f_next = np.zeros(size), np.zeros(size)
        i0 = self.start - self.base
        f[i0] = 1.0
        lo = hi = i0
        if self.track_unrestricted:
            u, u_next = np.zeros(size), np.zeros(size)
            u[i0] = 1.0
            ulo = uhi = i0
        survival = np.empty(self.n)
        crossed = np.empty(self.n)
        moment = np.empty(self.n)
        alive = True
        for k in range(self.n):
            sh, pr = self.shifts[k], self.probs[k]
            if alive:
                nlo, nhi = self._step(f, f_next, lo, hi, sh, pr)
                f, f_next = f_next, f
                cut = min(self.thresholds[k] - self.base, nhi)
                if cut >= nlo:
                    seg = f[nlo:cut + 1]
                    crossed[k] = seg.sum()
                    moment[k] = (self.states[nlo:cut + 1] * seg).sum()
                    seg[:] = 0.0
                    nlo = cut + 1
                else:
                    crossed[k] = moment[k] = 0.0
                lo, hi = nlo, nhi
                if lo > hi:
                    alive = False
                survival[k] = f[lo:hi + 1].sum() if alive else 0.0
            else:
                survival[k] = crossed[k] = moment[k] = 0.0
            if self.track_unrestricted:
                ulo, uhi = self._step(u, u_next, ulo, uhi, sh, pr)
                u, u_next = u_next, u
            if observer is not None:
                observer(k + 1, self.states, f, u if self.track_unrestricted else None)
        self.f = f
        self.u = u if self.track_unrestricted else None
        self.survival = survival
        self.crossed = crossed
        self.crossed_moment = moment
        return self

    @property
    def final_moment(self) -> float:
        """``sum_x x f_n(x)`` in integer state units."""
        return math.fsum((self.states * self.f)[self.f > 0])

    @property
    def crossed_total(self) -> float:
        return math.fsum(self.crossed)


def exit_exact(model: RowModel, guard: int = DEFAULT_GUARD) -> ExitResult:
    """``P(T_n > m)`` for every m and both forms of ``E_n`` for a lattice row."""
    info = model.lattice_info
    if info is None:
        raise LatticeRequired("row has no common lattice; use the Monte Carlo engine")
    dp = LatticeDP.from_lattice(info, guard=guard).run()
    p_n = float(dp.survival[-1])
    g_n = float(model.g[-1])
    E_n = info.step * dp.final_moment - g_n * p_n
    E_alt = -info.step * math.fsum(dp.crossed_moment) - g_n * p_n
    return ExitResult(
        n=model.n,
        survival=dp.survival,
        E_n=E_n,
        E_n_alt=E_alt,
        engine="exact",
        extras={"crossed": dp.crossed, "step": info.step},
    )


def _ssrw(m: int) -> tuple[list, list]:
    return [(-1, 1)] * m, [(0.5, 0.5)] * m


def reflection_table(N: int, m_max: int) -> tuple[np.ndarray, np.ndarray]:
    """For m = 1..m_max: ``P(N + min_{k<=m} U_k > 0)`` and ``P(-N < U_m <= N)``."""
    if N < 1 or m_max < 1:
        raise ValueError("N and m must be >= 1")
    shifts, probs = _ssrw(m_max)
    rhs = np.empty(m_max)

    def obs(k, states, f, u):
        band = (states > 0) & (states <= 2 * N)  # state is N + U_k
        rhs[k - 1] = u[band].sum()

    dp = LatticeDP(shifts, probs, [0] * m_max, start=N, track_unrestricted=True).run(obs)
    return dp.survival.copy(), rhs


def reflection_check(N: int, m: int) -> tuple[float, float]:
    lhs, rhs = reflection_table(N, m)
    return float(lhs[-1]), float(rhs[-1])


def martingale_table(N: int, m_max: int) -> np.ndarray:
    """``E[(N + U_m) 1{N + min U > 0}]`` for m = 1..m_max."""
    if N < 1 or m_max < 1:
        raise ValueError("N and m must be >= 1")
    shifts, probs = _ssrw(m_max)
    out = np.empty(m_max)

    def obs(k, states, f, u):
        out[k - 1] = math.fsum(states * f)

    LatticeDP(shifts, probs, [0] * m_max, start=N).run(obs)
    return out


def martingale_check(N: int, m: int) -> float:
    return float(martingale_table(N, m)[-1])


def overshoot_exact(
    increments: IncrementSpec | Sequence[IncrementSpec],
    boundary: float | Sequence[float],
    horizon: int,
    guard: int = DEFAULT_GUARD,
) -> tuple[float, float]:
    """``(E[-S_tau; tau <= H], P(tau > H))`` for ``tau = inf{k: S_k <= g_k}``.

    ``increments`` is one law for every step, or a per-step sequence whose
    last entry repeats up to the horizon. Units are the walk's own units.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    steps = _expand(increments, horizon)
    bounds = [float(boundary)] * horizon if np.isscalar(boundary) else list(boundary)[:horizon]
    if len(bounds) < horizon:
        bounds += [bounds[-1]] * (horizon - len(bounds))
    info = lattice_from_steps(steps, [1.0] * horizon, bounds)
    if info is None:
        raise LatticeRequired("overshoot_exact needs lattice increments and boundary")
    dp = LatticeDP.from_lattice(info, guard=guard).run()
    h = float(info.walk_step)
    return -h * math.fsum(dp.crossed_moment), float(dp.survival[-1])


def _expand(increments, horizon: int) -> list[IncrementSpec]:
    if isinstance(increments, IncrementSpec):
        return [increments] * horizon
    steps = list(increments)[:horizon]
    return steps + [steps[-1]] * (horizon - len(steps))


def local_clt_check(m: int, N_grid: Sequence[int]) -> float:
    """``max_N |P(-N < U_m <= N) / Psi(N / sqrt(m)) - 1|`` for the SSRW."""
    if m < 2:
        raise ValueError("m must be >= 2")
    shifts, probs = _ssrw(m)
    dp = LatticeDP(shifts, probs, [-(m + 1)] * m).run()
    states, mass = dp.states, dp.f
    cum = np.concatenate([[0.0], np.cumsum(mass)])

    def band(N):  # P(-N < U <= N) via prefix sums over states
        lo = np.searchsorted(states, -N, side="right")
        hi = np.searchsorted(states, N, side="right")
        return cum[hi] - cum[lo]

    return max(abs(band(N) / Psi(N / math.sqrt(m)) - 1.0) for N in N_grid)
