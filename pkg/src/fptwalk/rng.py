"""Counter-based SplitMix64 streams keyed by (seed, path index).

The ``k``-th uniform of path ``i`` is a pure function of ``(seed, i, k)``, so
results never depend on how paths are split across workers. The scalar
:class:`RngStream` and the jitted helpers produce identical bits.
"""

from __future__ import annotations

import numba
import numpy as np

_MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
PATH_GAMMA = 0xD1B54A32D192ED03
SEED_OFFSET = 0x632BE59BD9B4E019

_U_GOLDEN = np.uint64(GOLDEN)
_U_PATH_GAMMA = np.uint64(PATH_GAMMA)
_U_SEED_OFFSET = np.uint64(SEED_OFFSET)
_U_M1 = np.uint64(0xBF58476D1CE4E5B9)
_U_M2 = np.uint64(0x94D049BB133111EB)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_U1 = np.uint64(1)
_INV_2_53 = 1.0 / 9007199254740992.0


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def seed_key(seed: int) -> int:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return _mix((seed * GOLDEN + SEED_OFFSET) & _MASK)


def path_state(seed: int, path: int) -> int:
    return _mix((seed_key(seed) + (path + 1) * PATH_GAMMA) & _MASK)


class RngStream:
    """Sequential view of the stream for one path."""

    def __init__(self, seed: int, path: int = 0, counter: int = 0):
        self.seed = int(seed) & _MASK
        self.path = int(path)
        self.counter = int(counter)
        self._state = path_state(self.seed, self.path)

    def next_u64(self) -> int:
        self.counter += 1
        return _mix((self._state + self.counter * GOLDEN) & _MASK)

    def next_uniform(self) -> float:
        return (self.next_u64() >> 11) * _INV_2_53

    def uniforms(self, count: int) -> np.ndarray:
        return np.array([self.next_uniform() for _ in range(count)])

    def split(self, path: int) -> RngStream:
        return RngStream(self.seed, path)


@numba.njit(cache=True, inline="always")
def _mix_nb(z):
    z = (z ^ (z >> _U30)) * _U_M1
    z = (z ^ (z >> _U27)) * _U_M2
    return z ^ (z >> _U31)


@numba.njit(cache=True)
def path_state_nb(key, path):
    return _mix_nb(key + (np.uint64(path) + _U1) * _U_PATH_GAMMA)


@numba.njit(cache=True, inline="always")
def uniform_nb(state, step):
    """Uniform number ``step`` (0-based) of the path whose state is ``state``."""
    z = _mix_nb(state + (np.uint64(step) + _U1) * _U_GOLDEN)
    return np.float64(z >> _U11) * _INV_2_53


@numba.njit(cache=True)
def uniform_block(key, first_path, paths, steps):
    out = np.empty((paths, steps))
    for i in range(paths):
        st = path_state_nb(key, first_path + i)
        for k in range(steps):
            out[i, k] = uniform_nb(st, k)
    return out


def uniforms(seed: int, first_path: int, paths: int, steps: int) -> np.ndarray:
    """Matrix of uniforms, row ``i`` belonging to path ``first_path + i``."""
    return uniform_block(np.uint64(seed_key(seed)), first_path, paths, steps)
