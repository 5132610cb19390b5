"""Counter-based per-path random streams (SplitMix64 mixing).

Every path owns the stream ``mix(key + n * GAMMA)``, n = 0, 1, ..., with
``key`` derived from (seed, path index) alone, so results never depend on how
paths are distributed over workers.
"""
import math

import numba as nb
import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(inline="always")
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(inline="always")
def path_key(seed, path):
    return mix64(mix64(np.uint64(seed)) + mix64(np.uint64(path) + GAMMA))


@nb.njit(inline="always")
def uniform(key, ctr):
    """Uniform on the open interval (0, 1); returns (u, next counter)."""
    z = mix64(key + np.uint64(ctr) * GAMMA)
    return ((z >> np.uint64(11)) + 0.5) * _INV53, ctr + 1


@nb.njit(inline="always")
def normal_pair(key, ctr):
    u1, ctr = uniform(key, ctr)
    u2, ctr = uniform(key, ctr)
    r = math.sqrt(-2.0 * math.log(u1))
    a = 2.0 * math.pi * u2
    return r * math.cos(a), r * math.sin(a), ctr
