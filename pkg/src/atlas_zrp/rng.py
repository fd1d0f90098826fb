"""Deterministic random streams for the simulator.

The event loop needs a generator that (a) is callable from inside a numba
kernel, (b) produces the identical stream when the kernel runs
interpreted, and (c) can be seeded per replica without collisions.  We
use xoroshiro128+ seeded through splitmix64, both implemented over
numpy uint64 scalars so the same source compiles under numba and runs
unchanged without it.

Documented sampling formulas (fixed, part of the reproducibility
contract):

* uniform double: ``(next_u64 >> 11) * 2**-53``, in ``[0, 1)``.
* exponential(rate): ``-log(1 - u) / rate``.
* geometric(lam) on {0, 1, ...} with P(k) = (1-lam) lam**k:
  inversion ``floor(log(1 - u) / log(lam))``; note ``1 - u`` lies in
  (0, 1] so the logarithm is finite and u = 0 maps to 0.
* replica seed: splitmix64 finalizer applied to
  ``master + (index + 1) * 0x9E3779B97F4A7C15 (mod 2**64)``.  For a
  fixed master the map ``index -> seed`` is injective (the increment is
  odd, the finalizer is a bijection), so distinct replicas can never
  share a seed.
"""

import math

import numpy as np

from ._compat import njit

U64 = np.uint64

_GAMMA = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)
_DOUBLE_SCALE = 1.0 / 9007199254740992.0  # 2**-53


@njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> U64(30))) * _MIX1
    z = (z ^ (z >> U64(27))) * _MIX2
    return z ^ (z >> U64(31))


@njit
def _seed_state(seed, state):
    """Fill a 2-element uint64 state array from a 64-bit seed (splitmix64)."""
    s = U64(seed)
    s = s + _GAMMA
    state[0] = _mix64(s)
    s = s + _GAMMA
    state[1] = _mix64(s)
    if state[0] == U64(0) and state[1] == U64(0):
        state[0] = _GAMMA


@njit(inline="always")
def _next_u64(state):
    """xoroshiro128+ step; mutates ``state`` in place."""
    s0 = state[0]
    s1 = state[1]
    result = s0 + s1
    s1 = s1 ^ s0
    state[0] = ((s0 << U64(55)) | (s0 >> U64(9))) ^ s1 ^ (s1 << U64(14))
    state[1] = (s1 << U64(36)) | (s1 >> U64(28))
    return result


@njit(inline="always")
def _next_double(state):
    return (_next_u64(state) >> U64(11)) * _DOUBLE_SCALE


@njit
def _fill_geometric(state, lam, out):
    """i.i.d. geometric(lam) occupancies by inversion; lam = 0 gives zeros."""
    if lam <= 0.0:
        for i in range(out.size):
            out[i] = 0
        return
    log_lam = math.log(lam)
    for i in range(out.size):
        u = _next_double(state)
        out[i] = int(math.floor(math.log1p(-u) / log_lam))


@njit
def _fill_doubles(state, out):
    for i in range(out.size):
        out[i] = _next_double(state)


def derive_replica_seed(master_seed, replica_index):
    """Collision-free per-replica seed from a master seed (splitmix64 mix)."""
    if replica_index < 0:
        raise ValueError("replica_index must be nonnegative")
    with np.errstate(over="ignore"):
        z = U64(master_seed & 0xFFFFFFFFFFFFFFFF) + U64(replica_index + 1) * _GAMMA
        return int(_mix64(z))


class RandomStream:
    """Seeded xoroshiro128+ stream with the documented sampling formulas.

    One instance per trajectory/replica; instances are cheap and never
    share state.
    """

    def __init__(self, seed):
        self.state = np.zeros(2, dtype=np.uint64)
        with np.errstate(over="ignore"):
            _seed_state(U64(seed & 0xFFFFFFFFFFFFFFFF), self.state)

    def next_double(self):
        with np.errstate(over="ignore"):
            return float(_next_double(self.state))

    def exponential(self, rate):
        if rate <= 0.0:
            raise ValueError("rate must be positive")
        return -math.log1p(-self.next_double()) / rate

    def geometric(self, lam):
        if not 0.0 <= lam < 1.0:
            raise ValueError("lam must lie in [0, 1)")
        if lam == 0.0:
            self.next_double()
            return 0
        return int(math.floor(math.log1p(-self.next_double()) / math.log(lam)))

    def geometric_array(self, lam, size):
        out = np.empty(size, dtype=np.int64)
        with np.errstate(over="ignore"):
            _fill_geometric(self.state, lam, out)
        return out

    def doubles(self, size):
        out = np.empty(size, dtype=np.float64)
        with np.errstate(over="ignore"):
            _fill_doubles(self.state, out)
        return out
