"""Lattice configurations and the elementary particle moves.

Sites live on the truncated half-line {1, ..., L}.  Sites 0 and L+1 are
virtual: a move whose source or destination is virtual models creation
or loss at the corresponding boundary.  All moves are between adjacent
sites, so a move is fully described by the ordered pair (src, dst).
"""

from dataclasses import dataclass

import numpy as np

from .rng import RandomStream

OCCUPANCY_LIMIT = np.int64(2**62)


@dataclass
class Configuration:
    """Occupancies on {1..L} plus a cached count of occupied sites.

    ``occupancy`` has length L+1 with slot 0 unused (kept at 0) so that
    site x is literally ``occupancy[x]``.
    """

    occupancy: np.ndarray
    L: int
    occupied_count: int

    def copy(self):
        return Configuration(self.occupancy.copy(), self.L, self.occupied_count)

    def recount(self):
        """Recount occupied sites from scratch (slot 0 excluded)."""
        return int(np.count_nonzero(self.occupancy[1:]))

    def validate(self):
        if self.occupancy.shape != (self.L + 1,):
            raise AssertionError("occupancy array has the wrong length")
        if self.occupancy[0] != 0:
            raise AssertionError("slot 0 must stay empty")
        if np.any(self.occupancy < 0):
            raise AssertionError("negative occupancy")
        if np.any(self.occupancy >= OCCUPANCY_LIMIT):
            raise AssertionError("occupancy out of the int64 comfort zone")
        if self.occupied_count != self.recount():
            raise AssertionError("occupied_count cache out of sync")


def empty_configuration(L):
    if L < 1:
        raise ValueError("L must be >= 1")
    return Configuration(np.zeros(L + 1, dtype=np.int64), int(L), 0)


def sample_equilibrium(params, L, seed):
    """Draw i.i.d. geometric(lambda_n) occupancies on {1..L}.

    ``seed`` may be an integer or an existing RandomStream (the latter
    lets callers keep one stream per replica).
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    stream = seed if isinstance(seed, RandomStream) else RandomStream(seed)
    config = empty_configuration(L)
    config.occupancy[1:] = stream.geometric_array(params.lambda_n, L)
    config.occupied_count = config.recount()
    return config


def apply_move(config, src, dst):
    """Move one particle from ``src`` to ``dst`` (adjacent sites).

    Virtual endpoints 0 and L+1 create or absorb particles.  Moving from
    an empty interior site is a programming error, not a runtime
    condition, hence the assert.
    """
    L = config.L
    if abs(src - dst) != 1:
        raise ValueError(f"move {src}->{dst} is not between adjacent sites")
    if not (0 <= src <= L + 1 and 0 <= dst <= L + 1):
        raise ValueError(f"move {src}->{dst} leaves the lattice")
    occ = config.occupancy
    if 1 <= src <= L:
        assert occ[src] >= 1, f"move from empty site {src}"
        occ[src] -= 1
        if occ[src] == 0:
            config.occupied_count -= 1
    if 1 <= dst <= L:
        if occ[dst] == 0:
            config.occupied_count += 1
        occ[dst] += 1
    return config
