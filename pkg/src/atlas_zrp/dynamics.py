"""Continuous-time event dynamics with exact current bookkeeping.

The process: every occupied site carries total jump rate 1 (right with
probability q_n, left with p_n); a particle jumping left out of site 1
dies; particles are created at site 1 with rate lambda_n * q_n.  The
truncation at L is closed by a fugacity-matched reservoir: injection at
site L with rate lambda_n * p_n and free exit to the right with rate
q_n per occupied L.  This is the unique boundary driving that keeps the
product geometric(lambda_n) measure exactly invariant, because both
virtual boundary sites behave like frozen sites of fugacity lambda_n.
All rates are accelerated by n**theta.

This module holds the plain-Python reference dynamics.  ``simulate``
delegates to the compiled kernel in :mod:`atlas_zrp.kernel`, which must
reproduce the reference trajectory draw for draw.  The random-number
consumption order per event is part of the contract:

    u1: waiting time,
    u2: channel (create-left if u2*(K+lam) < lam*q, create-right if
        < lam, otherwise bulk),
    u3: occupied-site slot, ``int(u3*K)`` into the dense index (bulk only),
    u4: direction, right iff u4 < q_n (bulk only).

So is the dense-index discipline: initial occupied sites in ascending
order, newly occupied sites appended, emptied sites removed by
swap-with-last.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .model import Configuration, apply_move, sample_equilibrium
from .rng import RandomStream


class EventKind(enum.Enum):
    BULK_RIGHT = "bulk_right"
    BULK_LEFT = "bulk_left"
    CREATE_LEFT = "create_left"
    ANNIHILATE_LEFT = "annihilate_left"
    CREATE_RIGHT = "create_right"
    EXIT_RIGHT = "exit_right"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    site: int
    time_increment: float


class OccupiedIndex:
    """Dense list of occupied sites with O(1) insert and swap-pop removal."""

    def __init__(self, occupancy, L):
        self.sites = [x for x in range(1, L + 1) if occupancy[x] > 0]
        self.pos = {x: i for i, x in enumerate(self.sites)}

    def add(self, site):
        self.pos[site] = len(self.sites)
        self.sites.append(site)

    def remove(self, site):
        i = self.pos.pop(site)
        last = self.sites.pop()
        if last != site:
            self.sites[i] = last
            self.pos[last] = i

    def __len__(self):
        return len(self.sites)


@dataclass
class CurrentLedger:
    """Signed cumulative crossings J[x] of each bond {x, x+1}, x = 0..L.

    J[0] counts creations minus annihilations at site 1; J[L] counts
    exits minus injections at site L.
    """

    J: np.ndarray

    @classmethod
    def zeros(cls, L):
        return cls(np.zeros(L + 1, dtype=np.int64))

    def copy(self):
        return CurrentLedger(self.J.copy())


@dataclass
class SimState:
    params: object
    config: Configuration
    ledger: CurrentLedger
    t: float = 0.0
    rng: RandomStream = None
    event_count: int = 0
    occupied: OccupiedIndex = field(default=None, repr=False)
    initial_occupancy: np.ndarray = field(default=None, repr=False)
    budget_exhausted: bool = False

    def check_continuity(self):
        """Pathwise identity J[x-1] - J[x] == eta_t[x] - eta_0[x], exactly."""
        J = self.ledger.J
        diff = J[:-1] - J[1:]
        change = self.config.occupancy[1:] - self.initial_occupancy[1:]
        if not np.array_equal(diff, change):
            bad = int(np.nonzero(diff != change)[0][0]) + 1
            raise AssertionError(
                f"continuity violated at site {bad}: "
                f"J[{bad - 1}]-J[{bad}]={diff[bad - 1]} vs delta eta={change[bad - 1]}"
            )


def initial_state(params, L, seed):
    stream = seed if isinstance(seed, RandomStream) else RandomStream(seed)
    config = sample_equilibrium(params, L, stream)
    return SimState(
        params=params,
        config=config,
        ledger=CurrentLedger.zeros(L),
        t=0.0,
        rng=stream,
        event_count=0,
        occupied=OccupiedIndex(config.occupancy, L),
        initial_occupancy=config.occupancy.copy(),
    )


def total_rate(state):
    """n**theta * (occupied_count + lambda_n); asymmetry-independent."""
    p = state.params
    return p.time_scale * (state.config.occupied_count + p.lambda_n)


def next_event(state):
    """Draw the next event (Gillespie), without applying it."""
    p = state.params
    config = state.config
    rng = state.rng
    K = config.occupied_count
    rate = p.time_scale * (K + p.lambda_n)
    dt = -math.log1p(-rng.next_double()) / rate
    r = rng.next_double() * (K + p.lambda_n)
    if r < p.lambda_n * p.q_n:
        return Event(EventKind.CREATE_LEFT, 1, dt)
    if r < p.lambda_n:
        return Event(EventKind.CREATE_RIGHT, config.L, dt)
    site = state.occupied.sites[int(rng.next_double() * K)]
    right = rng.next_double() < p.q_n
    if right:
        if site == config.L:
            return Event(EventKind.EXIT_RIGHT, site, dt)
        return Event(EventKind.BULK_RIGHT, site, dt)
    if site == 1:
        return Event(EventKind.ANNIHILATE_LEFT, site, dt)
    return Event(EventKind.BULK_LEFT, site, dt)


def apply_event(state, event):
    """Apply an event drawn from this state: configuration, ledger, clock."""
    config = state.config
    occ = config.occupancy
    J = state.ledger.J
    L = config.L
    kind = event.kind
    if kind is EventKind.BULK_RIGHT:
        src, dst, bond, sign = event.site, event.site + 1, event.site, +1
    elif kind is EventKind.BULK_LEFT:
        src, dst, bond, sign = event.site, event.site - 1, event.site - 1, -1
    elif kind is EventKind.CREATE_LEFT:
        src, dst, bond, sign = 0, 1, 0, +1
    elif kind is EventKind.ANNIHILATE_LEFT:
        src, dst, bond, sign = 1, 0, 0, -1
    elif kind is EventKind.EXIT_RIGHT:
        src, dst, bond, sign = L, L + 1, L, +1
    elif kind is EventKind.CREATE_RIGHT:
        src, dst, bond, sign = L + 1, L, L, -1
    else:  # pragma: no cover
        raise ValueError(f"unknown event kind {kind}")
    apply_move(config, src, dst)
    if state.occupied is not None:
        if 1 <= src <= L and occ[src] == 0:
            state.occupied.remove(src)
        if 1 <= dst <= L and occ[dst] == 1:
            state.occupied.add(dst)
    J[bond] += sign
    state.t += event.time_increment
    state.event_count += 1
    return state


def centered_current(ledger, params, t, x):
    """Current recentred by its exact stationary mean -n**theta*alpha_n*lambda_n*t."""
    J = ledger.J if isinstance(ledger, CurrentLedger) else ledger
    if not 0 <= x < len(J):
        raise ValueError(f"bond index {x} outside 0..{len(J) - 1}")
    return float(J[x]) + params.time_scale * params.alpha_n * params.lambda_n * t


def drift_rate(params):
    """Mean-current magnitude n**theta*alpha_n*lambda_n per unit time."""
    return params.time_scale * params.alpha_n * params.lambda_n


def reference_run(state, T, max_events=10**9):
    """Slow but transparent event loop; mutates and returns ``state``.

    An event whose waiting time would carry the clock past T is
    discarded and the clock is clamped to T, matching the kernel.
    """
    while state.event_count < max_events:
        event = next_event(state)
        if state.t + event.time_increment >= T:
            state.t = T
            return state
        apply_event(state, event)
    state.budget_exhausted = True
    return state


def simulate(params, L, T, seed, *, schedule=None, max_events=10**10,
             validate_every=0, record_currents=False):
    """Fast event-driven run from an equilibrium start; returns SimState.

    ``schedule``: optional increasing times at which the bond-0 current
    (and with ``record_currents`` the full ledger and occupancies) is
    recorded; exposed on the returned state as ``snapshot_times``,
    ``snapshot_J0``, ``snapshot_events``, ``snapshot_J``,
    ``snapshot_occ``.  The trajectory followed is independent of the
    schedule.
    """
    from . import kernel

    res = kernel.run_trajectory(
        params, L, T, seed,
        schedule=schedule,
        max_events=max_events,
        validate_every=validate_every,
        dump_state=record_currents,
    )
    state = SimState(
        params=params,
        config=Configuration(res.occ_final, L, int(np.count_nonzero(res.occ_final[1:]))),
        ledger=CurrentLedger(res.J_final),
        t=res.t_final,
        rng=None,
        event_count=res.events_final,
        occupied=None,
        initial_occupancy=res.occ_initial,
        budget_exhausted=(res.status == kernel.STATUS_BUDGET),
    )
    state.snapshot_times = res.schedule
    state.snapshot_J0 = res.J0
    state.snapshot_events = res.events
    state.snapshot_J = res.J_snapshots
    state.snapshot_occ = res.occ_snapshots
    return state
