"""Compiled event loop with exact event-wise observable accumulation.

The loop reproduces the reference dynamics in :mod:`atlas_zrp.dynamics`
draw for draw (same stream, same consumption order, same occupied-index
discipline) while maintaining, in O(1) per event:

* weighted current sums        sum_x J(x) w(x/n)         (bond weights),
* weighted occupation sums     sum_x (g(eta(x)) - lam) w  and
                               sum_x (eta(x) - rho) w     (site weights),
* jump-bracket sums            sum_x g(eta(x)) w          (site weights,
  used for the martingale bracket with weights q f^2(x/n) + p f^2((x-1)/n)),
* the block-conditional sum    sum_x psi(S_x) F(x+1) over sliding blocks
  S_x = eta(x+1) + ... + eta(x+ell), with psi(S) = S/(S+ell-1),

together with their exact running time integrals (every sum is a step
function of time between events, so integrals accrue as value * dt with
no discretisation error).  Snapshots are emitted at caller-provided
schedule times; pending exponential waiting times are carried across
snapshot stops, so the trajectory does not depend on the schedule.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._compat import njit
from .model import sample_equilibrium
from .rng import RandomStream, _next_double

STATUS_DONE = 0
STATUS_BUDGET = 1
STATUS_CONTINUITY = 2


@njit(inline="always")
def _psi(S, ell):
    if S <= 0:
        return 0.0
    return S / (S + ell - 1.0)


@njit
def _run_loop(occ, occ0, occ_sites, occ_pos, K0, J, rng_state,
              L, rate_scale, p, q, lam, rho,
              schedule, max_events, validate_every,
              WJ, Wg, We, Wbr, blockF, ell, dump,
              out_SJ, out_IJ, out_Sg, out_Ig, out_Se, out_Ie,
              out_Sbr, out_Ibr, out_Upsi, out_IUpsi,
              out_J0, out_events, occ_dump, J_dump):
    nJ = WJ.shape[0]
    ng = Wg.shape[0]
    ne = We.shape[0]
    nq = Wbr.shape[0]
    nb = blockF.shape[0]
    ns = schedule.shape[0]

    SJ = np.zeros(nJ)
    IJ = np.zeros(nJ)
    Sg = np.zeros(ng)
    Ig = np.zeros(ng)
    Se = np.zeros(ne)
    Ie = np.zeros(ne)
    Sbr = np.zeros(nq)
    Ibr = np.zeros(nq)
    for w in range(ng):
        s = 0.0
        for z in range(1, L + 1):
            g = 1.0 if occ[z] > 0 else 0.0
            s += (g - lam) * Wg[w, z]
        Sg[w] = s
    for w in range(ne):
        s = 0.0
        for z in range(1, L + 1):
            s += (occ[z] - rho) * We[w, z]
        Se[w] = s
    for w in range(nq):
        s = 0.0
        for z in range(1, L + 1):
            if occ[z] > 0:
                s += Wbr[w, z]
        Sbr[w] = s

    S_block = np.zeros(nb, dtype=np.int64)
    Upsi = 0.0
    IUpsi = 0.0
    for x in range(nb):
        s = 0
        for y in range(x + 1, x + ell + 1):
            s += occ[y]
        S_block[x] = s
        Upsi += _psi(s, ell) * blockF[x]

    K = K0
    t_now = 0.0
    events = 0
    k = 0
    while True:
        rate = rate_scale * (K + lam)
        dt = -math.log1p(-_next_double(rng_state)) / rate
        t_next = t_now + dt

        while k < ns and t_next >= schedule[k]:
            d = schedule[k] - t_now
            if d > 0.0:
                for w in range(nJ):
                    IJ[w] += SJ[w] * d
                for w in range(ng):
                    Ig[w] += Sg[w] * d
                for w in range(ne):
                    Ie[w] += Se[w] * d
                for w in range(nq):
                    Ibr[w] += Sbr[w] * d
                IUpsi += Upsi * d
                t_now = schedule[k]
            for w in range(nJ):
                out_SJ[k, w] = SJ[w]
                out_IJ[k, w] = IJ[w]
            for w in range(ng):
                out_Sg[k, w] = Sg[w]
                out_Ig[k, w] = Ig[w]
            for w in range(ne):
                out_Se[k, w] = Se[w]
                out_Ie[k, w] = Ie[w]
            for w in range(nq):
                out_Sbr[k, w] = Sbr[w]
                out_Ibr[k, w] = Ibr[w]
            out_Upsi[k] = Upsi
            out_IUpsi[k] = IUpsi
            out_J0[k] = J[0]
            out_events[k] = events
            if dump:
                for z in range(L + 1):
                    occ_dump[k, z] = occ[z]
                    J_dump[k, z] = J[z]
            k += 1
        if k >= ns:
            return STATUS_DONE, t_now, events, K

        d = t_next - t_now
        for w in range(nJ):
            IJ[w] += SJ[w] * d
        for w in range(ng):
            Ig[w] += Sg[w] * d
        for w in range(ne):
            Ie[w] += Se[w] * d
        for w in range(nq):
            Ibr[w] += Sbr[w] * d
        IUpsi += Upsi * d
        t_now = t_next

        r = _next_double(rng_state) * (K + lam)
        src = 0
        dst = 0
        if r < lam * q:
            dst = 1
            bond = 0
            sign = 1
        elif r < lam:
            dst = L
            bond = L
            sign = -1
        else:
            slot = int(_next_double(rng_state) * K)
            z = occ_sites[slot]
            if _next_double(rng_state) < q:
                src = z
                if z == L:
                    bond = L
                    sign = 1
                else:
                    dst = z + 1
                    bond = z
                    sign = 1
            else:
                src = z
                if z == 1:
                    bond = 0
                    sign = -1
                else:
                    dst = z - 1
                    bond = z - 1
                    sign = -1

        if src > 0:
            occ[src] -= 1
            if occ[src] == 0:
                pos = occ_pos[src]
                last = occ_sites[K - 1]
                occ_sites[pos] = last
                occ_pos[last] = pos
                occ_pos[src] = -1
                K -= 1
                for w in range(ng):
                    Sg[w] -= Wg[w, src]
                for w in range(nq):
                    Sbr[w] -= Wbr[w, src]
            for w in range(ne):
                Se[w] -= We[w, src]
            if nb > 0:
                x0 = src - ell
                if x0 < 0:
                    x0 = 0
                x1 = src - 1
                if x1 > nb - 1:
                    x1 = nb - 1
                for x in range(x0, x1 + 1):
                    old = S_block[x]
                    S_block[x] = old - 1
                    Upsi += (_psi(old - 1, ell) - _psi(old, ell)) * blockF[x]
        if dst > 0:
            occ[dst] += 1
            if occ[dst] == 1:
                occ_sites[K] = dst
                occ_pos[dst] = K
                K += 1
                for w in range(ng):
                    Sg[w] += Wg[w, dst]
                for w in range(nq):
                    Sbr[w] += Wbr[w, dst]
            for w in range(ne):
                Se[w] += We[w, dst]
            if nb > 0:
                x0 = dst - ell
                if x0 < 0:
                    x0 = 0
                x1 = dst - 1
                if x1 > nb - 1:
                    x1 = nb - 1
                for x in range(x0, x1 + 1):
                    old = S_block[x]
                    S_block[x] = old + 1
                    Upsi += (_psi(old + 1, ell) - _psi(old, ell)) * blockF[x]

        J[bond] += sign
        for w in range(nJ):
            SJ[w] += sign * WJ[w, bond]
        events += 1

        if validate_every > 0 and events % validate_every == 0:
            for z in range(1, L + 1):
                if J[z - 1] - J[z] != occ[z] - occ0[z]:
                    return STATUS_CONTINUITY, t_now, events, K
        if events >= max_events:
            return STATUS_BUDGET, t_now, events, K


class ObserverPlan:
    """Named weight channels fed to the kernel.

    Bond weights pair with the raw current ledger; ``site_g`` with
    (g(eta) - lam); ``site_eta`` with (eta - rho); ``bracket`` with
    g(eta) alone.  Site-weight vectors have length L+1 with slot 0
    ignored; bond vectors have length L+1 indexed by bond 0..L.
    """

    def __init__(self, L):
        self.L = int(L)
        self.bond = {}
        self.site_g = {}
        self.site_eta = {}
        self.bracket = {}
        self.block_F = None
        self.block_len = 1

    def _store(self, table, name, weights):
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (self.L + 1,):
            raise ValueError(f"weight vector for {name!r} must have length L+1")
        if name in table:
            raise ValueError(f"duplicate channel name {name!r}")
        table[name] = w

    def add_bond(self, name, weights):
        self._store(self.bond, name, weights)

    def add_site_g(self, name, weights):
        self._store(self.site_g, name, weights)

    def add_site_eta(self, name, weights):
        self._store(self.site_eta, name, weights)

    def add_bracket(self, name, weights):
        self._store(self.bracket, name, weights)

    def set_blocks(self, block_F, block_len):
        block_F = np.asarray(block_F, dtype=np.float64)
        if block_len < 1:
            raise ValueError("block length must be >= 1")
        if block_F.size + block_len > self.L:
            raise ValueError("blocks overrun the truncation")
        self.block_F = block_F
        self.block_len = int(block_len)

    @staticmethod
    def _stack(table, L):
        if not table:
            return np.zeros((0, L + 1)), []
        names = list(table)
        return np.ascontiguousarray(np.stack([table[n] for n in names])), names


@dataclass
class RunResult:
    status: int
    t_final: float
    events_final: int
    schedule: np.ndarray
    J0: np.ndarray
    events: np.ndarray
    occ_initial: np.ndarray
    occ_final: np.ndarray
    J_final: np.ndarray
    occ_snapshots: np.ndarray = None
    J_snapshots: np.ndarray = None
    _names: dict = field(default_factory=dict, repr=False)
    _data: dict = field(default_factory=dict, repr=False)

    def _col(self, family, kind, name):
        names = self._names[family]
        if name not in names:
            raise KeyError(f"no {family} channel named {name!r}")
        return self._data[family + kind][:, names.index(name)]

    def bond_sum(self, name):
        return self._col("bond", "S", name)

    def bond_integral(self, name):
        return self._col("bond", "I", name)

    def site_g_sum(self, name):
        return self._col("site_g", "S", name)

    def site_g_integral(self, name):
        return self._col("site_g", "I", name)

    def site_eta_sum(self, name):
        return self._col("site_eta", "S", name)

    def site_eta_integral(self, name):
        return self._col("site_eta", "I", name)

    def bracket_sum(self, name):
        return self._col("bracket", "S", name)

    def bracket_integral(self, name):
        return self._col("bracket", "I", name)

    @property
    def block_sum(self):
        return self._data["blockS"]

    @property
    def block_integral(self):
        return self._data["blockI"]


def run_trajectory(params, L, T, seed, *, schedule=None, plan=None,
                   max_events=10**10, validate_every=0, dump_state=False,
                   initial_occupancy=None):
    """Run one trajectory from an equilibrium start (or a given one).

    The replica's random stream first draws the L initial occupancies,
    then feeds the event loop.  ``schedule`` lists snapshot times; T is
    appended when missing.  Returns a :class:`RunResult`.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    if schedule is None:
        sched = np.array([float(T)])
    else:
        sched = np.asarray(schedule, dtype=np.float64)
        if sched.ndim != 1 or sched.size == 0:
            raise ValueError("schedule must be a nonempty 1-d array")
        if np.any(np.diff(sched) <= 0):
            raise ValueError("schedule times must be strictly increasing")
        if sched[-1] > T:
            raise ValueError("schedule extends beyond T")
        if sched[-1] < T:
            sched = np.append(sched, float(T))
    stream = RandomStream(seed)
    if initial_occupancy is not None:
        occ = np.asarray(initial_occupancy, dtype=np.int64).copy()
        if occ.shape != (L + 1,) or occ[0] != 0 or np.any(occ < 0):
            raise ValueError("initial_occupancy must be a valid length-L+1 array")
    else:
        occ = sample_equilibrium(params, L, stream).occupancy
    occ0 = occ.copy()
    occupied = np.nonzero(occ[1:])[0] + 1
    K0 = occupied.size
    occ_sites = np.full(L, -1, dtype=np.int64)
    occ_sites[:K0] = occupied
    occ_pos = np.full(L + 1, -1, dtype=np.int64)
    occ_pos[occupied] = np.arange(K0)
    J = np.zeros(L + 1, dtype=np.int64)

    if plan is None:
        plan = ObserverPlan(L)
    WJ, bond_names = ObserverPlan._stack(plan.bond, L)
    Wg, g_names = ObserverPlan._stack(plan.site_g, L)
    We, eta_names = ObserverPlan._stack(plan.site_eta, L)
    Wbr, br_names = ObserverPlan._stack(plan.bracket, L)
    if plan.block_F is None:
        blockF = np.zeros(0)
        ell = 1
    else:
        blockF = plan.block_F
        ell = plan.block_len

    ns = sched.size
    out_SJ = np.zeros((ns, WJ.shape[0]))
    out_IJ = np.zeros((ns, WJ.shape[0]))
    out_Sg = np.zeros((ns, Wg.shape[0]))
    out_Ig = np.zeros((ns, Wg.shape[0]))
    out_Se = np.zeros((ns, We.shape[0]))
    out_Ie = np.zeros((ns, We.shape[0]))
    out_Sbr = np.zeros((ns, Wbr.shape[0]))
    out_Ibr = np.zeros((ns, Wbr.shape[0]))
    out_Upsi = np.zeros(ns)
    out_IUpsi = np.zeros(ns)
    out_J0 = np.zeros(ns, dtype=np.int64)
    out_events = np.zeros(ns, dtype=np.int64)
    if dump_state:
        occ_dump = np.zeros((ns, L + 1), dtype=np.int64)
        J_dump = np.zeros((ns, L + 1), dtype=np.int64)
    else:
        occ_dump = np.zeros((0, L + 1), dtype=np.int64)
        J_dump = np.zeros((0, L + 1), dtype=np.int64)

    with np.errstate(over="ignore"):
        status, t_final, events_final, _K = _run_loop(
            occ, occ0, occ_sites, occ_pos, K0, J, stream.state,
            L, params.time_scale, params.p_n, params.q_n,
            params.lambda_n, params.rho_n,
            sched, int(max_events), int(validate_every),
            WJ, Wg, We, Wbr, blockF, ell, bool(dump_state),
            out_SJ, out_IJ, out_Sg, out_Ig, out_Se, out_Ie,
            out_Sbr, out_Ibr, out_Upsi, out_IUpsi,
            out_J0, out_events, occ_dump, J_dump,
        )
    if status == STATUS_CONTINUITY:
        raise AssertionError(
            f"continuity check failed after {events_final} events (seed {seed})"
        )
    return RunResult(
        status=status,
        t_final=float(t_final),
        events_final=int(events_final),
        schedule=sched,
        J0=out_J0,
        events=out_events,
        occ_initial=occ0,
        occ_final=occ,
        J_final=J,
        occ_snapshots=occ_dump if dump_state else None,
        J_snapshots=J_dump if dump_state else None,
        _names={"bond": bond_names, "site_g": g_names,
                "site_eta": eta_names, "bracket": br_names},
        _data={"bondS": out_SJ, "bondI": out_IJ,
               "site_gS": out_Sg, "site_gI": out_Ig,
               "site_etaS": out_Se, "site_etaI": out_Ie,
               "bracketS": out_Sbr, "bracketI": out_Ibr,
               "blockS": out_Upsi, "blockI": out_IUpsi},
    )
