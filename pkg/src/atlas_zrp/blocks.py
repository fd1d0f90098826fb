"""Sliding-block statistics and the density-replacement error.

The first-order Boltzmann-Gibbs replacement swaps the centred occupation
indicator ``g(eta(x)) - lambda_n`` for its projection on the density,
``(1+rho_n)**-2 (eta(x) - rho_n)``, inside time-integrated weighted
sums.  This module estimates the second moment of the replacement error
and of its four-term block decomposition:

    g(x+1) - lam - (1+rho)^-2 (eta(x+1) - rho)
        =  [g(x+1) - gblock(x)]                          (term 1)
        +  [gblock(x) - psi(x)]                          (term 2)
        +  [psi(x) - lam - (1+rho)^-2 (etablock(x)-rho)] (term 3)
        +  (1+rho)^-2 [etablock(x) - eta(x+1)]           (term 4)

with gblock/etablock the averages over the block {x+1, ..., x+ell} and
psi(x) = E[g(eta(x+1)) | block sum].  For i.i.d. geometric marginals
every configuration of a block with fixed sum S is equally likely (the
weight lambda**S is composition-independent), so

    psi = P(eta(x+1) >= 1 | S) = S / (S + ell - 1),

independently of lambda.  Each term is accumulated event-wise and
exactly: terms 1 and 4 reduce to static reweightings of single-site
channels, terms 2 and 3 use the kernel's sliding-block channel.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from .kernel import ObserverPlan, run_trajectory
from .rng import derive_replica_seed


@dataclass(frozen=True)
class BlockStats:
    """Block averages at one location: sum S over ell sites, occupied
    fraction g_block, mean occupancy eta_block, conditional mean psi."""

    ell: int
    S: int
    g_block: float
    eta_block: float

    @property
    def psi(self):
        return conditional_occupancy_prob(self.S, self.ell)


def block_averages(config, x, ell):
    """Averages over the block {x+1, ..., x+ell}; requires x+ell <= L."""
    occ = config.occupancy if hasattr(config, "occupancy") else np.asarray(config)
    L = occ.shape[0] - 1
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if x < 0 or x + ell > L:
        raise ValueError(f"block ({x}, ell={ell}) overruns the truncation L={L}")
    window = occ[x + 1:x + ell + 1]
    S = int(window.sum())
    return BlockStats(
        ell=int(ell),
        S=S,
        g_block=float(np.count_nonzero(window)) / ell,
        eta_block=S / ell,
    )


def conditional_occupancy_prob(S, ell):
    """P(first block site occupied | block sum = S) = S/(S+ell-1).

    Conditionally on the sum, i.i.d. geometric sites are uniform over
    the weak compositions of S into ell parts; the fraction of
    compositions with a particle at a marked site is S/(S+ell-1).
    The empty case S=0 gives 0 (also for ell=1).
    """
    if S < 0 or ell < 1:
        raise ValueError("need S >= 0 and ell >= 1")
    if S == 0:
        return 0.0
    return S / (S + ell - 1.0)


def enumerate_conditional_occupancy(S, ell):
    """Brute-force oracle for the conditional mean, as an exact Fraction.

    Enumerates every weak composition of S into ell ordered parts
    (all equally likely) and averages the indicator of the first part
    being positive.  Exponential in S+ell; keep S+ell small.
    """
    if S < 0 or ell < 1:
        raise ValueError("need S >= 0 and ell >= 1")
    if S == 0:
        return Fraction(0)
    total = 0
    occupied = 0
    # weak compositions via bars placement: positions of ell-1 dividers
    # among S + ell - 1 slots
    for bars in combinations(range(S + ell - 1), ell - 1):
        first = bars[0] if bars else S + ell - 1
        # first part size = index of first bar
        total += 1
        if first > 0:
            occupied += 1
    return Fraction(occupied, total)


def _weight_vector(tf, params, L, weight_kind):
    """Site weights F_n(z), z = 1..L (slot 0 zero).

    "gradient": F_n(z) = n*(f(z/n) - f((z-1)/n)) (the discrete gradient
    at z-1, the weight in front of the field's first-derivative channel);
    "plain": F_n(z) = f(z/n).
    """
    n = params.n
    w = np.zeros(L + 1)
    zs = np.arange(1, L + 1)
    if weight_kind == "gradient":
        w[1:] = n * (tf.f(zs / n) - tf.f((zs - 1) / n))
    elif weight_kind == "plain":
        w[1:] = tf.f(zs / n)
    else:
        raise ValueError(f"unknown weight kind {weight_kind!r}")
    return w


def weight_normalization(weights, n):
    """C(F) check value: (1/n) * sum_z F_n(z)**2 (must be finite/moderate)."""
    return float(np.dot(weights, weights)) / n


def replacement_error_moment(params, tf, t, replicas, master_seed, *,
                             weight_kind="gradient", L=None, min_replicas=2):
    """Second moment of the time-integrated replacement error.

    Per replica the exact integral
        int_0^t sum_z { g(eta_s(z)) - lam - (1+rho)^-2 (eta_s(z)-rho) } F_n(z) ds
    is accumulated event-wise; returns mean of squares, its standard
    error, and the weight normalization.
    """
    if replicas < min_replicas:
        raise ValueError("not enough replicas for a variance estimate")
    from .fields import choose_L

    if L is None:
        L = choose_L(params, t, tf.support_right)
    w = _weight_vector(tf, params, L, weight_kind)
    inv2 = (1.0 - params.lambda_n) ** 2  # (1+rho_n)^-2, exactly b^2 n^-2beta
    vals = np.empty(replicas)
    for r in range(replicas):
        plan = ObserverPlan(L)
        plan.add_site_g("w", w)
        plan.add_site_eta("w", w)
        res = run_trajectory(params, L, t, derive_replica_seed(master_seed, r),
                             plan=plan)
        integral = res.site_g_integral("w")[-1] - inv2 * res.site_eta_integral("w")[-1]
        vals[r] = integral * integral
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(replicas))
    return {
        "estimate": mean,
        "stderr": stderr,
        "weight_norm": weight_normalization(w, params.n),
        "squares": vals,
    }


def replacement_term_moments(params, tf, t, ell, replicas, master_seed, *,
                             weight_kind="gradient", L=None):
    """Second moments of the four decomposition terms (time-integrated).

    Also verifies, replica by replica, that the four exact accumulators
    telescope to the directly accumulated replacement error; the maximal
    relative mismatch is reported as ``identity_error``.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    from .fields import choose_L

    if L is None:
        L = choose_L(params, t, tf.support_right) + int(ell) + 2
    n = params.n
    nb = math.ceil(n * tf.support_right) + 1
    if nb + ell > L:
        raise ValueError("blocks overrun the truncation; enlarge L")
    full = _weight_vector(tf, params, L, weight_kind)
    blockF = np.array([full[x + 1] for x in range(nb)])
    # w1: weight F_n(x+1) carried by site x+1 itself
    w1 = np.zeros(L + 1)
    w1[1:nb + 1] = blockF
    # wt: site z collects (1/ell) * sum of blockF over blocks containing z
    wt = np.zeros(L + 1)
    for z in range(1, nb + ell + 1):
        x0 = max(0, z - ell)
        x1 = min(nb - 1, z - 1)
        if x1 >= x0:
            wt[z] = blockF[x0:x1 + 1].sum() / ell
    SF = float(blockF.sum())
    inv2 = (1.0 - params.lambda_n) ** 2
    lam = params.lambda_n

    sq = np.zeros((replicas, 4))
    identity_err = 0.0
    for r in range(replicas):
        plan = ObserverPlan(L)
        plan.add_site_g("w1", w1)
        plan.add_site_g("wt", wt)
        plan.add_site_eta("w1", w1)
        plan.add_site_eta("wt", wt)
        plan.set_blocks(blockF, ell)
        res = run_trajectory(params, L, t, derive_replica_seed(master_seed, r),
                             plan=plan)
        Ig1 = res.site_g_integral("w1")[-1]
        Igt = res.site_g_integral("wt")[-1]
        Ie1 = res.site_eta_integral("w1")[-1]
        Iet = res.site_eta_integral("wt")[-1]
        Ipsi = res.block_integral[-1]
        t_end = res.schedule[-1]
        T1 = Ig1 - Igt
        T2 = Igt + lam * SF * t_end - Ipsi
        T3 = Ipsi - lam * SF * t_end - inv2 * Iet
        T4 = inv2 * (Iet - Ie1)
        total = Ig1 - inv2 * Ie1
        scale = max(abs(total), abs(T1), abs(T2), abs(T3), abs(T4), 1e-30)
        identity_err = max(identity_err,
                           abs((T1 + T2 + T3 + T4) - total) / scale)
        sq[r] = [T1 * T1, T2 * T2, T3 * T3, T4 * T4]
    means = sq.mean(axis=0)
    stderrs = sq.std(axis=0, ddof=1) / math.sqrt(replicas)
    return {
        "terms": [
            {"estimate": float(means[i]), "stderr": float(stderrs[i])}
            for i in range(4)
        ],
        "identity_error": float(identity_err),
        "ell": int(ell),
        "weight_norm": weight_normalization(full, n),
    }
