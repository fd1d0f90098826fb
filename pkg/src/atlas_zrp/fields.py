"""Fluctuation fields of the current and their exact running integrals.

Definitions (gamma = beta + 3/2, drift rate = n**theta*alpha_n*lambda_n):

* current field      Z_t(f) = n**-gamma * sum_x Jbar_t(x) f(x/n),
  summed over bonds x >= 0, with Jbar the recentred current;
* corrected field    X_t(f) = Z_t(f)
                      + n**(1-gamma) * sum_{x>=1} (eta_0(x)-rho) F(x/n);
* running integrals  I1(t) = int_0^t X_s(f') ds,
                     I2(t) = int_0^t X_s(f'') ds.

Between events the raw current sums are constant and the recentring term
is linear in time, so the kernel's exact per-event accumulation plus the
closed-form drift contribution reproduces the integrals with no
quadrature error.  The antiderivative of f' is f and of f'' is f', which
fixes the initial-field term of X(f') and X(f'').
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import CurrentLedger, drift_rate
from .kernel import ObserverPlan, run_trajectory


def discrete_gradient(f, n, x):
    """n * (f((x+1)/n) - f(x/n)); accepts a callable or TestFunction."""
    fn = f.f if hasattr(f, "f") else f
    x = np.asarray(x)
    if np.any(x < 0):
        raise ValueError("gradient needs x >= 0")
    return n * (fn((x + 1) / n) - fn(x / n))


def discrete_laplacian(f, n, x):
    """n**2 * (f((x+1)/n) - 2 f(x/n) + f((x-1)/n)); needs x >= 1."""
    fn = f.f if hasattr(f, "f") else f
    x = np.asarray(x)
    if np.any(x < 1):
        raise ValueError("laplacian needs x >= 1")
    return n * n * (fn((x + 1) / n) - 2.0 * fn(x / n) + fn((x - 1) / n))


def choose_L(params, T, support_right=0.0, margin_factor=2.0,
             boundary_stats=False, diffusion_margin=4.0, min_L=16):
    """Truncation length rule.

    Base rule: L = ceil(n * support * (1 + margin_factor)), so the
    reservoir sits ``margin_factor`` supports away from every observable.
    When the statistic of interest lives at the boundary bond
    (``boundary_stats``), additionally keep the reservoir several
    diffusive lengths sqrt(T * n**theta) away over the whole run.
    """
    n = params.n
    L = math.ceil(n * support_right * (1.0 + margin_factor))
    if boundary_stats:
        span = diffusion_margin * math.sqrt(max(T, 0.0) * params.time_scale)
        L = max(L, math.ceil(n * support_right + span))
    return max(L, min_L)


def initial_field_term(occ0, params, antiderivative):
    """n**(1-gamma) * sum_{x>=1} (eta_0(x) - rho_n) * G(x/n) for G = antiderivative."""
    L = occ0.shape[0] - 1
    xs = np.arange(1, L + 1) / params.n
    g = antiderivative.F(xs) if hasattr(antiderivative, "F") else antiderivative(xs)
    centered = occ0[1:].astype(np.float64) - params.rho_n
    return float(params.n) ** (1.0 - params.gamma) * float(np.dot(centered, g))


def _ledger_array(ledger):
    return ledger.J if isinstance(ledger, CurrentLedger) else np.asarray(ledger)


def _check_support(tf, params, L):
    if math.ceil(params.n * tf.support_right) > L:
        raise ValueError(
            f"support of {tf.name} (right edge {tf.support_right}) exceeds "
            f"the truncation L={L} at n={params.n}"
        )


def current_field(ledger, params, t, tf):
    """Z_t(f), evaluated exactly from the ledger."""
    J = _ledger_array(ledger)
    L = J.shape[0] - 1
    _check_support(tf, params, L)
    w = tf.lattice(params.n, L, "f")
    total = float(np.dot(J, w)) + drift_rate(params) * t * float(np.sum(w))
    return float(params.n) ** (-params.gamma) * total


def corrected_field(ledger, occ0, params, t, tf):
    """X_t(f) = Z_t(f) + initial-field term built from F."""
    return current_field(ledger, params, t, tf) + initial_field_term(occ0, params, tf)


def density_field(config, params, weight):
    """Unscaled sum_x (eta(x) - rho_n) * w(x/n); callers apply their scaling."""
    occ = config.occupancy if hasattr(config, "occupancy") else np.asarray(config)
    L = occ.shape[0] - 1
    xs = np.arange(1, L + 1) / params.n
    wfn = weight.f if hasattr(weight, "f") else weight
    return float(np.dot(occ[1:].astype(np.float64) - params.rho_n, wfn(xs)))


def bracket_weights(tf, params, L):
    """Site weights whose g-sum is the jump bracket of the field martingale.

    Site z contributes q*f^2(z/n) (jumps right across bond z) plus
    p*f^2((z-1)/n) (jumps left across bond z-1); the boundary channel at
    bond 0 contributes the constant lambda*q*f^2(0) handled separately.
    """
    n = params.n
    w = np.zeros(L + 1)
    zs = np.arange(1, L + 1)
    f2 = tf.f(zs / n) ** 2
    f2m = tf.f((zs - 1) / n) ** 2
    w[1:] = params.q_n * f2 + params.p_n * f2m
    return w


@dataclass
class FieldTrace:
    """Time series of one test function along one trajectory."""

    f_id: str
    bc_class: str
    times: np.ndarray
    X: np.ndarray
    I1: np.ndarray
    I2: np.ndarray
    X0: float
    qv: np.ndarray = None
    residual: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def rows(self, replica):
        """(replica, t, f_id, X, I1, I2, residual) rows for serialization."""
        res = self.residual if self.residual is not None else np.full_like(self.X, np.nan)
        for k in range(self.times.size):
            yield (replica, self.times[k], self.f_id, self.X[k],
                   self.I1[k], self.I2[k], res[k])


def observe_fields(params, L, T, seed, tfs, *, schedule=None, qv=False,
                   dump_state=False, max_events=10**10, validate_every=0,
                   initial_occupancy=None):
    """Run one trajectory and evaluate X(f), I1, I2 for every test function.

    Returns ``(traces, result)`` where ``result`` is the kernel
    :class:`RunResult` (exposes snapshots of the raw sums for
    cross-checks).  All integrals are exact for the jump dynamics.
    """
    plan = ObserverPlan(L)
    for i, tf in enumerate(tfs):
        _check_support(tf, params, L)
        plan.add_bond(f"f{i}", tf.lattice(params.n, L, "f"))
        plan.add_bond(f"fp{i}", tf.lattice(params.n, L, "fp"))
        plan.add_bond(f"fpp{i}", tf.lattice(params.n, L, "fpp"))
        if qv:
            plan.add_bracket(f"br{i}", bracket_weights(tf, params, L))
    result = run_trajectory(
        params, L, T, seed, schedule=schedule, plan=plan,
        max_events=max_events, validate_every=validate_every,
        dump_state=dump_state, initial_occupancy=initial_occupancy,
    )
    sched = result.schedule
    n = params.n
    ngamma = float(n) ** (-params.gamma)
    drift = drift_rate(params)
    traces = []
    for i, tf in enumerate(tfs):
        wf = tf.lattice(n, L, "f")
        wfp = tf.lattice(n, L, "fp")
        wfpp = tf.lattice(n, L, "fpp")
        init_F = initial_field_term(result.occ_initial, params, tf.F)
        init_f = initial_field_term(result.occ_initial, params, tf.f)
        init_fp = initial_field_term(result.occ_initial, params, tf.fp)
        X = ngamma * (result.bond_sum(f"f{i}")
                      + drift * sched * wf.sum()) + init_F
        I1 = (ngamma * (result.bond_integral(f"fp{i}")
                        + drift * sched**2 / 2.0 * wfp.sum())
              + sched * init_f)
        I2 = (ngamma * (result.bond_integral(f"fpp{i}")
                        + drift * sched**2 / 2.0 * wfpp.sum())
              + sched * init_fp)
        trace = FieldTrace(
            f_id=tf.name, bc_class=tf.bc_class, times=sched.copy(),
            X=X, I1=I1, I2=I2, X0=init_F,
            meta={"n": n, "L": L, "seed": seed},
        )
        if qv:
            const = params.lambda_n * params.q_n * tf.f(0.0) ** 2
            scale = float(n) ** (params.theta - 2.0 * params.gamma)
            trace.qv = scale * (result.bracket_integral(f"br{i}") + const * sched)
        traces.append(trace)
    return traces, result
