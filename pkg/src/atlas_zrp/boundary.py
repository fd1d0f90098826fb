"""Boundary-current statistics: variance growth, Hurst scaling and the
mollifier comparison between the boundary current and the field.

The recentred boundary current Jbar_t(0) is the discrete analogue of the
limit field paired with a mollifier phi_eps concentrated at the origin;
its variance grows like sqrt(t) (Hurst exponent 1/4) on the macroscopic
scale, and the squared gap between n**(1-gamma) Jbar_t(0) and
X_t(phi_eps) is of order eps.
"""

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import drift_rate
from .fields import choose_L, initial_field_term
from .kernel import ObserverPlan, run_trajectory
from .rng import derive_replica_seed
from .stats import fit_power_law, variance_with_stderr
from .testfn import TestFunction, _step_d1, _step_d2, _step_fast, _unit_bump_d2, _UNIT_BUMP_MASS


class MollifierFamily:
    """phi_eps(x) = phi(x/eps)/eps for the standard unit bump phi on (0,1).

    ``phi`` is exp(-1/(x(1-x))) normalised to unit mass, so the decay
    profile h_eps(x) = integral_x^inf phi_eps equals 1 at 0, vanishes
    beyond eps, and satisfies h_eps' = -phi_eps identically.
    """

    def __init__(self, eps):
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.eps = float(eps)

    def phi(self, x):
        x = np.asarray(x, dtype=np.float64)
        return _step_d1(x / self.eps) / self.eps

    def phi_p(self, x):
        x = np.asarray(x, dtype=np.float64)
        return _step_d2(x / self.eps) / self.eps**2

    def phi_pp(self, x):
        x = np.asarray(x, dtype=np.float64)
        return _unit_bump_d2(x / self.eps) / (_UNIT_BUMP_MASS * self.eps**3)

    def h(self, x):
        x = np.asarray(x, dtype=np.float64)
        return 1.0 - _step_fast(x / self.eps)

    def as_test_function(self):
        """phi_eps as a TestFunction; its antiderivative is F = -h_eps."""

        def F(u):
            return -(1.0 - _step_fast(u / self.eps))

        return TestFunction(
            f"mollifier(eps={self.eps})", self.phi, self.phi_p, self.phi_pp,
            support_right=self.eps, bc_class="unconstrained", F=F,
        )


def centered_J0(J0, params, times):
    """Jbar_t(0) series from raw snapshots."""
    return J0.astype(np.float64) + drift_rate(params) * np.asarray(times)


def boundary_current_variance(params, t_grid, replicas, master_seed, *, L=None):
    """Monte Carlo variance of Jbar_t(0) on a time grid.

    One trajectory per replica supplies the current at every grid time.
    Returns means, variances and variance standard errors per time.
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    T = float(t_grid[-1])
    if L is None:
        L = choose_L(params, T, boundary_stats=True)
    samples = np.empty((replicas, t_grid.size))
    for r in range(replicas):
        res = run_trajectory(params, L, T, derive_replica_seed(master_seed, r),
                             schedule=t_grid)
        samples[r] = centered_J0(res.J0[:t_grid.size], params, t_grid)
    means = samples.mean(axis=0)
    var = np.empty(t_grid.size)
    var_se = np.empty(t_grid.size)
    for k in range(t_grid.size):
        var[k], var_se[k] = variance_with_stderr(samples[:, k])
    return {
        "t": t_grid,
        "mean": means,
        "mean_stderr": samples.std(axis=0, ddof=1) / math.sqrt(replicas),
        "var": var,
        "var_stderr": var_se,
        "L": L,
        "replicas": replicas,
    }


def fit_variance_scaling(t_grid, var, var_stderr=None):
    """Log-log fit of a variance series against time."""
    return fit_power_law(t_grid, var, stderr=var_stderr)


def hurst_scaling(params, t_grid, replicas, master_seed, *, L=None):
    """Fitted growth exponent of Var[n**(1-gamma) Jbar_t(0)] versus t.

    Returns the power-law fit (slope = 2H) together with the variance
    table; slope 1/2 is the Hurst-1/4 signature of the limiting
    boundary current.
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid[-1] / t_grid[0] < 10.0 - 1e-9:
        raise ValueError("t_grid must span at least one decade")
    table = boundary_current_variance(params, t_grid, replicas, master_seed, L=L)
    scale = float(params.n) ** (2.0 * (1.0 - params.gamma))
    fit = fit_variance_scaling(t_grid, scale * table["var"],
                               scale * table["var_stderr"])
    return {"fit": fit, "table": table, "scale": scale}


def current_field_gap(params, eps_grid, t, replicas, master_seed, *,
                      L=None, min_resolution=8.0, identity_tol=1e-9):
    """Second moment of n**(1-gamma) Jbar_t(0) - X_t(phi_eps) per eps.

    One run per replica carries the channels of every eps.  For each
    snapshot the exact lattice identity

        n**(1-gamma) h_eps(1/n) Jbar_t(0) - X_t(phi_eps)
            = n**(1-gamma) sum_x etabar_t(x) h_eps(x/n) - Err_t,
        Err_t = n**-gamma sum_{x>=1} Jbar_t(x) (grad_x h_eps + phi_eps(x/n)),

    is verified to ``identity_tol`` (relative).  Mollifiers with
    n*eps below ``min_resolution`` are rejected; pass a smaller value
    explicitly to probe under-resolved scales.
    """
    eps_grid = list(eps_grid)
    n = params.n
    for eps in eps_grid:
        if n * eps < min_resolution:
            raise ValueError(
                f"mollifier eps={eps} unresolved at n={n} "
                f"(n*eps={n * eps:.2f} < {min_resolution}); lower "
                "min_resolution to force it"
            )
    if L is None:
        L = choose_L(params, t, max(eps_grid), boundary_stats=True)
    xs_sites = np.arange(1, L + 1) / n
    xs_bonds = np.arange(L + 1) / n
    fams = [MollifierFamily(eps) for eps in eps_grid]
    w_phi, w_err, w_h = [], [], []
    for fam in fams:
        w_phi.append(fam.phi(xs_bonds))
        grad_h = n * (fam.h((np.arange(L + 1) + 1) / n) - fam.h(xs_bonds))
        we = grad_h + fam.phi(xs_bonds)
        we[0] = 0.0  # bond 0 enters the identity through Jbar(0) itself
        w_err.append(we)
        wh = np.zeros(L + 1)
        wh[1:] = fam.h(xs_sites)
        w_h.append(wh)

    ngam = float(n) ** (-params.gamma)
    n1gam = float(n) ** (1.0 - params.gamma)
    drift = drift_rate(params)
    gaps = np.empty((replicas, len(eps_grid)))
    errs = np.empty((replicas, len(eps_grid)))
    eta_terms = np.empty((replicas, len(eps_grid)))
    worst_identity = 0.0
    for r in range(replicas):
        plan = ObserverPlan(L)
        for i in range(len(eps_grid)):
            plan.add_bond(f"phi{i}", w_phi[i])
            plan.add_bond(f"err{i}", w_err[i])
            plan.add_site_eta(f"h{i}", w_h[i])
        res = run_trajectory(params, L, t, derive_replica_seed(master_seed, r),
                             plan=plan)
        t_end = res.schedule[-1]
        J0bar = float(res.J0[-1]) + drift * t_end
        for i, fam in enumerate(fams):
            X_phi = (ngam * (res.bond_sum(f"phi{i}")[-1]
                             + drift * t_end * w_phi[i].sum())
                     + initial_field_term(res.occ_initial, params,
                                          lambda u, fam=fam: -fam.h(u)))
            err = ngam * (res.bond_sum(f"err{i}")[-1]
                          + drift * t_end * w_err[i].sum())
            eta_term = n1gam * res.site_eta_sum(f"h{i}")[-1]
            gap = n1gam * J0bar - X_phi
            lhs = n1gam * float(fam.h(1.0 / n)) * J0bar - X_phi
            rhs = eta_term - err
            scale = max(abs(lhs), abs(rhs), 1.0)
            worst_identity = max(worst_identity, abs(lhs - rhs) / scale)
            gaps[r, i] = gap
            errs[r, i] = err
            eta_terms[r, i] = eta_term
    if worst_identity > identity_tol:
        raise AssertionError(
            f"mollifier decomposition identity violated: {worst_identity:.3e}"
        )
    out = []
    for i, eps in enumerate(eps_grid):
        sq = gaps[:, i] ** 2
        err_sq = errs[:, i] ** 2
        out.append({
            "eps": eps,
            "gap_sq": float(sq.mean()),
            "gap_sq_stderr": float(sq.std(ddof=1) / math.sqrt(replicas)),
            "err_sq": float(err_sq.mean()),
            "err_sq_stderr": float(err_sq.std(ddof=1) / math.sqrt(replicas)),
        })
    return {
        "per_eps": out,
        "identity_error": worst_identity,
        "L": L,
        "replicas": replicas,
    }
