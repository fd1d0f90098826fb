"""Semi-implicit solver for the limiting stochastic heat equation.

Target equation on the half-line (drift A >= 0, diffusion B > 0):

    dX = (B * Laplacian(X) - A * Gradient(X)) dt + sqrt(2) dW,

with a Neumann (X'(0) = 0) or Robin (X'(0) = kappa X(0)) boundary at 0,
discretised on cell centers (i + 1/2) h by ghost cells:

    Neumann: X[-1] = X[0];     Robin: X[-1] = X[0] (1 - kappa h)/(1 + kappa h).

Diffusion is implicit (unconditionally stable), advection explicit and
upwinded for the leftward transport (the equation reads
dX/dt + A dX/dx = ..., so characteristics run toward the origin), noise
is cylindrical: independent cell increments of variance 2 tau / h.  The
far end at M carries a homogeneous Neumann ghost and must sit several
supports away from every test function.

``martingale_residual`` and ``qv_estimate`` are shared diagnostics: the
residual R_t = X_t(f) - X_0(f) + A I1(t) - B I2(t) applies verbatim to
particle-field traces (with the finite-n constants c_n, d_n in place of
A, B), and the bracket estimator integrates the particle jump rates
behind the field martingale.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .fields import FieldTrace, observe_fields
from .rng import derive_replica_seed


@dataclass(frozen=True)
class SpdeParams:
    A: float
    B: float
    bc: str = "neumann"
    kappa: float = 0.0
    h: float = 0.02
    M: float = 4.0
    tau: float = 1e-4

    def __post_init__(self):
        if self.B <= 0:
            raise ValueError("diffusion coefficient B must be positive")
        if self.A < 0:
            raise ValueError("drift coefficient A must be >= 0 (leftward transport)")
        if self.h <= 0 or self.tau <= 0:
            raise ValueError("h and tau must be positive")
        if self.M < 4 * self.h:
            raise ValueError("domain must span at least a few cells")
        if self.bc not in ("neumann", "robin"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        if self.bc == "robin" and self.kappa * self.h >= 1.0:
            raise ValueError("kappa*h >= 1: ghost-cell closure degenerates")
        if self.A * self.tau > self.h + 1e-15:
            raise ValueError("advection CFL violated: need A*tau <= h")
        n_cells = self.M / self.h
        if abs(n_cells - round(n_cells)) > 1e-9:
            raise ValueError("M must be an integer multiple of h")

    @property
    def n_cells(self):
        return int(round(self.M / self.h))

    @property
    def ghost_ratio(self):
        """X[-1] = ghost_ratio * X[0]."""
        if self.bc == "neumann":
            return 1.0
        kh = self.kappa * self.h
        return (1.0 - kh) / (1.0 + kh)

    @property
    def centers(self):
        return (np.arange(self.n_cells) + 0.5) * self.h


@dataclass
class GridField:
    """Cell-averaged field values at one time."""

    values: np.ndarray
    t: float
    h: float


@dataclass
class BandedOperator:
    """Tridiagonal operator: sub/main/super diagonals of length N-1/N/N-1."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def apply(self, X):
        out = self.diag * X
        out[:-1] += self.sup * X[1:]
        out[1:] += self.sub * X[:-1]
        return out

    def solver_bands(self, shift, scale):
        """(3, N) banded matrix of shift*I + scale*Op for solve_banded."""
        N = self.diag.size
        ab = np.zeros((3, N))
        ab[0, 1:] = scale * self.sup
        ab[1, :] = shift + scale * self.diag
        ab[2, :-1] = scale * self.sub
        return ab


def _diffusion_operator(sp):
    N = sp.n_cells
    B = sp.B
    h2 = sp.h * sp.h
    diag = np.full(N, -2.0 * B / h2)
    sub = np.full(N - 1, B / h2)
    sup = np.full(N - 1, B / h2)
    diag[0] = -(2.0 - sp.ghost_ratio) * B / h2
    diag[-1] = -B / h2  # far Neumann ghost
    return BandedOperator(sub, diag, sup)


def _advection_operator(sp):
    # dX/dt = ... - A * dX/dx with leftward characteristics: upwind uses
    # the right neighbour, (X[i+1] - X[i]) / h; the far ghost equals the
    # last cell, so the last row vanishes.
    N = sp.n_cells
    a = sp.A / sp.h
    diag = np.full(N, a)
    sup = np.full(N - 1, -a)
    diag[-1] = 0.0
    return BandedOperator(np.zeros(N - 1), diag, sup)


def build_operator(sp):
    """Full spatial operator B*Laplacian - A*Gradient as a banded matrix."""
    dif = _diffusion_operator(sp)
    adv = _advection_operator(sp)
    return BandedOperator(dif.sub - adv.sub, dif.diag - adv.diag,
                          dif.sup - adv.sup)


@dataclass
class SpdeTrajectory:
    params: SpdeParams
    times: np.ndarray
    traces: list
    final: GridField
    fields: list = field(default_factory=list)


def integrate_she(sp, X0, T, seed, *, fs=(), save_times=None, noise=True,
                  keep_fields=False, blowup=1e12):
    """Semi-implicit Euler-Maruyama run; deterministic given ``seed``.

    ``fs`` are TestFunctions paired against the field by midpoint
    quadrature; their X(f), I1 = int X(f') and I2 = int X(f'') series are
    returned as :class:`FieldTrace` objects (trapezoidal in the step
    size tau, which is exact enough for the O(tau) scheme).
    """
    N = sp.n_cells
    if np.isscalar(X0) or X0 is None:
        X = np.full(N, 0.0 if X0 is None else float(X0))
    else:
        X = np.asarray(X0, dtype=np.float64).copy()
        if X.shape != (N,):
            raise ValueError(f"X0 must have {N} cells")
    nsteps = int(round(T / sp.tau))
    if abs(nsteps * sp.tau - T) > 1e-9 * max(T, 1.0):
        raise ValueError("T must be an integer multiple of tau")
    if save_times is None:
        save_steps = [nsteps]
    else:
        save_steps = [int(round(t / sp.tau)) for t in save_times]
        for t, s in zip(save_times, save_steps):
            if abs(s * sp.tau - t) > 1e-9 * max(T, 1.0):
                raise ValueError(f"save time {t} is not a step multiple")
        if save_steps != sorted(save_steps) or len(set(save_steps)) != len(save_steps):
            raise ValueError("save times must be strictly increasing")
    centers = sp.centers
    for tf in fs:
        if tf.support_right > sp.M - 4 * sp.h:
            raise ValueError(f"support of {tf.name} too close to the far boundary")
    wf = [tf.f(centers) * sp.h for tf in fs]
    wfp = [tf.fp(centers) * sp.h for tf in fs]
    wfpp = [tf.fpp(centers) * sp.h for tf in fs]

    dif = _diffusion_operator(sp)
    ab = dif.solver_bands(1.0, -sp.tau)
    adv = _advection_operator(sp) if sp.A != 0.0 else None
    rng = np.random.default_rng(seed)
    sigma = math.sqrt(2.0 * sp.tau / sp.h)

    nf = len(fs)
    Xf = np.array([np.dot(w, X) for w in wf])
    Xfp = np.array([np.dot(w, X) for w in wfp])
    Xfpp = np.array([np.dot(w, X) for w in wfpp])
    I1 = np.zeros(nf)
    I2 = np.zeros(nf)
    X0f = Xf.copy()
    nsave = len(save_steps)
    out_X = np.zeros((nsave, nf))
    out_I1 = np.zeros((nsave, nf))
    out_I2 = np.zeros((nsave, nf))
    out_t = np.array([s * sp.tau for s in save_steps])
    saved_fields = []
    save_idx = 0
    if save_steps and save_steps[0] == 0:
        out_X[0] = Xf
        if keep_fields:
            saved_fields.append(GridField(X.copy(), 0.0, sp.h))
        save_idx = 1

    for k in range(1, nsteps + 1):
        rhs = X.copy()
        if adv is not None:
            rhs -= sp.tau * adv.apply(X)
        if noise:
            rhs += sigma * rng.standard_normal(N)
        X = solve_banded((1, 1), ab, rhs)
        if not np.all(np.isfinite(X)) or np.max(np.abs(X)) > blowup:
            raise RuntimeError(
                f"integration blew up at step {k} (t={k * sp.tau:.6g}); "
                f"max|X|={np.max(np.abs(X)):.3g}"
            )
        new_Xfp = np.array([np.dot(w, X) for w in wfp])
        new_Xfpp = np.array([np.dot(w, X) for w in wfpp])
        I1 += 0.5 * sp.tau * (Xfp + new_Xfp)
        I2 += 0.5 * sp.tau * (Xfpp + new_Xfpp)
        Xfp, Xfpp = new_Xfp, new_Xfpp
        if save_idx < nsave and k == save_steps[save_idx]:
            Xf = np.array([np.dot(w, X) for w in wf])
            out_X[save_idx] = Xf
            out_I1[save_idx] = I1
            out_I2[save_idx] = I2
            if keep_fields:
                saved_fields.append(GridField(X.copy(), k * sp.tau, sp.h))
            save_idx += 1

    traces = [
        FieldTrace(
            f_id=fs[i].name, bc_class=fs[i].bc_class, times=out_t.copy(),
            X=out_X[:, i], I1=out_I1[:, i], I2=out_I2[:, i], X0=float(X0f[i]),
            meta={"h": sp.h, "tau": sp.tau, "seed": seed},
        )
        for i in range(nf)
    ]
    return SpdeTrajectory(params=sp, times=out_t, traces=traces,
                          final=GridField(X, nsteps * sp.tau, sp.h),
                          fields=saved_fields)


def martingale_residual(trace, A, B):
    """R_t = X_t(f) - X_0(f) + A*I1(t) - B*I2(t); stored on the trace.

    For particle traces pass the finite-n constants (c_n, d_n); for SPDE
    traces pass the equation's (A, B).
    """
    if trace.I1 is None or trace.I2 is None:
        raise ValueError("trace lacks integral channels")
    R = trace.X - trace.X0 + A * trace.I1 - B * trace.I2
    trace.residual = R
    return R


def residual_for_params(trace, params):
    """Particle-trace residual with the exact finite-n constants."""
    return martingale_residual(trace, params.c_n, params.d_n)


def qv_estimate(params, tf, t, replicas, master_seed, *, L=None, schedule=None):
    """Mean and spread of the field-martingale bracket at time t.

    The bracket integrand n**(theta-2gamma) * sum_x [q g(eta(x)) +
    p g(eta(x+1))] f(x/n)^2 (with the boundary convention g(eta(0)) =
    lambda_n) is piecewise constant between events and accumulated
    exactly; replicas differ only in their derived seeds.
    """
    from .fields import choose_L

    if L is None:
        L = choose_L(params, t, tf.support_right)
    vals = np.empty(replicas)
    for r in range(replicas):
        traces, _ = observe_fields(
            params, L, t, derive_replica_seed(master_seed, r), [tf],
            schedule=schedule, qv=True,
        )
        vals[r] = traces[0].qv[-1]
    return {
        "mean": float(vals.mean()),
        "stderr": float(vals.std(ddof=1) / math.sqrt(replicas)),
        "values": vals,
    }
