"""Smooth compactly supported test functions with exact calculus.

Everything is built from two analytic primitives, the symmetric bump
``exp(-1/(1-v^2))`` on (-1,1) and the smooth step obtained by
integrating the unit bump ``exp(-1/(s(1-s)))`` on (0,1), so that first
and second derivatives are closed-form.  The antiderivative
``F(u) = -integral_u^inf f`` is either analytic (when the function is
assembled from steps) or computed once by per-interval quadrature on a
fine grid and interpolated with a cubic spline.
"""

import math
from functools import cached_property

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

_EDGE = 1e-12
F_GRID_STEP = 1.0 / 512.0  # 1/(8 * n_max) with n_max = 64
QUAD_TOL = 1e-12
BC_TOL = 1e-10


def _as_array(u):
    arr = np.asarray(u, dtype=np.float64)
    return arr, (arr.ndim == 0)


def _ret(out, scalar):
    return float(out) if scalar else out


def _bump(v):
    out = np.zeros_like(v)
    m = np.abs(v) < 1.0 - _EDGE
    w = 1.0 - v[m] ** 2
    out[m] = np.exp(-1.0 / w)
    return out


def _bump_d1(v):
    out = np.zeros_like(v)
    m = np.abs(v) < 1.0 - _EDGE
    vm = v[m]
    w = 1.0 - vm**2
    out[m] = np.exp(-1.0 / w) * (-2.0 * vm) / w**2
    return out


def _bump_d2(v):
    out = np.zeros_like(v)
    m = np.abs(v) < 1.0 - _EDGE
    vm = v[m]
    w = 1.0 - vm**2
    out[m] = np.exp(-1.0 / w) * (
        4.0 * vm**2 / w**4 - 2.0 / w**2 - 8.0 * vm**2 / w**3
    )
    return out


def _unit_bump(s):
    out = np.zeros_like(s)
    m = (s > _EDGE) & (s < 1.0 - _EDGE)
    h = s[m] * (1.0 - s[m])
    out[m] = np.exp(-1.0 / h)
    return out


def _unit_bump_d1(s):
    out = np.zeros_like(s)
    m = (s > _EDGE) & (s < 1.0 - _EDGE)
    sm = s[m]
    h = sm * (1.0 - sm)
    out[m] = np.exp(-1.0 / h) * (1.0 - 2.0 * sm) / h**2
    return out


def _unit_bump_d2(s):
    out = np.zeros_like(s)
    m = (s > _EDGE) & (s < 1.0 - _EDGE)
    sm = s[m]
    h = sm * (1.0 - sm)
    d = 1.0 - 2.0 * sm
    out[m] = np.exp(-1.0 / h) * (d * d / h**4 - 2.0 / h**2 - 2.0 * d * d / h**3)
    return out


_UNIT_BUMP_MASS = quad(lambda s: math.exp(-1.0 / (s * (1.0 - s))), 0.0, 1.0,
                       epsabs=1e-15, epsrel=1e-13)[0]


def _step(s):
    """Smooth step: 0 for s<=0, 1 for s>=1, C-infinity monotone between."""
    out = np.zeros_like(s)
    out[s >= 1.0 - _EDGE] = 1.0
    m = (s > _EDGE) & (s < 1.0 - _EDGE)
    if np.any(m):
        vals = np.array(
            [quad(lambda r: math.exp(-1.0 / (r * (1.0 - r))), 0.0, si,
                  epsabs=1e-15, epsrel=1e-13)[0] for si in s[m]]
        )
        out[m] = vals / _UNIT_BUMP_MASS
    return out


def _step_d1(s):
    return _unit_bump(s) / _UNIT_BUMP_MASS


def _step_d2(s):
    return _unit_bump_d1(s) / _UNIT_BUMP_MASS


class _CachedStep:
    """Grid-cached smooth step so repeated evaluations avoid quadrature."""

    def __init__(self, points=2049):
        s = np.linspace(0.0, 1.0, points)
        self.spline = CubicSpline(s, _step(s))

    def __call__(self, s):
        out = np.zeros_like(s)
        out[s >= 1.0] = 1.0
        m = (s > 0.0) & (s < 1.0)
        out[m] = self.spline(s[m])
        return out


_STEP_CACHED = None


def _step_fast(s):
    global _STEP_CACHED
    if _STEP_CACHED is None:
        _STEP_CACHED = _CachedStep()
    return _STEP_CACHED(s)


class TestFunction:
    """A smooth compactly supported function together with f', f'' and F.

    ``F(u) = -integral_u^infty f(y) dy``, so F' = f and F vanishes at and
    beyond ``support_right``.  ``bc_class`` declares the boundary
    behaviour at 0: "neumann" (f'(0)=0), "robin" (f'(0)=kappa*f(0)) or
    "unconstrained".  Instances are immutable in use and safe to share.
    """

    def __init__(self, name, f, fp, fpp, support_right, bc_class="unconstrained",
                 kappa=None, F=None, verify=True):
        self.name = name
        self._f = f
        self._fp = fp
        self._fpp = fpp
        self.support_right = float(support_right)
        self.bc_class = bc_class
        self.kappa = kappa
        if bc_class == "robin" and kappa is None:
            raise ValueError("robin class needs kappa")
        self._F = F if F is not None else self._build_antiderivative()
        if verify:
            self.verify_invariants()

    # -- evaluation -------------------------------------------------
    def f(self, u):
        arr, scalar = _as_array(u)
        return _ret(self._f(np.atleast_1d(arr))[0] if scalar else self._f(arr), scalar)

    def fp(self, u):
        arr, scalar = _as_array(u)
        return _ret(self._fp(np.atleast_1d(arr))[0] if scalar else self._fp(arr), scalar)

    def fpp(self, u):
        arr, scalar = _as_array(u)
        return _ret(self._fpp(np.atleast_1d(arr))[0] if scalar else self._fpp(arr), scalar)

    def F(self, u):
        arr, scalar = _as_array(u)
        return _ret(self._F(np.atleast_1d(arr))[0] if scalar else self._F(arr), scalar)

    # -- construction helpers ---------------------------------------
    def _build_antiderivative(self):
        s_r = self.support_right
        grid = np.arange(0.0, s_r + F_GRID_STEP, F_GRID_STEP)
        if grid[-1] < s_r:
            grid = np.append(grid, s_r)
        grid[-1] = s_r
        pieces = np.array(
            [quad(lambda y: self.f(y), grid[i], grid[i + 1],
                  epsabs=QUAD_TOL, epsrel=1e-11)[0]
             for i in range(grid.size - 1)]
        )
        # F(grid[i]) = -(sum of integrals from grid[i] to the end)
        tails = -np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
        spline = CubicSpline(grid, tails)

        def F(u):
            out = np.zeros_like(u)
            m = u < s_r
            out[m] = spline(np.clip(u[m], 0.0, s_r))
            return out

        return F

    def verify_invariants(self):
        """Numerical self-checks: compact support, F' = f, derivative
        consistency by central differences, declared boundary class."""
        s_r = self.support_right
        for g in (self.f, self.fp, self.fpp, self.F):
            tail = np.abs(g(np.array([s_r, s_r * 1.01 + 0.1, s_r + 5.0])))
            if np.any(tail > 1e-9):
                raise AssertionError(f"{self.name}: support leaks past {s_r}")
        pts = np.linspace(0.0, s_r, 97)[1:-1]
        h = 1e-6 * max(1.0, s_r)
        scale = np.max(np.abs(self.f(pts))) + 1e-30
        fd_F = (self.F(pts + h) - self.F(pts - h)) / (2 * h)
        if np.max(np.abs(fd_F - self.f(pts))) > 1e-6 * scale + 1e-9:
            raise AssertionError(f"{self.name}: F' != f")
        fd_f = (self.f(pts + h) - self.f(pts - h)) / (2 * h)
        scale_p = np.max(np.abs(self.fp(pts))) + 1e-30
        if np.max(np.abs(fd_f - self.fp(pts))) > 1e-5 * scale_p:
            raise AssertionError(f"{self.name}: f' inconsistent")
        fd_fp = (self.fp(pts + h) - self.fp(pts - h)) / (2 * h)
        scale_pp = np.max(np.abs(self.fpp(pts))) + 1e-30
        if np.max(np.abs(fd_fp - self.fpp(pts))) > 1e-5 * scale_pp:
            raise AssertionError(f"{self.name}: f'' inconsistent")
        if self.bc_class == "neumann":
            if abs(self.fp(0.0)) > BC_TOL:
                raise AssertionError(f"{self.name}: f'(0)={self.fp(0.0)} not Neumann")
        elif self.bc_class == "robin":
            gap = abs(self.fp(0.0) - self.kappa * self.f(0.0))
            if gap > BC_TOL:
                raise AssertionError(f"{self.name}: Robin mismatch {gap}")

    # -- integrals and lattice tabulation ---------------------------
    @cached_property
    def sq_integral(self):
        """integral of f(u)^2 over the support."""
        return quad(lambda u: self.f(u) ** 2, 0.0, self.support_right,
                    epsabs=QUAD_TOL, epsrel=1e-11, limit=200)[0]

    @cached_property
    def F_sq_integral(self):
        """integral of F(u)^2 over the support."""
        return quad(lambda u: self.F(u) ** 2, 0.0, self.support_right,
                    epsabs=QUAD_TOL, epsrel=1e-11, limit=200)[0]

    def lattice(self, n, L, kind="f"):
        """Values at the lattice points x/n for x = 0..L."""
        xs = np.arange(L + 1) / n
        return {"f": self.f, "fp": self.fp, "fpp": self.fpp, "F": self.F}[kind](xs)


def make_bump(center, width, kind="neumann"):
    """C-infinity bump supported on [center-width, center+width], peak 1.

    The support must stay inside (0, infinity); such a function vanishes
    identically near the origin, so it satisfies every boundary class and
    ``kind`` only sets the declared label.
    """
    if width <= 0:
        raise ValueError("width must be positive")
    if center - width < 0:
        raise ValueError("bump support must stay inside [0, inf)")
    scale = math.e  # 1 / bump(0)
    c, w = float(center), float(width)

    def f(u):
        return scale * _bump((u - c) / w)

    def fp(u):
        return scale * _bump_d1((u - c) / w) / w

    def fpp(u):
        return scale * _bump_d2((u - c) / w) / w**2

    return TestFunction(f"bump(c={center},w={width})", f, fp, fpp,
                        support_right=c + w, bc_class=kind,
                        kappa=0.0 if kind == "robin" else None)


def make_robin_family(kappa, width):
    """Boundary test function g(u) = (1 + kappa*u) * plateau cutoff.

    The cutoff is identically 1 on [0, width/2] and decays smoothly to 0
    at ``width``, so g(0) = 1 and g'(0) = kappa exactly; kappa = 0 gives
    the Neumann member.
    """
    if width <= 0:
        raise ValueError("width must be positive")
    r1, r2 = width / 2.0, float(width)
    span = r2 - r1
    k = float(kappa)

    def chi(u):
        out = np.zeros_like(u)
        out[u <= r1] = 1.0
        m = (u > r1) & (u < r2)
        out[m] = 1.0 - _step_fast((u[m] - r1) / span)
        return out

    def chi_p(u):
        out = np.zeros_like(u)
        m = (u > r1) & (u < r2)
        out[m] = -_step_d1((u[m] - r1) / span) / span
        return out

    def chi_pp(u):
        out = np.zeros_like(u)
        m = (u > r1) & (u < r2)
        out[m] = -_step_d2((u[m] - r1) / span) / span**2
        return out

    def f(u):
        return (1.0 + k * u) * chi(u)

    def fp(u):
        return k * chi(u) + (1.0 + k * u) * chi_p(u)

    def fpp(u):
        return 2.0 * k * chi_p(u) + (1.0 + k * u) * chi_pp(u)

    bc = "neumann" if k == 0.0 else "robin"
    return TestFunction(f"robin(kappa={kappa},w={width})", f, fp, fpp,
                        support_right=r2, bc_class=bc,
                        kappa=None if k == 0.0 else k)


def make_balanced_wave(start=0.25, rise=0.75, plateau=2.75):
    """Test function whose antiderivative F is an exactly antisymmetric
    square wave: F climbs 0 -> +1 over [start, start+rise], holds, then
    crosses to -1 and returns to 0, with mirror symmetry that makes
    every odd moment of F vanish.  Used where the statistics of the
    initial field matter: the flat, sign-balanced F keeps the finite-n
    skewness of sums weighted by F at zero and the kurtosis bias small.

    f = F' is supplied analytically; F itself is closed-form from smooth
    steps, so no quadrature is involved.
    """
    if min(start, rise, plateau) <= 0:
        raise ValueError("start, rise and plateau must be positive")
    a1 = float(start)
    tau = float(rise)
    b1 = a1 + tau + float(plateau)
    c = b1 + tau / 2.0
    s_r = 2.0 * c - a1

    def pi1(u, d):
        # plateau bump: step up on [a1, a1+tau], down on [b1, b1+tau]
        if d == 0:
            return _step_fast((u - a1) / tau) - _step_fast((u - b1) / tau)
        if d == 1:
            return (_step_d1((u - a1) / tau) - _step_d1((u - b1) / tau)) / tau
        return (_step_d2((u - a1) / tau) - _step_d2((u - b1) / tau)) / tau**2

    def F(u):
        return pi1(u, 0) - pi1(2.0 * c - u, 0)

    def f(u):
        return pi1(u, 1) + pi1(2.0 * c - u, 1)

    def fp(u):
        return pi1(u, 2) - pi1(2.0 * c - u, 2)

    def fpp(u):
        # f'' is the third derivative of F: step pieces at bump-d2 depth
        def pi1_d3(u):
            return (_unit_bump_d2((u - a1) / tau)
                    - _unit_bump_d2((u - b1) / tau)) / (_UNIT_BUMP_MASS * tau**3)

        return pi1_d3(u) + pi1_d3(2.0 * c - u)

    return TestFunction(f"wave(start={start},rise={rise},plateau={plateau})",
                        f, fp, fpp, support_right=s_r, bc_class="neumann",
                        F=F)
