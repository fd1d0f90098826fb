"""Estimator utilities: power-law fits, goodness-of-fit, aggregation."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


@dataclass(frozen=True)
class Estimate:
    """A point estimate with its standard error."""

    value: float
    stderr: float
    count: int
    method: str = ""

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("standard error must be >= 0")

    def within(self, target, sigmas=3.0):
        return abs(self.value - target) <= sigmas * self.stderr


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    exponent_stderr: float
    ci95: tuple
    log_intercept: float
    npoints: int

    @property
    def prefactor(self):
        return math.exp(self.log_intercept)


def fit_power_law(xs, ys, stderr=None):
    """Weighted least squares for y = C * x**a in log-log coordinates.

    ``stderr`` are standard errors of ``ys``; they enter through the
    delta method (se of log y = stderr/y).  The 95% interval uses the
    t distribution with npoints-2 degrees of freedom.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size != ys.size:
        raise ValueError("xs and ys must have equal length")
    if xs.size < 3:
        raise ValueError("need at least 3 points for a power-law fit")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("power-law fit needs positive inputs")
    lx = np.log(xs)
    ly = np.log(ys)
    if stderr is not None:
        stderr = np.asarray(stderr, dtype=np.float64)
        if np.any(stderr < 0):
            raise ValueError("stderr must be >= 0")
        sigma = np.where(stderr > 0, stderr / ys, np.inf)
        if not np.any(np.isfinite(sigma)):
            sigma = np.ones_like(ly)
        finite_min = np.min(sigma[np.isfinite(sigma)])
        sigma = np.minimum(sigma, 1e6 * finite_min)
        w = 1.0 / sigma**2
        known_scale = True
    else:
        w = np.ones_like(ly)
        known_scale = False
    W = np.diag(w)
    X = np.column_stack([lx, np.ones_like(lx)])
    XtW = X.T @ W
    cov_unscaled = np.linalg.inv(XtW @ X)
    beta = cov_unscaled @ (XtW @ ly)
    resid = ly - X @ beta
    dof = xs.size - 2
    if known_scale:
        cov = cov_unscaled
    else:
        s2 = float(resid @ (w * resid)) / max(dof, 1)
        cov = cov_unscaled * s2
    se = math.sqrt(max(cov[0, 0], 0.0))
    tcrit = sps.t.ppf(0.975, dof) if dof > 0 else math.inf
    return PowerLawFit(
        exponent=float(beta[0]),
        exponent_stderr=se,
        ci95=(float(beta[0] - tcrit * se), float(beta[0] + tcrit * se)),
        log_intercept=float(beta[1]),
        npoints=int(xs.size),
    )


def chi_square_geometric(samples, lam, min_expected=5.0, min_samples=1000):
    """Chi-square test of i.i.d. samples against geometric(lam).

    Bins {0}, {1}, ..., {kmax} plus the tail {>= kmax+1}, with kmax the
    largest level keeping every expected count >= ``min_expected``.
    Returns (statistic, dof, pvalue).
    """
    samples = np.asarray(samples)
    N = samples.size
    if N < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {N}")
    if not 0.0 < lam < 1.0:
        raise ValueError("lam must lie in (0,1)")
    kmax = int(math.floor(math.log(min_expected / (N * (1.0 - lam)))
                          / math.log(lam))) if N * (1.0 - lam) > min_expected else 0
    kmax = max(kmax, 0)
    # shrink until the smallest cell (level kmax) and the tail both pass
    while kmax > 0 and (N * (1.0 - lam) * lam**kmax < min_expected
                        or N * lam ** (kmax + 1) < min_expected):
        kmax -= 1
    levels = np.arange(kmax + 1)
    expected = N * (1.0 - lam) * lam**levels
    tail_expected = N * lam ** (kmax + 1)
    observed = np.bincount(np.minimum(samples, kmax + 1).astype(np.int64),
                           minlength=kmax + 2).astype(np.float64)
    exp_all = np.append(expected, tail_expected)
    if np.any(exp_all < 1.0):
        raise ValueError("degenerate binning; increase the sample count")
    stat = float(np.sum((observed - exp_all) ** 2 / exp_all))
    dof = kmax + 1
    return stat, dof, float(sps.chi2.sf(stat, dof))


def fisher_combine(pvalues):
    """Fisher's combination of independent p-values."""
    ps = np.clip(np.asarray(pvalues, dtype=np.float64), 1e-300, 1.0)
    stat = -2.0 * float(np.sum(np.log(ps)))
    return float(sps.chi2.sf(stat, 2 * ps.size))


def variance_with_stderr(x):
    """Sample variance and its standard error (4th-moment formula)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 samples")
    s2 = float(x.var(ddof=1))
    m4 = float(np.mean((x - x.mean()) ** 4))
    se2 = (m4 - (n - 3) / (n - 1) * s2 * s2) / n
    return s2, math.sqrt(max(se2, 0.0))


def normality_pvalue(x):
    """Omnibus (skewness + kurtosis) normality test p-value."""
    return float(sps.normaltest(np.asarray(x, dtype=np.float64)).pvalue)


def correlation_z(x, y):
    """Pearson correlation and its Fisher z-statistic against 0."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size or x.size < 4:
        raise ValueError("need matched samples of size >= 4")
    sx = x.std()
    sy = y.std()
    if sx == 0.0 or sy == 0.0:
        return 0.0, 0.0
    r = float(np.corrcoef(x, y)[0, 1])
    r = max(min(r, 1.0 - 1e-12), -1.0 + 1e-12)
    z = math.atanh(r) * math.sqrt(x.size - 3)
    return r, z


def mean_estimate(x, method=""):
    x = np.asarray(x, dtype=np.float64)
    return Estimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)),
                    int(x.size), method)
