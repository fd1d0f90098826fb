"""Model parameters and the derived scaling constants.

All quantities that depend on (a, b, alpha, beta, n) are computed once,
here, and carried around as a frozen ``ModelParams``; the rest of the
package never re-derives them.
"""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ModelParams:
    """Microscopic and scaling parameters of the half-line zero-range process.

    Conventions: jump-left probability ``p_n = (1 + alpha_n)/2`` and
    jump-right probability ``q_n = (1 - alpha_n)/2`` with asymmetry
    ``alpha_n = a / n**alpha``; fugacity ``lambda_n = 1 - b / n**beta``;
    time is accelerated by ``n**theta``.  ``rho_n`` is the mean site
    occupancy of the geometric single-site law, ``lambda_n/(1-lambda_n)``.
    ``c_n`` and ``d_n`` are the finite-n transport and diffusion
    constants multiplying the field's first and second derivative
    channels in the martingale decomposition.
    """

    a: float
    b: float
    alpha: float
    beta: float
    n: int
    lambda_n: float
    alpha_n: float
    p_n: float
    q_n: float
    rho_n: float
    theta: float
    gamma: float
    c_n: float
    d_n: float

    @property
    def time_scale(self):
        """Event-rate acceleration factor n**theta."""
        return float(self.n) ** self.theta


def derive_params(a, b, alpha, beta, n):
    """Validate raw inputs and derive every dependent constant.

    Raises ValueError for inputs outside the admissible window:
    ``b >= n**beta`` (fugacity not in (0,1)), asymmetry so strong that
    the right-jump probability is nonpositive, or ``alpha < 1`` with
    ``a > 0``.  Decay exponents below 1 are excluded because there the
    transport constant cannot stay finite without the initial field
    diverging, so no scaling window exists.  ``a = 0`` switches the
    asymmetry off entirely and is accepted with any alpha (including
    ``math.inf``).
    """
    if a < 0:
        raise ValueError("asymmetry amplitude a must be >= 0")
    if b <= 0:
        raise ValueError("fugacity-deficit amplitude b must be > 0")
    if beta <= 0:
        raise ValueError("fugacity decay exponent beta must be > 0")
    if n < 1 or int(n) != n:
        raise ValueError("scaling parameter n must be a positive integer")
    n = int(n)
    if a > 0 and alpha < 1:
        raise ValueError(
            "asymmetry decay exponent alpha < 1 is outside the admissible "
            "scaling window (transport constant and initial field cannot "
            "both stay finite); use alpha >= 1, or a = 0 to disable the "
            "asymmetry"
        )
    if a == 0:
        alpha_n = 0.0
    else:
        alpha_n = a / float(n) ** alpha
    nbeta = float(n) ** beta
    if b >= nbeta:
        raise ValueError(
            f"need b < n**beta for a fugacity in (0,1); got b={b}, n**beta={nbeta}"
        )
    lambda_n = 1.0 - b / nbeta
    p_n = (1.0 + alpha_n) / 2.0
    q_n = (1.0 - alpha_n) / 2.0
    if q_n <= 0.0:
        raise ValueError(
            f"asymmetry alpha_n={alpha_n} >= 1 makes the right-jump "
            "probability nonpositive"
        )
    rho_n = lambda_n / (1.0 - lambda_n)
    theta = 2.0 + 2.0 * beta
    gamma = beta + 1.5
    c_n = b * b * alpha_n * float(n) ** (theta - 2.0 * beta - 1.0)
    d_n = 0.5 * b * b * float(n) ** (theta - 2.0 * beta - 2.0) * (1.0 + alpha_n)
    return ModelParams(
        a=float(a),
        b=float(b),
        alpha=float(alpha),
        beta=float(beta),
        n=n,
        lambda_n=lambda_n,
        alpha_n=alpha_n,
        p_n=p_n,
        q_n=q_n,
        rho_n=rho_n,
        theta=theta,
        gamma=gamma,
        c_n=c_n,
        d_n=d_n,
    )
