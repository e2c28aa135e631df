"""Evaluators for the Berry-Esseen bound formulas and related checks.

All bounds are stated up to unknown absolute constants, so each evaluator
takes an explicit multiplicative constant ``c`` (default 1) and is linear in
it.  What can be checked numerically is scaling in ``n``, ``d`` and the moment
parameters, plus the one closed-form integral inequality used in the proofs.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import InvalidInput, QuadratureFailure
from .spectral import as_symmetric

__all__ = [
    "log_plus",
    "MomentStats",
    "BoundReport",
    "RateFit",
    "SteinCheck",
    "bound_t1",
    "bound_t2",
    "bound_t3",
    "bound_t4",
    "kappa_markov",
    "kappa_statement",
    "smooth_derivative_bound",
    "gaussian_max_moment_bound",
    "gaussian_max_tail_radius",
    "gaussian_comparison_bound",
    "anti_concentration_bound",
    "auxiliary_bounds",
    "stein_integral_check",
    "stein_integral_closed_form",
    "rate_fit",
]


def log_plus(d):
    return max(1.0, math.log(d))


@dataclass(frozen=True)
class MomentStats:
    """Scalar hypotheses feeding the bound evaluators.

    ``M`` is the moment-ratio constant, ``alpha``/``beta`` the lower/upper
    conditional covariance bounds, ``gamma`` the third-moment scale with
    ``E||X_k||^3 <= (gamma log_+ d)^{3/2}``.  The ``*_sigma`` fields describe
    the average covariance ``Sigma_n`` and ``third_moment_mean`` is
    ``(1/n) sum_k E||X_k||_inf^3``.
    """

    M: float
    alpha: float
    beta: float
    gamma: float
    lambda_min_sigma: float
    d_min_sigma: float
    d_max_sigma: float
    third_moment_mean: float
    n: int
    d: int

    def __post_init__(self):
        for name in ("M", "alpha", "beta", "gamma", "lambda_min_sigma", "d_min_sigma", "d_max_sigma", "third_moment_mean"):
            v = getattr(self, name)
            if not (v > 0):
                raise InvalidInput(f"{name} must be positive, got {v}")
        if self.n < 1 or self.d < 1:
            raise InvalidInput("n and d must be positive integers")
        if self.d_min_sigma > self.d_max_sigma:
            raise InvalidInput("d_min_sigma exceeds d_max_sigma")

    @property
    def log_d(self):
        return log_plus(self.d)

    @property
    def diag_ratio(self):
        return self.d_max_sigma / self.d_min_sigma


@dataclass
class BoundReport:
    theorem_id: str
    value: float
    components: dict = field(default_factory=dict)
    constant_c: float = 1.0


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points: list

    def predict(self, n):
        return math.exp(self.intercept) * np.asarray(n, dtype=float) ** self.slope


# --------------------------------------------------------------------------
# main bounds


def bound_t1(s, c=1.0):
    """Third-moment-only bound, rate ``n^{-1/8}``."""
    L = s.log_d
    value = (
        c
        * s.lambda_min_sigma ** (-3 / 8)
        * s.third_moment_mean ** (1 / 4)
        * s.diag_ratio ** (3 / 8)
        * L ** (9 / 8)
        * s.n ** (-1 / 8)
    )
    return BoundReport("t1", value, {"log_plus_d": L}, c)


def _x_log_ratio(delta):
    # x log((1 + x^2) / x^2), extended by continuity at 0
    if delta == 0:
        return 0.0
    return delta * math.log1p(1.0 / delta**2)


def bound_t2(s, c=1.0):
    """Moment-ratio bound ``Delta log_+ d log((1 + Delta^2) / Delta^2)``."""
    L = s.log_d
    delta = (
        math.sqrt(s.M)
        * s.lambda_min_sigma ** (-1 / 4)
        * s.diag_ratio ** (1 / 4)
        * L ** (3 / 4)
        * s.n ** (-1 / 4)
    )
    value = c * _x_log_ratio(delta) * L
    log_corr = math.log1p(1.0 / delta**2) if delta > 0 else math.inf
    return BoundReport("t2", value, {"Delta": delta, "log_plus_d": L, "log_correction": log_corr}, c)


def bound_t3(s, variant="with_alpha", c=1.0):
    """Moment-value bounds: ``n^{-1/8}`` without and ``n^{-1/4}`` with the
    uniform lower eigenvalue bound ``alpha``."""
    L = s.log_d
    gb = s.gamma + s.beta
    if variant == "without_alpha":
        value = c * (gb / s.d_min_sigma) ** (3 / 8) * L ** 1.5 * s.n ** (-1 / 8)
        return BoundReport("t3a", value, {"log_plus_d": L}, c)
    if variant == "with_alpha":
        value = c * gb ** 0.75 / math.sqrt(s.alpha * math.sqrt(s.d_min_sigma)) * L**2 * s.n ** (-1 / 4)
        return BoundReport("t3b", value, {"log_plus_d": L}, c)
    raise InvalidInput(f"unknown variant {variant!r}")


def kappa_markov(beta, alpha, gap, n, d, rn_norm=1.0, q=None, p=math.inf, c=1.0):
    """Concentration radius of the averaged conditional covariance.

    ``c * sqrt((q / gap) log(2 d n rn_norm)) (beta - alpha) / sqrt(n)`` where
    ``rn_norm`` is the L^p(mu) norm of d nu / d mu.  ``q`` defaults to the
    conjugate exponent ``p / (p - 1)`` (1 for ``p = inf``).
    """
    if not 0 < gap <= 1:
        raise InvalidInput("gap must lie in (0, 1]")
    if rn_norm < 1:
        raise InvalidInput("rn_norm must be >= 1")
    if beta < alpha:
        raise InvalidInput("beta must be >= alpha")
    if q is None:
        if not p > 1:
            raise InvalidInput("p must exceed 1")
        q = 1.0 if math.isinf(p) else p / (p - 1.0)
    return c * math.sqrt(q / gap * math.log(2.0 * d * n * rn_norm)) * (beta - alpha) / math.sqrt(n)


def kappa_statement(n, d, c=1.0):
    """Order-of-magnitude radius ``c log(nd) / sqrt(n)``, without the square root on the log."""
    return c * math.log(n * d) / math.sqrt(n)


def bound_t4(s, kappa, sigma_inv_norm, c=1.0):
    """Markov-chain bound: coupling term plus the martingale term."""
    if not 0 < kappa < 1:
        raise InvalidInput("kappa must lie in (0, 1)")
    L = s.log_d
    coupling = (math.sqrt(kappa * math.log(s.n * s.d)) + sigma_inv_norm * kappa * math.log(1.0 / kappa)) * L
    mart = (s.gamma**0.75 + s.beta**0.75) / math.sqrt(s.alpha) * L**2 * s.n ** (-1 / 4)
    return BoundReport(
        "t4",
        c * (coupling + mart),
        {"kappa": kappa, "coupling_term": coupling, "martingale_term": mart, "log_plus_d": L},
        c,
    )


# --------------------------------------------------------------------------
# auxiliary Gaussian facts


def smooth_derivative_bound(s, sigma, d, c=1.0):
    """``c sigma^{-s} log_+^{s/2} d``: derivative size of a Gaussian-smoothed box indicator."""
    if sigma <= 0 or s < 1:
        raise InvalidInput("need sigma > 0 and s >= 1")
    return c * sigma ** (-s) * log_plus(d) ** (s / 2)


def gaussian_max_moment_bound(s, d, d_max, c=1.0):
    """``c log_+^{s/2} d * d_max^{s/2}`` bounding ``E||X||_inf^s``."""
    if s < 2 or d_max <= 0:
        raise InvalidInput("need s >= 2 and d_max > 0")
    return c * log_plus(d) ** (s / 2) * d_max ** (s / 2)


def gaussian_max_tail_radius(d, d_max, delta, c=1.0):
    """``c sqrt(d_max log(d / delta))``: radius exceeded by ``||X||_inf`` w.p. at most delta."""
    if not 0 < delta < 1:
        raise InvalidInput("delta must lie in (0, 1)")
    return c * math.sqrt(d_max * math.log(d / delta))


def gaussian_comparison_bound(sigma, sigma_prime, c=1.0):
    """Kolmogorov distance between N(0, sigma) and N(0, sigma_prime).

    ``Delta`` is the max-abs entry of the diagonally rescaled difference;
    ``Delta = 0`` gives 0 and ``Delta >= 1`` returns ``inf`` because the
    formula carries no information there.
    """
    a = as_symmetric(sigma)
    b = as_symmetric(sigma_prime)
    dd = np.sqrt(np.diag(a))
    delta = float(np.max(np.abs((b - a) / np.outer(dd, dd))))
    if delta == 0:
        return 0.0
    if delta >= 1:
        return math.inf
    cond = np.linalg.norm(np.outer(dd, dd) * np.linalg.inv(a), 2)
    return c * cond * delta * math.log(1.0 / delta) * log_plus(a.shape[0])


def anti_concentration_bound(x, d, d_min, c=1.0, form="proof"):
    """Gaussian mass of an ``x``-thick boundary layer of a box.

    ``form="proof"`` is ``c x log_+ d / d_min``; ``form="statement"`` is
    ``c x sqrt(log_+ d / d_min)``.
    """
    if x < 0 or d_min <= 0:
        raise InvalidInput("need x >= 0 and d_min > 0")
    if form == "proof":
        return c * x * log_plus(d) / d_min
    if form == "statement":
        return c * x * math.sqrt(log_plus(d) / d_min)
    raise InvalidInput(f"unknown form {form!r}")


_AUX = {
    "smooth_derivative": smooth_derivative_bound,
    "gaussian_max_moment": gaussian_max_moment_bound,
    "gaussian_max_tail": gaussian_max_tail_radius,
    "gaussian_comparison": gaussian_comparison_bound,
    "anti_concentration": anti_concentration_bound,
}


def auxiliary_bounds(kind, **kwargs):
    try:
        fn = _AUX[kind]
    except KeyError:
        raise InvalidInput(f"unknown auxiliary bound {kind!r}; choose from {sorted(_AUX)}") from None
    return fn(**kwargs)


# --------------------------------------------------------------------------
# the Stein-solution integral inequality


@dataclass(frozen=True)
class SteinCheck:
    lhs: float
    rhs: float
    holds: bool
    abserr: float = 0.0


def _stein_rhs(t, eps1, epsk):
    e2 = math.exp(-2.0 * t)
    return math.exp(-3.0 * t) / math.sqrt(-math.expm1(-2.0 * t) * eps1) / (-math.expm1(-2.0 * t) * eps1 + e2 * epsk)


def stein_integral_check(t, eps1, epsk, quad_points=2000, rhs_scale=1.0):
    """Compare ``int_t^inf e^{-3s} / (a - eps_k e^{-2s})^{3/2} ds`` with its
    closed-form upper bound, where ``a = (1 - e^{-2t}) eps1 + e^{-2t} eps_k``.

    The integral is taken by adaptive Gauss-Kronrod quadrature after the
    substitution ``u = e^{-s}``.  ``rhs_scale`` exists for negative controls.
    """
    if t <= 0 or eps1 <= 0 or epsk < 0:
        raise InvalidInput("need t > 0, eps1 > 0, epsk >= 0")
    if quad_points < 1000:
        raise InvalidInput("quad_points must be >= 1000")
    a = -math.expm1(-2.0 * t) * eps1 + math.exp(-2.0 * t) * epsk
    top = math.exp(-t)
    rhs = _stein_rhs(t, eps1, epsk) * rhs_scale

    def integrand(u):
        return u * u / (a - epsk * u * u) ** 1.5

    lhs, abserr = integrate.quad(integrand, 0.0, top, epsabs=0.0, epsrel=1e-11, limit=max(50, quad_points // 21))
    if abserr > 1e-8 * _stein_rhs(t, eps1, epsk):
        raise QuadratureFailure(f"quadrature error {abserr:.3e} too large at t={t}, eps1={eps1}, epsk={epsk}")
    return SteinCheck(lhs, rhs, bool(lhs <= rhs * (1.0 + 1e-6)), abserr)


def stein_integral_closed_form(t, eps1, epsk):
    """Exact value of the left-hand integral: ``eps_k^{-3/2} (tan th - th)``
    with ``th = arcsin(sqrt(eps_k / a) e^{-t})``."""
    a = -math.expm1(-2.0 * t) * eps1 + math.exp(-2.0 * t) * epsk
    if epsk == 0:
        return math.exp(-3.0 * t) / (3.0 * a**1.5)
    th = math.asin(math.sqrt(epsk / a) * math.exp(-t))
    return (math.tan(th) - th) / epsk**1.5


# --------------------------------------------------------------------------
# rates


def rate_fit(points):
    """Least-squares fit of ``log value`` on ``log n``."""
    pts = [(int(n), float(v)) for n, v in points]
    if len(pts) < 2:
        raise InvalidInput("need at least two points")
    ns = np.array([p[0] for p in pts], dtype=float)
    vs = np.array([p[1] for p in pts])
    if len(set(ns)) != len(ns):
        raise InvalidInput("n values must be distinct")
    if np.any(~(vs > 0)) or np.any(ns <= 0):
        raise InvalidInput("rate_fit needs positive n and values")
    x, y = np.log(ns), np.log(vs)
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return RateFit(slope, intercept, float(min(1.0, max(0.0, r2))), pts)
