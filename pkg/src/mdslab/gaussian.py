"""Gaussian sampling and hyper-rectangle probabilities.

``rect_prob`` uses Genz's sequential-conditioning transform: after a greedy
variable reordering and a Cholesky factorisation, the rectangle probability
becomes an integral over the unit cube of dimension ``k - 1`` which is
integrated with independently scrambled Sobol' point sets (antithetic pairs
inside each scramble).  The spread across scrambles gives the error bar.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from .errors import InvalidInput, NotPositiveDefinite
from .spectral import as_symmetric, cholesky_factor, tol_psd

__all__ = [
    "Rectangle",
    "ProbEstimate",
    "sample_mvn",
    "rect_prob",
    "empirical_rect_prob",
    "empirical_rect_probs",
]

# infinite endpoints are replaced by this many marginal standard deviations
TAIL_SD = 8.0
_U_LO = np.finfo(float).tiny
_U_HI = 1.0 - np.finfo(float).eps / 2


@dataclass(frozen=True, eq=False)
class Rectangle:
    """Axis-aligned box ``prod_i [lower_i, upper_i]`` with extended-real endpoints."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InvalidInput("lower and upper must be 1-d vectors of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise InvalidInput("rectangle endpoints must not be NaN")
        if np.any(lo > hi):
            raise InvalidInput("rectangle requires lower <= upper coordinatewise")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def full(cls, d):
        return cls(np.full(d, -np.inf), np.full(d, np.inf))

    @property
    def dim(self):
        return self.lower.shape[0]

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)

    def __neg__(self):
        return Rectangle(-self.upper, -self.lower)

    def __eq__(self, other):
        if not isinstance(other, Rectangle):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))

    def __repr__(self):
        return f"Rectangle(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


@dataclass(frozen=True)
class ProbEstimate:
    value: float
    stderr: float
    n_points: int


def sample_mvn(sqrt_sigma, count, seed):
    """``count`` i.i.d. draws of ``root @ z`` with ``z`` standard normal.

    ``sqrt_sigma`` may be a Cholesky factor or a symmetric root; rows of the
    result are N(0, root root^T).  Deterministic in ``seed``.
    """
    root = np.atleast_2d(np.asarray(sqrt_sigma, dtype=float))
    if count < 1:
        raise InvalidInput("count must be at least 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, root.shape[1]))
    return z @ root.T


def _genz_prepare(cov, a, b):
    """Greedy reordering plus Cholesky of ``cov``; returns (C, a, b) permuted."""
    k = a.shape[0]
    cov = cov.copy()
    a = a.copy()
    b = b.copy()
    C = np.zeros((k, k))
    y = np.zeros(k)
    tol = tol_psd(cov)
    for i in range(k):
        resid = np.diag(cov)[i:] - np.einsum("ij,ij->i", C[i:, :i], C[i:, :i])
        if resid.min() <= tol:
            raise NotPositiveDefinite("covariance is not positive definite")
        sd = np.sqrt(resid)
        shift = C[i:, :i] @ y[:i]
        lo = (a[i:] - shift) / sd
        hi = (b[i:] - shift) / sd
        j = i + int(np.argmin(ndtr(hi) - ndtr(lo)))
        if j != i:
            cov[[i, j], :] = cov[[j, i], :]
            cov[:, [i, j]] = cov[:, [j, i]]
            a[[i, j]] = a[[j, i]]
            b[[i, j]] = b[[j, i]]
            C[[i, j], :i] = C[[j, i], :i]
        lo_i, hi_i = lo[j - i], hi[j - i]
        C[i, i] = sd[j - i]
        if i + 1 < k:
            C[i + 1:, i] = (cov[i + 1:, i] - C[i + 1:, :i] @ C[i, :i]) / C[i, i]
        mass = ndtr(hi_i) - ndtr(lo_i)
        if mass > 1e-300:
            y[i] = (np.exp(-0.5 * lo_i**2) - np.exp(-0.5 * hi_i**2)) / np.sqrt(2 * np.pi) / mass
        else:
            y[i] = lo_i if lo_i > 0 else hi_i
    return C, a, b


def _genz_integrand(w, C, a, b):
    k = a.shape[0]
    npts = w.shape[0]
    e = np.full(npts, ndtr(a[0] / C[0, 0]))
    d = np.full(npts, ndtr(b[0] / C[0, 0]))
    p = d - e
    ys = np.empty((npts, k - 1))
    for i in range(1, k):
        u = np.clip(e + w[:, i - 1] * (d - e), _U_LO, _U_HI)
        ys[:, i - 1] = ndtri(u)
        t = ys[:, :i] @ C[i, :i]
        e = ndtr((a[i] - t) / C[i, i])
        d = ndtr((b[i] - t) / C[i, i])
        p *= d - e
    return p


def rect_prob(sigma, r, budget=4096, seed=0, n_shifts=8):
    """P(Z in r) for Z ~ N(0, sigma) by randomized-QMC Genz integration.

    ``stderr`` is the standard error of the mean over ``n_shifts`` independent
    scrambles; ``|value - truth| <= 3 * stderr`` holds with roughly 99%
    confidence.  Coordinates unconstrained on both sides are marginalised out
    exactly, so a fully unconstrained box returns ``1.0`` with zero error.
    """
    cov = as_symmetric(sigma)
    cholesky_factor(cov)  # raises NotPositiveDefinite
    if r.dim != cov.shape[0]:
        raise InvalidInput(f"rectangle dimension {r.dim} does not match covariance {cov.shape[0]}")
    if budget < 2**10:
        raise InvalidInput("budget must be at least 2**10")
    if n_shifts < 8:
        raise InvalidInput("at least 8 independent shifts are required")
    lo, hi = r.lower, r.upper
    if np.any(lo == hi):
        return ProbEstimate(0.0, 0.0, 0)
    active = ~(np.isneginf(lo) & np.isposinf(hi))
    k = int(active.sum())
    if k == 0:
        return ProbEstimate(1.0, 0.0, 0)
    sub = cov[np.ix_(active, active)]
    sd = np.sqrt(np.diag(sub))
    a = np.maximum(lo[active], -TAIL_SD * sd)
    b = np.minimum(hi[active], TAIL_SD * sd)
    if np.any(a >= b):
        return ProbEstimate(0.0, 0.0, 0)
    if k == 1:
        v = float(ndtr(b[0] / sd[0]) - ndtr(a[0] / sd[0]))
        return ProbEstimate(v, 0.0, 0)

    C, a, b = _genz_prepare(sub, a, b)
    m = max(1, int(np.floor(np.log2(budget / (2 * n_shifts)))))
    seeds = np.random.SeedSequence(seed).spawn(n_shifts)
    means = np.empty(n_shifts)
    for s, ss in enumerate(seeds):
        w = qmc.Sobol(k - 1, scramble=True, seed=np.random.default_rng(ss)).random_base2(m)
        means[s] = 0.5 * (_genz_integrand(w, C, a, b).mean() + _genz_integrand(1.0 - w, C, a, b).mean())
    value = float(np.clip(means.mean(), 0.0, 1.0))
    stderr = float(means.std(ddof=1) / np.sqrt(n_shifts))
    return ProbEstimate(value, stderr, int(2 * n_shifts * 2**m))


def empirical_rect_prob(samples, r):
    """Fraction of rows of ``samples`` inside the closed box ``r``."""
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    return float(np.mean(r.contains(x)))


def empirical_rect_probs(samples, rects):
    """Vectorised :func:`empirical_rect_prob` over many rectangles.

    Only finite endpoints are compared, which keeps high-dimensional boxes
    with few constrained coordinates cheap.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    cols = np.ascontiguousarray(x.T)
    R = x.shape[0]
    out = np.empty(len(rects))
    for idx, r in enumerate(rects):
        inside = np.ones(R, dtype=bool)
        for j in np.flatnonzero(np.isfinite(r.lower)):
            inside &= cols[j] >= r.lower[j]
        for j in np.flatnonzero(np.isfinite(r.upper)):
            inside &= cols[j] <= r.upper[j]
        out[idx] = np.count_nonzero(inside) / R
    return out
