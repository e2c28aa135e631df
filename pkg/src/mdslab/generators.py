"""Martingale difference sequence generators.

Four constructions are supported:

* :class:`IidGaussian` -- i.i.d. N(0, Sigma) increments.
* :class:`Bolthausen` -- the triangular array whose first coordinate switches
  to a state-dependent two-point law in a window of width about sqrt(n) near
  the end of the horizon; all other coordinates are i.i.d. N(0, 1).
* :class:`MarkovInduced` -- ``X_k = f(s_{k-1}, s_k)`` for a finite Markov chain
  with ``E[f(s, s') | s] = 0``.
* :class:`GaussianSurrogate` -- conditionally Gaussian ``V_k^{1/2} Z_k`` with a
  prescribed covariance sequence.

:func:`generate` returns one full :class:`MdsPath`.  :func:`simulate_sums`
draws many terminal sums ``S_n / sqrt(n)`` at once, using exact distributional
shortcuts where blocks of steps are i.i.d. Gaussian.
"""
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .errors import InvalidInput, InvalidRegime, InvalidSpec, NoUniqueStationary
from .spectral import as_symmetric, is_psd, psd_sqrt, tol_psd

__all__ = [
    "IidGaussian",
    "Bolthausen",
    "MarkovChainSpec",
    "MarkovInduced",
    "GaussianSurrogate",
    "MdsPath",
    "StandardNormal",
    "TwoAtom",
    "StepMoments",
    "SumBatch",
    "bolthausen_window",
    "bolthausen_step_law",
    "bolthausen_density",
    "markov_center",
    "markov_sigma",
    "stationary_and_gap",
    "is_reversible",
    "generate",
    "simulate_sums",
    "simulate_markov",
    "yurinskii_augment",
    "stopping_time",
]

BOLTHAUSEN_MIN_N = 1024


# --------------------------------------------------------------------------
# generator specifications


@dataclass(frozen=True, eq=False)
class IidGaussian:
    sigma: np.ndarray

    def __post_init__(self):
        s = as_symmetric(self.sigma)
        if not is_psd(s):
            raise InvalidSpec("IidGaussian sigma must be PSD")
        object.__setattr__(self, "sigma", s)

    @property
    def d(self):
        return self.sigma.shape[0]

    tag = "iid_gaussian"


@dataclass(frozen=True)
class Bolthausen:
    d: int = 1

    def __post_init__(self):
        if self.d < 1:
            raise InvalidSpec("Bolthausen dimension must be >= 1")

    tag = "bolthausen"


@dataclass(frozen=True, eq=False)
class MarkovChainSpec:
    """Finite chain with transition matrix ``P``, initial law ``nu`` and an
    ``m x m x d`` table ``f_table[s, s']`` that must be conditionally centred."""

    P: np.ndarray
    nu: np.ndarray
    f_table: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        nu = np.array(self.nu, dtype=float)
        f = np.array(self.f_table, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise InvalidSpec("P must be square")
        m = P.shape[0]
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-12:
            raise InvalidSpec("P must be row-stochastic (nonnegative, rows summing to 1 within 1e-12)")
        if nu.shape != (m,) or np.any(nu < 0) or abs(nu.sum() - 1.0) > 1e-12:
            raise InvalidSpec("nu must be a probability vector over the states")
        if f.ndim == 2:
            f = f[:, :, None]
        if f.ndim != 3 or f.shape[:2] != (m, m):
            raise InvalidSpec("f_table must have shape (m, m, d)")
        cond_mean = np.einsum("st,std->sd", P, f)
        if np.max(np.abs(cond_mean), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(f), initial=0.0)):
            raise InvalidSpec("f_table is not centred: E[f(s, s') | s] != 0")
        for arr in (P, nu, f):
            arr.flags.writeable = False
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "f_table", f)

    @classmethod
    def from_uncentred(cls, P, nu, g_table):
        return cls(P, nu, markov_center(g_table, P))

    @property
    def m(self):
        return self.P.shape[0]

    @property
    def d(self):
        return self.f_table.shape[2]

    def state_covs(self):
        """``V(s) = E[f f^T | s]`` for every state, shape (m, d, d)."""
        return np.einsum("st,sti,stj->sij", self.P, self.f_table, self.f_table)

    def state_third_moments(self):
        """``E[||f(s, s')||_inf^3 | s]`` for every state."""
        return np.einsum("st,st->s", self.P, np.max(np.abs(self.f_table), axis=2) ** 3)


@dataclass(frozen=True)
class MarkovInduced:
    chain: MarkovChainSpec

    @property
    def d(self):
        return self.chain.d

    tag = "markov"


@dataclass(frozen=True, eq=False)
class GaussianSurrogate:
    """Conditionally Gaussian increments with covariances ``cond_covs``.

    A single matrix (shape ``(1, d, d)``) is broadcast over the horizon;
    otherwise the list length must equal ``n``.
    """

    cond_covs: np.ndarray

    def __post_init__(self):
        v = np.array(self.cond_covs, dtype=float)
        if v.ndim == 2:
            v = v[None]
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise InvalidSpec("cond_covs must have shape (n, d, d)")
        for k in range(v.shape[0]):
            if not is_psd(as_symmetric(v[k])):
                raise InvalidSpec(f"cond_covs[{k}] is not PSD")
        v.flags.writeable = False
        object.__setattr__(self, "cond_covs", v)

    @property
    def d(self):
        return self.cond_covs.shape[1]

    def covs_for(self, n):
        v = self.cond_covs
        if v.shape[0] == 1:
            return np.broadcast_to(v[0], (n,) + v.shape[1:])
        if v.shape[0] != n:
            raise InvalidSpec(f"GaussianSurrogate has {v.shape[0]} covariances but n={n}")
        return v

    tag = "gaussian_surrogate"


@dataclass
class MdsPath:
    increments: np.ndarray
    cond_covs: np.ndarray | None
    generator_tag: str
    seed: int | None = None

    @property
    def n(self):
        return self.increments.shape[0]

    @property
    def d(self):
        return self.increments.shape[1]

    def partial_sums(self):
        return np.cumsum(self.increments, axis=0)

    def terminal_qv(self):
        if self.cond_covs is None:
            raise InvalidInput("path carries no conditional covariances")
        return np.sum(self.cond_covs, axis=0)


# --------------------------------------------------------------------------
# the lower-bound array


@dataclass(frozen=True)
class StandardNormal:
    mean: float = 0.0
    variance: float = 1.0


@dataclass(frozen=True)
class TwoAtom:
    p: float
    v_plus: float
    v_minus: float

    @property
    def mean(self):
        return self.p * self.v_plus + (1.0 - self.p) * self.v_minus

    @property
    def variance(self):
        return self.p * self.v_plus**2 + (1.0 - self.p) * self.v_minus**2 - self.mean**2


RADEMACHER = TwoAtom(0.5, 1.0, -1.0)


def _ceil_sqrt(x):
    return math.isqrt(x - 1) + 1 if x > 0 else 0


def bolthausen_window(n):
    """Return ``(lo, hi)`` with the window being ``lo < i <= hi``.

    ``lo = floor(n - 2 sqrt(n))`` and ``hi = floor(n - sqrt(n))``, computed in
    exact integer arithmetic.
    """
    if n < BOLTHAUSEN_MIN_N:
        raise InvalidRegime(f"the two-point law needs n >= {BOLTHAUSEN_MIN_N}, got n={n}")
    return n - _ceil_sqrt(4 * n), n - _ceil_sqrt(n)


def _bolthausen_params(i, n):
    lam2 = 1.0 - i / n
    q = 16.0 * lam2
    if q >= 1.0:
        raise InvalidRegime(f"16 lambda_i^2 = {q} >= 1 at i={i}, n={n}")
    rho = math.sqrt((1.0 - q) / q)
    return math.sqrt(lam2), q, rho


def bolthausen_step_law(i, n, s_partial):
    """Conditional law of the first coordinate at step ``i`` given the
    partial sum ``s_partial`` of that coordinate over steps ``1..i-1``."""
    if not 1 <= i <= n:
        raise InvalidInput(f"step index {i} outside 1..{n}")
    lo, hi = bolthausen_window(n)
    if not lo < i <= hi:
        return StandardNormal()
    lam, q, rho = _bolthausen_params(i, n)
    if abs(s_partial) > math.sqrt(n) * lam / 4.0:
        return RADEMACHER
    return TwoAtom(q, rho, -1.0 / rho)


@lru_cache(maxsize=4096)
def _max_abs_normal_third(m, floor):
    """``E[max(floor, W)^3]`` with ``W`` the max of ``m`` i.i.d. ``|N(0,1)|``."""
    floor = abs(float(floor))
    if m == 0:
        return floor**3

    def tail(x):
        return 3.0 * x * x * -np.expm1(m * np.log(2.0 * ndtr(x) - 1.0)) if x > 0 else 0.0

    val, _ = integrate.quad(tail, floor, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200)
    return floor**3 + val


def _bolthausen_cond_third(d, law):
    if isinstance(law, StandardNormal):
        return _max_abs_normal_third(d, 0.0)
    return law.p * _max_abs_normal_third(d - 1, law.v_plus) + (1.0 - law.p) * _max_abs_normal_third(
        d - 1, law.v_minus
    )


# --------------------------------------------------------------------------
# Markov chain helpers


def markov_center(g_table, P):
    """Subtract the conditional mean: ``f[s, s'] = g[s, s'] - sum_t P[s, t] g[s, t]``."""
    g = np.array(g_table, dtype=float)
    squeeze = g.ndim == 2
    if squeeze:
        g = g[:, :, None]
    P = np.asarray(P, dtype=float)
    f = g - np.einsum("st,std->sd", P, g)[:, None, :]
    return f[:, :, 0] if squeeze else f


def stationary_and_gap(P):
    """Stationary law ``mu`` and spectral gap ``1 - |lambda_2|`` of ``P``.

    Non-reversible chains trigger a ``UserWarning`` since the gap convention
    for them is ambiguous.
    """
    P = np.asarray(P, dtype=float)
    m = P.shape[0]
    w = np.linalg.eigvals(P.T)
    unit = np.abs(w - 1.0) < 1e-8
    if unit.sum() != 1:
        raise NoUniqueStationary("eigenvalue 1 of P is not simple; the chain is reducible")
    A = np.vstack([P.T - np.eye(m), np.ones((1, m))])
    rhs = np.zeros(m + 1)
    rhs[-1] = 1.0
    mu = np.linalg.lstsq(A, rhs, rcond=None)[0]
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    for _ in range(50):
        if np.max(np.abs(mu @ P - mu)) <= 1e-13:
            break
        mu = mu @ P
        mu /= mu.sum()
    if np.max(np.abs(mu @ P - mu)) > 1e-12:
        raise NoUniqueStationary("stationary distribution did not converge")
    gap = 1.0 - float(np.max(np.abs(w[~unit]), initial=0.0))
    if gap <= 1e-12:
        raise NoUniqueStationary("chain is periodic: no spectral gap")
    if not is_reversible(P, mu):
        warnings.warn("P is not reversible; gap reported as 1 - |lambda_2|", stacklevel=2)
    return mu, min(gap, 1.0)


def is_reversible(P, mu, tol=1e-10):
    flow = np.asarray(mu)[:, None] * np.asarray(P)
    return bool(np.max(np.abs(flow - flow.T)) <= tol)


def markov_sigma(chain):
    """``Sigma = E_{s~mu, s'~P(.|s)}[f f^T]`` computed exactly from the tables."""
    mu, _ = stationary_and_gap(chain.P)
    return as_symmetric(np.einsum("s,sij->ij", mu, chain.state_covs()))


# --------------------------------------------------------------------------
# batch simulation


@dataclass
class StepMoments:
    """Moment summaries of a generator over a horizon ``n``.

    ``third_by_step[k]`` estimates ``E||X_{k+1}||_inf^3``; ``ratio_max`` is the
    smallest M with ``E[||X_k||^3 | F_{k-1}] <= M lambda_min(V_k)`` over all
    reachable regimes.  ``alpha`` bounds ``lambda_min(V_k)`` from below and
    ``beta`` bounds ``d_max(V_k)`` from above.
    """

    third_by_step: np.ndarray
    ratio_max: float
    alpha: float
    beta: float
    sigma_n: np.ndarray


@dataclass
class SumBatch:
    sums: np.ndarray  # count x d, already divided by sqrt(n)
    third_total: np.ndarray = field(default=None)  # per-step sums over the batch, or None if deterministic


_MC_THIRD_DRAWS = 1 << 16
_MC_THIRD_SEED = 20240607


@lru_cache(maxsize=64)
def _gaussian_third_cached(key, d):
    cov = np.frombuffer(key).reshape(d, d)
    diag = np.diag(cov)
    if np.allclose(cov, np.diag(diag)) and np.allclose(diag, diag[0]):
        return float(diag[0] ** 1.5 * _max_abs_normal_third(d, 0.0))
    rng = np.random.default_rng(_MC_THIRD_SEED)
    z = rng.standard_normal((_MC_THIRD_DRAWS, d)) @ psd_sqrt(cov).T
    return float(np.mean(np.max(np.abs(z), axis=1) ** 3))


def gaussian_third_moment(cov):
    """``E||X||_inf^3`` for ``X ~ N(0, cov)``; exact for isotropic cov, fixed-seed MC otherwise."""
    cov = as_symmetric(cov)
    return _gaussian_third_cached(np.ascontiguousarray(cov).tobytes(), cov.shape[0])


def step_moments(spec, n, third_total=None, count=None):
    """Assemble :class:`StepMoments` for ``spec`` at horizon ``n``.

    For the lower-bound array the window third moments are Rao-Blackwellised
    averages ``third_total / count`` collected during simulation.
    """
    if isinstance(spec, IidGaussian):
        t = gaussian_third_moment(spec.sigma)
        ev = np.linalg.eigvalsh(spec.sigma)
        return StepMoments(np.full(n, t), t / ev[0], ev[0], float(np.max(np.diag(spec.sigma))), spec.sigma)
    if isinstance(spec, GaussianSurrogate):
        covs = spec.covs_for(n)
        if spec.cond_covs.shape[0] == 1:
            t = np.full(n, gaussian_third_moment(covs[0]))
        else:
            t = np.array([gaussian_third_moment(v) for v in covs])
        lmins = np.linalg.eigvalsh(covs)[:, 0]
        ratio = float(np.max(t / lmins)) if np.all(lmins > 0) else np.inf
        return StepMoments(
            t, ratio, float(lmins.min()), float(np.max(np.diagonal(covs, axis1=1, axis2=2))), covs.mean(axis=0)
        )
    if isinstance(spec, Bolthausen):
        d = spec.d
        lo, hi = bolthausen_window(n)
        normal = _bolthausen_cond_third(d, StandardNormal())
        t = np.full(n, normal)
        ratio = max(normal, _bolthausen_cond_third(d, RADEMACHER))
        for i in range(lo + 1, hi + 1):
            _, q, rho = _bolthausen_params(i, n)
            ratio = max(ratio, _bolthausen_cond_third(d, TwoAtom(q, rho, -1.0 / rho)))
        if third_total is not None:
            t[lo:hi] = third_total[lo:hi] / count
        return StepMoments(t, ratio, 1.0, 1.0, np.eye(d))
    if isinstance(spec, MarkovInduced):
        chain = spec.chain
        covs = chain.state_covs()
        third = chain.state_third_moments()
        ev = np.linalg.eigvalsh(covs)
        mu, _ = stationary_and_gap(chain.P)
        lmin = ev[:, 0]
        ratio = float(np.max(third / lmin)) if np.all(lmin > 0) else np.inf
        return StepMoments(
            np.full(n, float(mu @ third)),
            ratio,
            float(lmin.min()),
            float(np.max(ev[:, -1])),
            markov_sigma(chain),
        )
    raise InvalidSpec(f"unknown generator spec {spec!r}")


def _bolthausen_batch(n, d, count, rng, full, horizon=None):
    lo, hi = bolthausen_window(n)
    h = n if horizon is None else horizon
    third_total = np.zeros(n)
    if full:
        inc = rng.standard_normal((count, n, d))
        s = inc[:, :lo, 0].sum(axis=1)
    else:
        s = math.sqrt(min(h, lo)) * rng.standard_normal(count)
    rad = _bolthausen_cond_third(d, RADEMACHER)
    for i in range(lo + 1, min(h, hi) + 1):
        lam, q, rho = _bolthausen_params(i, n)
        band = np.abs(s) <= math.sqrt(n) * lam / 4.0
        u = rng.random(count)
        x = np.where(band, np.where(u < q, rho, -1.0 / rho), np.where(u < 0.5, 1.0, -1.0))
        nb = np.count_nonzero(band)
        third_total[i - 1] = nb * _bolthausen_cond_third(d, TwoAtom(q, rho, -1.0 / rho)) + (count - nb) * rad
        s = s + x
        if full:
            inc[:, i - 1, 0] = x
    if full:
        return inc, third_total
    if h > hi:
        s = s + math.sqrt(h - hi) * rng.standard_normal(count)
    out = np.empty((count, d))
    out[:, 0] = s / math.sqrt(h)
    if d > 1:
        out[:, 1:] = rng.standard_normal((count, d - 1))
    return out, third_total


def bolthausen_density(n, horizon=None, h=0.01):
    """Density of the first coordinate of ``S_horizon`` on a uniform grid.

    Deterministic: the window steps are pushed through the density by linear
    interpolation, and Gaussian stretches are applied by convolution.  Grid
    step ``h`` controls the discretisation error.  ``horizon`` must lie in
    ``[lo, hi]`` of the window, or equal ``n``.
    """
    lo, hi = bolthausen_window(n)
    horizon = n if horizon is None else horizon
    if not (lo <= horizon <= hi or horizon == n):
        raise InvalidInput("horizon must lie in the window or equal n")
    half = 9.0 * math.sqrt(n)
    x = np.arange(-half, half + h / 2, h)
    p = np.exp(-0.5 * x * x / lo) / math.sqrt(2 * math.pi * lo)
    for i in range(lo + 1, min(horizon, hi) + 1):
        lam, q, rho = _bolthausen_params(i, n)
        band = np.abs(x) <= math.sqrt(n) * lam / 4.0
        pin = np.where(band, p, 0.0)
        pout = p - pin

        def shift(f, a):
            return np.interp(x - a, x, f, left=0.0, right=0.0)

        p = q * shift(pin, rho) + (1 - q) * shift(pin, -1.0 / rho) + 0.5 * (shift(pout, 1.0) + shift(pout, -1.0))
    if horizon > hi:
        tail = math.sqrt(horizon - hi)
        k = np.arange(-int(8 * tail / h) - 1, int(8 * tail / h) + 2) * h
        kern = np.exp(-0.5 * (k / tail) ** 2)
        kern /= kern.sum()
        p = np.convolve(p, kern, mode="same")
    return x, p


def simulate_markov(chain, n, count, rng, keep_states=False):
    """Run ``count`` independent chains for ``n`` transitions.

    Returns ``(sums, occupation, states)`` where ``sums`` is the raw
    ``S_n = sum_k f(s_{k-1}, s_k)`` (count x d), ``occupation[r, s]`` counts
    visits of ``s`` among ``s_0..s_{n-1}`` and ``states`` is ``(n + 1) x count``
    when requested, else ``None``.
    """
    m, d = chain.m, chain.d
    cumP = np.cumsum(chain.P, axis=1)
    cumP[:, -1] = np.inf
    cumnu = np.cumsum(chain.nu)
    cumnu[-1] = np.inf
    s = np.searchsorted(cumnu, rng.random(count), side="right")
    rows = np.arange(count)
    occ = np.zeros((count, m), dtype=np.int64)
    sums = np.zeros((count, d))
    f = chain.f_table
    states = None
    if keep_states:
        states = np.empty((n + 1, count), dtype=np.int32)
        states[0] = s
    for k in range(n):
        occ[rows, s] += 1
        u = rng.random(count)
        s_next = np.sum(u[:, None] >= cumP[s], axis=1)
        sums += f[s, s_next]
        s = s_next
        if keep_states:
            states[k + 1] = s
    return sums, occ, states


def simulate_sums(spec, n, count, rng, horizon=None):
    """Draw ``count`` i.i.d. copies of ``S_n / sqrt(n)``.

    Runs of i.i.d. Gaussian steps are summed in one Gaussian draw, which is
    exact in distribution.  For the lower-bound array ``horizon`` selects an
    intermediate time ``i`` and the draw is ``S_i / sqrt(i)`` instead.
    """
    if n < 1 or count < 1:
        raise InvalidInput("n and count must be positive")
    if horizon is not None and horizon != n:
        if not isinstance(spec, Bolthausen) or not 1 <= horizon <= n:
            raise InvalidInput("horizon is only supported for the bolthausen generator, within [1, n]")
    if isinstance(spec, IidGaussian):
        return SumBatch(rng.standard_normal((count, spec.d)) @ psd_sqrt(spec.sigma).T)
    if isinstance(spec, GaussianSurrogate):
        total = spec.covs_for(n).sum(axis=0) / n
        return SumBatch(rng.standard_normal((count, spec.d)) @ psd_sqrt(total).T)
    if isinstance(spec, Bolthausen):
        sums, third_total = _bolthausen_batch(n, spec.d, count, rng, full=False, horizon=horizon)
        return SumBatch(sums, third_total)
    if isinstance(spec, MarkovInduced):
        sums, _, _ = simulate_markov(spec.chain, n, count, rng)
        return SumBatch(sums / math.sqrt(n))
    raise InvalidSpec(f"unknown generator spec {spec!r}")


# --------------------------------------------------------------------------
# single paths


def generate(spec, n, seed):
    """Simulate one martingale difference path of length ``n``."""
    if n < 1:
        raise InvalidInput("n must be >= 1")
    rng = np.random.default_rng(seed)
    if isinstance(spec, IidGaussian):
        inc = rng.standard_normal((n, spec.d)) @ psd_sqrt(spec.sigma).T
        covs = np.broadcast_to(spec.sigma, (n, spec.d, spec.d))
    elif isinstance(spec, Bolthausen):
        inc, _ = _bolthausen_batch(n, spec.d, 1, rng, full=True)
        inc = inc[0]
        covs = np.broadcast_to(np.eye(spec.d), (n, spec.d, spec.d))
    elif isinstance(spec, GaussianSurrogate):
        covs = spec.covs_for(n)
        z = rng.standard_normal((n, spec.d))
        if spec.cond_covs.shape[0] == 1:
            inc = z @ psd_sqrt(covs[0]).T
        else:
            inc = np.einsum("kij,kj->ki", np.array([psd_sqrt(v) for v in covs]), z)
    elif isinstance(spec, MarkovInduced):
        chain = spec.chain
        _, _, states = simulate_markov(chain, n, 1, rng, keep_states=True)
        st = states[:, 0]
        inc = chain.f_table[st[:-1], st[1:]]
        covs = chain.state_covs()[st[:-1]]
    else:
        raise InvalidSpec(f"unknown generator spec {spec!r}")
    return MdsPath(np.ascontiguousarray(inc), covs, spec.tag, seed)


# --------------------------------------------------------------------------
# stopping-time augmentation


def stopping_time(cum_covs, cap):
    """Largest ``t`` with ``cum_covs[t] <= cap`` in Loewner order.

    ``cum_covs[t]`` is the sum of the first ``t`` conditional covariances
    (``cum_covs[0] = 0``).  The partial sums increase in Loewner order, so the
    admissible set is a prefix and bisection applies.
    """
    tol = tol_psd(cap)

    def ok(t):
        return np.linalg.eigvalsh(cap - cum_covs[t])[0] >= -tol

    if not ok(0):
        raise InvalidInput("cap is not PSD")
    lo, hi = 0, cum_covs.shape[0] - 1
    if ok(hi):
        return hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def yurinskii_augment(path, sigma, kappa, seed):
    """Pad ``path`` to length ``n + 1`` so its terminal quadratic variation is
    exactly ``n (sigma + kappa I)``.

    Steps after the stopping time ``tau`` are zeroed and the last step is a
    Gaussian draw with the residual covariance.  Returns ``(path, tau)``.
    """
    if kappa < 0:
        raise InvalidInput("kappa must be nonnegative")
    if path.cond_covs is None:
        raise InvalidInput("augmentation needs conditional covariances")
    sigma = as_symmetric(sigma)
    if not is_psd(sigma):
        raise InvalidInput("sigma must be PSD")
    n, d = path.n, path.d
    V = np.asarray(path.cond_covs, dtype=float)
    cap = n * (sigma + kappa * np.eye(d))
    cum = np.zeros((n + 1, d, d))
    np.cumsum(V, axis=0, out=cum[1:])
    tau = stopping_time(cum, cap)
    residual = as_symmetric(cap - cum[tau], atol=np.inf)
    eta = np.random.default_rng(seed).standard_normal(d)
    inc = np.zeros((n + 1, d))
    inc[:tau] = path.increments[:tau]
    inc[n] = psd_sqrt(residual) @ eta
    covs = np.zeros((n + 1, d, d))
    covs[:tau] = V[:tau]
    covs[n] = residual
    return MdsPath(inc, covs, path.generator_tag + "+yurinskii", seed), tau
