"""Kolmogorov distance over hyper-rectangles, estimated on a finite family.

The supremum over all boxes is not computable, so ``estimate_dk`` maximises
over a fixed :class:`RectangleFamily`.  This can only under-shoot the true
supremum (up to sampling and quadrature noise), and the returned
:class:`DkEstimate` carries both error sources at the maximising box.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import norm

from .errors import InvalidInput
from .gaussian import Rectangle, empirical_rect_probs, rect_prob
from .spectral import as_symmetric, cholesky_factor

__all__ = [
    "RectangleFamily",
    "DkEstimate",
    "ReferenceProbs",
    "NormalLaw",
    "EmpiricalLaw",
    "build_family",
    "reference_probs",
    "estimate_dk",
    "dk_one_dim_oracle",
    "dk_density_vs_normal",
]

DEFAULT_GRID_POINTS = 41
DEFAULT_RANDOM_COUNT = 512
LEVEL_RANGE = (0.1, 0.9)


@dataclass
class RectangleFamily:
    rectangles: list
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.rectangles:
            raise InvalidInput("rectangle family must be nonempty")

    def __len__(self):
        return len(self.rectangles)

    def extended(self, more):
        return RectangleFamily(list(self.rectangles) + list(more), dict(self.spec, extended=len(more)))


@dataclass
class DkEstimate:
    value: float
    mc_error: float
    mvn_error: float
    argmax_rectangle: Rectangle
    family_size: int
    mc_error_bonferroni: float = 0.0


@dataclass
class ReferenceProbs:
    value: np.ndarray
    stderr: np.ndarray


def build_family(d, sigma, grid_points=DEFAULT_GRID_POINTS, random_count=DEFAULT_RANDOM_COUNT, seed=0):
    """Quantile-calibrated rectangle family for a reference N(0, sigma).

    Joint coverage levels ``L`` run over ``grid_points`` values in
    ``[0.1, 0.9]``; each is turned into a per-coordinate level ``L**(1/d)`` so
    that the boxes track the distribution of the coordinate maximum.  The
    family holds one-sided boxes ``(-inf, t]^d``, symmetric boxes
    ``[-t, t]^d`` and ``random_count`` random boxes on one to three randomly
    chosen coordinates with quantile-drawn endpoints.
    """
    if grid_points < 3:
        raise InvalidInput("grid_points must be >= 3")
    if random_count < 0:
        raise InvalidInput("random_count must be >= 0")
    sd = np.sqrt(np.diag(as_symmetric(sigma)))
    if sd.shape[0] != d:
        raise InvalidInput("sigma dimension does not match d")
    levels = np.linspace(*LEVEL_RANGE, grid_points)
    per_coord = levels ** (1.0 / d)
    rects = []
    for u in per_coord:
        rects.append(Rectangle(np.full(d, -np.inf), ndtri(u) * sd))
    for u in per_coord:
        t = ndtri(0.5 * (1.0 + u)) * sd
        rects.append(Rectangle(-t, t))
    rng = np.random.default_rng(seed)
    for _ in range(random_count):
        k = int(rng.integers(1, min(d, 3) + 1))
        coords = rng.choice(d, size=k, replace=False)
        lo = np.full(d, -np.inf)
        hi = np.full(d, np.inf)
        u = np.sort(rng.random((k, 2)), axis=1)
        kind = rng.random(k)
        lo_c = np.where(kind < 0.25, -np.inf, ndtri(u[:, 0]) * sd[coords])
        hi_c = np.where((kind >= 0.25) & (kind < 0.5), np.inf, ndtri(u[:, 1]) * sd[coords])
        lo[coords] = lo_c
        hi[coords] = hi_c
        rects.append(Rectangle(lo, hi))
    return RectangleFamily(
        rects, {"d": d, "grid_points": grid_points, "random_count": random_count, "seed": seed}
    )


def reference_probs(sigma, family, budget=4096, seed=0):
    """Gaussian probabilities of every box in ``family`` (one QMC stream per box)."""
    sigma = as_symmetric(sigma)
    vals = np.empty(len(family))
    errs = np.empty(len(family))
    for i, r in enumerate(family.rectangles):
        est = rect_prob(sigma, r, budget=budget, seed=(int(seed), i))
        vals[i] = est.value
        errs[i] = est.stderr
    return ReferenceProbs(vals, errs)


def estimate_dk(samples, sigma, family, budget=4096, seed=0, reference=None):
    """Max over ``family`` of |empirical frequency - Gaussian probability|.

    Pass a precomputed ``reference`` (from :func:`reference_probs`) to reuse
    the Gaussian side across many sample sets with the same ``sigma``.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    R = x.shape[0]
    if R < 100:
        raise InvalidInput("estimate_dk needs at least 100 samples")
    sigma = as_symmetric(sigma)
    cholesky_factor(sigma)
    if reference is None:
        reference = reference_probs(sigma, family, budget, seed)
    emp = empirical_rect_probs(x, family.rectangles)
    gap = np.abs(emp - reference.value)
    idx = int(np.argmax(gap))  # lowest index on ties
    p = emp[idx]
    k = len(family)
    return DkEstimate(
        value=float(gap[idx]),
        mc_error=float(np.sqrt(p * (1.0 - p) / R)),
        mvn_error=float(reference.stderr[idx]),
        argmax_rectangle=family.rectangles[idx],
        family_size=k,
        mc_error_bonferroni=float(norm.isf(0.005 / k) * 0.5 / np.sqrt(R)),
    )


# --------------------------------------------------------------------------
# one-dimensional brute-force oracle


@dataclass(frozen=True)
class NormalLaw:
    """N(mean, variance); ``variance == 0`` is a point mass."""

    mean: float = 0.0
    variance: float = 1.0

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.variance == 0:
            return (x >= self.mean).astype(float)
        return ndtr((x - self.mean) / np.sqrt(self.variance))

    def cdf_left(self, x):
        x = np.asarray(x, dtype=float)
        if self.variance == 0:
            return (x > self.mean).astype(float)
        return self.cdf(x)

    def span(self):
        s = 8.0 * np.sqrt(self.variance)
        return self.mean - s, self.mean + s

    def atoms(self):
        return [self.mean] if self.variance == 0 else []


@dataclass(frozen=True, eq=False)
class EmpiricalLaw:
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", np.sort(np.asarray(self.samples, dtype=float).ravel()))

    def cdf(self, x):
        return np.searchsorted(self.samples, x, side="right") / self.samples.size

    def cdf_left(self, x):
        return np.searchsorted(self.samples, x, side="left") / self.samples.size

    def span(self):
        return float(self.samples[0]), float(self.samples[-1])

    def atoms(self):
        return []


def dk_one_dim_oracle(law_a, law_b, grid=10_000):
    """Sup over intervals ``[a, b]`` (endpoints on a grid, or infinite) of
    ``|P_a([a, b]) - P_b([a, b])|``.

    With ``D = F_a - F_b`` the interval gap is ``D(b) - D(a-)``; the maximum
    over ordered pairs is found with running extrema, which is exactly the
    brute-force double loop over the grid.
    """
    spans = [law_a.span(), law_b.span()]
    lo = min(s[0] for s in spans)
    hi = max(s[1] for s in spans)
    pts = np.linspace(lo, hi, grid) if hi > lo else np.array([lo])
    pts = np.unique(np.concatenate([pts, law_a.atoms(), law_b.atoms()]))
    d_right = law_a.cdf(pts) - law_b.cdf(pts)
    d_left = law_a.cdf_left(pts) - law_b.cdf_left(pts)
    # a = -inf contributes D(a-) = 0
    run_min = np.minimum.accumulate(np.minimum(d_left, 0.0))
    run_max = np.maximum.accumulate(np.maximum(d_left, 0.0))
    best = max(np.max(d_right - run_min), np.max(run_max - d_right))
    # b = +inf contributes D(b) = 0
    best = max(best, -run_min[-1], run_max[-1])
    return float(best)


def dk_density_vs_normal(x, density, variance):
    """Interval distance between a density tabulated on a uniform grid and
    N(0, variance).  Over intervals the supremum is ``max D - min D`` with
    ``D = F - Phi`` and ``D = 0`` at both infinite ends.
    """
    x = np.asarray(x, dtype=float)
    step = x[1] - x[0]
    F = np.cumsum(density) * step
    D = F - ndtr(x / np.sqrt(variance))
    return float(max(D.max(), 0.0) - min(D.min(), 0.0))
