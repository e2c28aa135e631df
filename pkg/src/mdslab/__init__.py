"""Numerical lab for high-dimensional martingale Berry-Esseen bounds."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    InvalidInput,
    InvalidRegime,
    InvalidSpec,
    MdsLabError,
    NoUniqueStationary,
    NotPositiveDefinite,
    NotPSD,
    QuadratureFailure,
)
from .gaussian import ProbEstimate, Rectangle, empirical_rect_prob, rect_prob, sample_mvn  # noqa: E402
from .generators import (  # noqa: E402
    Bolthausen,
    GaussianSurrogate,
    IidGaussian,
    MarkovChainSpec,
    MarkovInduced,
    MdsPath,
    generate,
    yurinskii_augment,
)
from .kolmogorov import build_family, dk_one_dim_oracle, estimate_dk  # noqa: E402
from .spectral import cholesky_factor, psd_sqrt, spectral_stats  # noqa: E402
