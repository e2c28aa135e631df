"""Dense symmetric-matrix kernels.

Matrices are plain 2-D ``numpy`` arrays; :func:`as_symmetric` is the single
validation gate.  Everything here is a pure function of its inputs.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NotPositiveDefinite, NotPSD

__all__ = [
    "SpectralStats",
    "as_symmetric",
    "tol_psd",
    "cholesky_factor",
    "psd_sqrt",
    "spectral_stats",
    "is_psd",
    "lambda_min",
]


@dataclass(frozen=True)
class SpectralStats:
    lambda_min: float
    lambda_max: float
    d_min: float
    d_max: float
    op_norm: float


def as_symmetric(m, atol=None):
    """Return ``m`` as a float array after checking it is square and symmetric.

    The stored array is exactly symmetrised, so downstream kernels never see
    asymmetric round-off.
    """
    a = np.array(m, dtype=float, copy=True)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    atol = 1e-10 * scale if atol is None else atol
    if np.max(np.abs(a - a.T), initial=0.0) > atol:
        raise InvalidInput("matrix is not symmetric")
    return 0.5 * (a + a.T)


def tol_psd(m):
    """Scale-aware PSD tolerance: ``1e-10 * dim * max|m_ij|``."""
    m = np.asarray(m)
    return 1e-10 * m.shape[0] * float(np.max(np.abs(m), initial=0.0))


def cholesky_factor(m):
    """Lower-triangular ``L`` with ``L @ L.T == m``.

    Raises :class:`NotPositiveDefinite` when a pivot falls to or below
    :func:`tol_psd`.
    """
    a = as_symmetric(m)
    n = a.shape[0]
    tol = tol_psd(a)
    L = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > tol:
            raise NotPositiveDefinite(f"pivot {pivot:.3e} at index {j} is not above tolerance {tol:.3e}")
        L[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def psd_sqrt(m):
    """Symmetric PSD square root.

    Eigenvalues in ``[-tol_psd, 0)`` are clamped to zero; anything more
    negative raises :class:`NotPSD`.
    """
    a = as_symmetric(m)
    w, v = np.linalg.eigh(a)
    tol = tol_psd(a)
    if w.size and w[0] < -tol:
        raise NotPSD(f"smallest eigenvalue {w[0]:.3e} below -{tol:.3e}")
    w = np.clip(w, 0.0, None)
    s = (v * np.sqrt(w)) @ v.T
    return 0.5 * (s + s.T)


def spectral_stats(m):
    a = as_symmetric(m)
    w = np.linalg.eigvalsh(a)
    diag = np.diag(a)
    lo, hi = float(w[0]), float(w[-1])
    return SpectralStats(
        lambda_min=lo,
        lambda_max=hi,
        d_min=float(diag.min()),
        d_max=float(diag.max()),
        op_norm=max(abs(lo), abs(hi)),
    )


def lambda_min(m):
    return float(np.linalg.eigvalsh(as_symmetric(m))[0])


def is_psd(m, tol=None):
    a = as_symmetric(m)
    tol = tol_psd(a) if tol is None else tol
    return bool(np.linalg.eigvalsh(a)[0] >= -tol)
