"""Autocovariance kernels, trace-R2 statistics and the chi-square tail.

Series are stored component-major: an array of shape (K, T) with K
components observed at T dates.  One-dimensional input is promoted to
shape (1, T).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateSeries, IllConditioned, LagTooLarge, ShapeMismatch

COND_LIMIT = 1e12

__all__ = [
    "as_series",
    "sample_autocov",
    "autocovariances",
    "trace_r2",
    "canonical_correlations_sq",
    "portmanteau_xi",
    "vec_kron_quadform",
    "chi2_sf",
]


def as_series(values) -> np.ndarray:
    """Validate and return a float (K, T) array."""
    x = np.asarray(values, dtype=float)
    if x.ndim == 1:
        x = x[np.newaxis, :]
    if x.ndim != 2:
        raise ShapeMismatch(f"series must be 1-D or 2-D, got ndim={x.ndim}")
    if x.shape[0] < 1 or x.shape[1] < 2:
        raise ShapeMismatch(f"series needs K >= 1 and T >= 2, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains NaN or Inf")
    return x


def _check_degenerate(x):
    flat = np.ptp(x, axis=1) == 0.0
    if np.any(flat):
        rows = np.flatnonzero(flat).tolist()
        raise DegenerateSeries(f"component(s) {rows} have zero variance")


def _lag_product(xc, h):
    T = xc.shape[1]
    g = xc[:, h:] @ xc[:, : T - h].T / (T - h)
    if h == 0:
        g = 0.5 * (g + g.T)
    return g


def sample_autocov(series, h: int) -> np.ndarray:
    """Sample autocovariance cov(y_t, y_{t-h}) with 1/(T-h) normalization.

    Both factors are centered at the full-sample mean.  The lag-0 matrix
    is symmetrized to remove roundoff asymmetry.
    """
    x = as_series(series)
    T = x.shape[1]
    if h < 0 or h > T - 2:
        raise LagTooLarge(f"lag {h} outside [0, {T - 2}] for T={T}")
    _check_degenerate(x)
    xc = x - x.mean(axis=1, keepdims=True)
    return _lag_product(xc, h)


def autocovariances(series, H: int) -> list[np.ndarray]:
    """Return [Gamma(0), ..., Gamma(H)] sharing one centering pass."""
    x = as_series(series)
    T = x.shape[1]
    if H > T - 2:
        raise LagTooLarge(f"lag {H} outside [0, {T - 2}] for T={T}")
    _check_degenerate(x)
    xc = x - x.mean(axis=1, keepdims=True)
    return [_lag_product(xc, h) for h in range(H + 1)]


def _whitener(gamma_0):
    """Cholesky factor of Gamma(0) after a condition check."""
    g0 = np.atleast_2d(np.asarray(gamma_0, dtype=float))
    g0 = 0.5 * (g0 + g0.T)
    eig = np.linalg.eigvalsh(g0)
    if eig[0] <= 0.0 or eig[-1] / eig[0] >= COND_LIMIT:
        cond = math.inf if eig[0] <= 0.0 else eig[-1] / eig[0]
        raise IllConditioned(f"Gamma(0) condition estimate {cond:.3g} >= {COND_LIMIT:.0e}")
    return np.linalg.cholesky(g0)


def _whitened(gamma_h, chol):
    # L^{-1} Gamma(h) L^{-T}: its squared singular values are the squared
    # canonical correlations.
    a = np.linalg.solve(chol, np.atleast_2d(gamma_h))
    return np.linalg.solve(chol, a.T).T


def trace_r2(gamma_h, gamma_0) -> float:
    """Tr[Gamma(h) Gamma(0)^-1 Gamma(h)' Gamma(0)^-1]."""
    a = _whitened(gamma_h, _whitener(gamma_0))
    return float(np.sum(a * a))


def canonical_correlations_sq(gamma_h, gamma_0) -> np.ndarray:
    """Squared canonical correlations between y_t and y_{t-h}, descending."""
    a = _whitened(gamma_h, _whitener(gamma_0))
    s = np.linalg.svd(a, compute_uv=False)
    return np.sort(s * s)[::-1]


def portmanteau_xi(series, H: int) -> float:
    """Multivariate portmanteau statistic T * sum_h Tr R2(h)."""
    if H < 1:
        raise ValueError("H must be >= 1")
    x = as_series(series)
    T = x.shape[1]
    if T <= H + 1:
        raise LagTooLarge(f"need T > H + 1, got T={T}, H={H}")
    gammas = autocovariances(x, H)
    chol = _whitener(gammas[0])
    total = 0.0
    for g in gammas[1:]:
        a = _whitened(g, chol)
        total += float(np.sum(a * a))
    return T * total


def vec_kron_quadform(gamma_1, gamma_0) -> float:
    """vec[G0^-1 G1']' (G0^-1 kron G0) vec[G0^-1 G1'].

    Regression-coefficient form of the lag-1 statistic; numerically equal
    to ``trace_r2(gamma_1, gamma_0)``.
    """
    g0 = np.atleast_2d(np.asarray(gamma_0, dtype=float))
    g1 = np.atleast_2d(np.asarray(gamma_1, dtype=float))
    _whitener(g0)
    g0_inv = np.linalg.inv(g0)
    b = (g0_inv @ g1.T).reshape(-1, order="F")
    return float(b @ np.kron(g0_inv, g0) @ b)


# regularized incomplete gamma ------------------------------------------------

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _lower_gamma_series(a, x):
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_gamma_cf(a, x):
    # modified Lentz evaluation of the Legendre continued fraction
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def chi2_sf(x: float, df: int) -> float:
    """Upper tail P(chi2(df) > x)."""
    if df < 1:
        raise ValueError("df must be a positive integer")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    a = 0.5 * df
    z = 0.5 * x
    if z < a + 1.0:
        q = 1.0 - _lower_gamma_series(a, z)
    else:
        q = _upper_gamma_cf(a, z)
    return min(1.0, max(0.0, q))
