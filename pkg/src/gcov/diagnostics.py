"""Portmanteau white-noise tests and autocorrelation reports."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import LagTooLarge
from .stats import (
    _whitened,
    _whitener,
    as_series,
    autocovariances,
    canonical_correlations_sq,
    chi2_sf,
)


@dataclass
class TestReport:
    statistic: float
    df: int
    p_value: float | None
    H: int
    K: int
    kind: str
    extra: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self) -> dict:
        return asdict(self)


def weak_wn_test(series, H: int) -> TestReport:
    """Multivariate portmanteau test of zero autocovariance at lags 1..H.

    Reports df = K^2 H.  For K > 1 the alternative K H count and its
    p-value are carried in ``extra``.
    """
    x = as_series(series)
    K, T = x.shape
    if H < 1:
        raise ValueError("H must be >= 1")
    if T <= H + 1:
        raise LagTooLarge(f"need T > H + 1, got T={T}, H={H}")
    gammas = autocovariances(x, H)
    chol = _whitener(gammas[0])
    per_lag = []
    for g in gammas[1:]:
        a = _whitened(g, chol)
        per_lag.append(float(np.sum(a * a)))
    stat = T * float(sum(per_lag))
    df = K * K * H
    extra = {
        "trace_r2_by_lag": per_lag,
        "canonical_correlations_sq": [
            canonical_correlations_sq(g, gammas[0]).tolist() for g in gammas[1:]
        ],
    }
    if K > 1:
        extra["df_alt"] = K * H
        extra["p_value_alt"] = chi2_sf(stat, K * H)
    return TestReport(stat, df, chi2_sf(stat, df), H, K, "weak_wn", extra)


def _lagged_block(gammas, i, j):
    # Cov(Y_{t-i}, Y_{t-j}) = Gamma(j - i), with Gamma(-k) = Gamma(k)'
    d = j - i
    return gammas[d] if d >= 0 else gammas[-d].T


def sur_xi(series, H: int) -> TestReport:
    """Stacked-regressor (SUR) portmanteau statistic.

    T Tr[G*(1) G*(0)^-1 G*(1)' G(0)^-1] with G*(1) = Cov(Y_t, (Y_{t-1},...,Y_{t-H}))
    and G*(0) the block-Toeplitz variance of the stacked lags, both built from
    the same sample autocovariances as :func:`weak_wn_test`.
    """
    x = as_series(series)
    K, T = x.shape
    if T <= K * H + 1:
        raise LagTooLarge(f"need T > K H + 1, got T={T}, K={K}, H={H}")
    gammas = autocovariances(x, H)
    g_star_1 = np.hstack(gammas[1:])
    g_star_0 = np.block([[_lagged_block(gammas, i, j) for j in range(H)] for i in range(H)])
    chol_star = _whitener(g_star_0)
    chol = _whitener(gammas[0])
    # Tr[A B^-1 A' C^-1] = ||L_C^-1 A L_B^-T||_F^2
    a = np.linalg.solve(chol, g_star_1)
    a = np.linalg.solve(chol_star, a.T)
    stat = T * float(np.sum(a * a))
    df = K * K * H
    return TestReport(stat, df, chi2_sf(stat, df), H, K, "sur")


def residual_based_test(result) -> TestReport:
    """Residual portmanteau test at the GCov optimum, df = K^2 H - rank."""
    if not result.converged:
        raise ValueError("residual-based test needs a converged estimation result")
    df = result.K * result.K * result.H - result.jacobian_rank
    if df < 1:
        return TestReport(result.statistic, 0, None, result.H, result.K, "residual_based",
                          {"non_positive_df": True})
    return TestReport(result.statistic, df, chi2_sf(result.statistic, df), result.H, result.K,
                      "residual_based")


def acf(series, max_lag: int) -> np.ndarray:
    """Autocorrelation matrices D^-1/2 G(h) D^-1/2 for h = 0..max_lag.

    Returns an array of shape (max_lag + 1, K, K).
    """
    x = as_series(series)
    if max_lag > x.shape[1] - 2:
        raise LagTooLarge(f"max_lag {max_lag} > T - 2")
    gammas = autocovariances(x, max_lag)
    s = 1.0 / np.sqrt(np.diag(gammas[0]))
    return np.stack([g * np.outer(s, s) for g in gammas])
