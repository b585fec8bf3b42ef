"""Generalized covariance (GCov) estimation.

The objective is the residual portmanteau criterion

    L_T(theta) = sum_{h=1..H} Tr[G(h) G(0)^-1 G(h)' G(0)^-1],

with G(h) the sample autocovariances of the transformed residuals
g(Y_t; theta).  It is minimized by a seeded multistart Nelder-Mead search
followed by a quasi-Newton polish.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import (
    BoundaryTheta,
    DegenerateSeries,
    IdentificationError,
    IllConditioned,
    NoConvergence,
    SingularOmega,
)
from .models import ModelSpec, ThetaVector
from .stats import _whitened, _whitener, as_series, autocovariances, chi2_sf

log = logging.getLogger(__name__)

BAD_OBJECTIVE = 1e10


@dataclass(frozen=True)
class GcovOptions:
    H: int = 3
    multistart: int = 5
    max_iter: int = 4000
    f_tol: float = 1e-10
    x_tol: float = 1e-8
    fd_step_scale: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.H < 1:
            raise ValueError("H must be >= 1")
        if self.multistart < 1:
            raise ValueError("multistart must be >= 1")
        if self.f_tol <= 0 or self.x_tol <= 0:
            raise ValueError("f_tol and x_tol must be positive")


@dataclass
class EstimationResult:
    theta_hat: ThetaVector
    objective: float
    statistic: float
    df: int
    p_value: float | None
    cov_corollary1: np.ndarray
    cov_hessian: np.ndarray
    jacobian_rank: int
    converged: bool
    n_obs_used: int
    iterations: int
    H: int
    K: int
    flags: list[str] = field(default_factory=list)

    @property
    def se_corollary1(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov_corollary1), 0.0, None))

    @property
    def se_hessian(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov_hessian), 0.0, None))


def _values(theta):
    return np.asarray(theta.values if isinstance(theta, ThetaVector) else theta, dtype=float)


def _objective_terms(model, values, data, H):
    u, penalty = model.evaluate(values, data)
    gammas = autocovariances(u, H)
    chol = _whitener(gammas[0])
    total = 0.0
    for g in gammas[1:]:
        a = _whitened(g, chol)
        total += float(np.sum(a * a))
    return total, penalty, u.shape[1]


def gcov_objective(model: ModelSpec, theta, data, H: int) -> float:
    """L_T(theta); raises IllConditioned when G(0; theta) is near singular."""
    if H < 1:
        raise ValueError("H must be >= 1")
    value, _, _ = _objective_terms(model, _values(theta), as_series(data), H)
    return value


def _safe_objective(model, data, H):
    def f(v):
        try:
            value, penalty, _ = _objective_terms(model, v, data, H)
        except (IllConditioned, DegenerateSeries, np.linalg.LinAlgError):
            return BAD_OBJECTIVE
        out = value + penalty
        return out if math.isfinite(out) else BAD_OBJECTIVE
    return f


def _steps(values, scale):
    return scale * np.maximum(1.0, np.abs(values))


def autocov_jacobian(model: ModelSpec, theta, data, H: int, fd_step_scale: float = 1e-5,
                     check_bounds: bool = True) -> np.ndarray:
    """Central-difference Jacobian of stacked vec G(h; theta)', h = 1..H.

    Rows are ordered lag-major, then in column-major vec order of G(h)'.
    """
    x = as_series(data)
    v = _values(theta)
    tmpl = model.param_template
    eps = _steps(v, fd_step_scale)
    if check_bounds and (np.any(v - eps < tmpl.lower) or np.any(v + eps > tmpl.upper)):
        raise BoundaryTheta("finite-difference stencil leaves the parameter box")

    def stacked(w):
        u, _ = model.evaluate(w, x)
        gammas = autocovariances(u, H)
        return np.concatenate([g.reshape(-1) for g in gammas[1:]])

    cols = []
    for j in range(v.size):
        e = np.zeros_like(v)
        e[j] = eps[j]
        cols.append((stacked(v + e) - stacked(v - e)) / (2.0 * eps[j]))
    return np.column_stack(cols)


def identification_rank(jacobian) -> int:
    """Numerical column rank of the autocovariance Jacobian."""
    jac = np.atleast_2d(np.asarray(jacobian, dtype=float))
    if not np.all(np.isfinite(jac)):
        raise ValueError("jacobian contains non-finite entries")
    s = np.linalg.svd(jac, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    tol = s[0] * max(jac.shape) * 1e-12
    return int(np.sum(s > tol))


def _residual_gamma0(model, v, x):
    u, _ = model.evaluate(v, x)
    return autocovariances(u, 0)[0], u.shape[1]


def omega_matrix(jacobian, gamma_0, H: int) -> np.ndarray:
    """sum_h D_h' (G0^-1 kron G0^-1) D_h with D_h the lag-h Jacobian block."""
    g0_inv = np.linalg.inv(np.atleast_2d(gamma_0))
    w = np.kron(g0_inv, g0_inv)
    k2 = w.shape[0]
    omega = np.zeros((jacobian.shape[1], jacobian.shape[1]))
    for h in range(H):
        d = jacobian[h * k2 : (h + 1) * k2]
        omega += d.T @ w @ d
    return 0.5 * (omega + omega.T)


def numerical_hessian(f, v, step_scale=1e-4) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = v.size
    eps = _steps(v, step_scale)
    hess = np.empty((n, n))
    f0 = f(v)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = eps[i]
        hess[i, i] = (f(v + ei) - 2.0 * f0 + f(v - ei)) / eps[i] ** 2
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = eps[j]
            hij = (f(v + ei + ej) - f(v + ei - ej) - f(v - ei + ej) + f(v - ei - ej)) / (
                4.0 * eps[i] * eps[j])
            hess[i, j] = hess[j, i] = hij
    return hess


def _psd_inverse(m):
    """Inverse via eigendecomposition; pseudo-inverse on the positive part."""
    m = 0.5 * (m + m.T)
    w, q = np.linalg.eigh(m)
    tol = max(abs(w).max(), 1e-300) * m.shape[0] * 1e-12
    keep = w > tol
    inv = (q[:, keep] / w[keep]) @ q[:, keep].T
    return 0.5 * (inv + inv.T), bool(keep.all())


def asymptotic_covariance(model: ModelSpec, theta_hat, data, H: int, fd_step_scale: float = 1e-5,
                          check_bounds: bool = True, jacobian=None) -> np.ndarray:
    """Per-sample covariance Omega^-1 / T_used of the GCov estimator."""
    x = as_series(data)
    v = _values(theta_hat)
    if jacobian is None:
        jacobian = autocov_jacobian(model, v, x, H, fd_step_scale, check_bounds)
    g0, n_used = _residual_gamma0(model, v, x)
    _whitener(g0)
    omega = omega_matrix(jacobian, g0, H)
    rank = identification_rank(jacobian)
    if rank < v.size:
        raise SingularOmega(f"Jacobian rank {rank} < dim(theta) = {v.size}")
    return np.linalg.inv(omega) / n_used


def hessian_covariance(model: ModelSpec, theta_hat, data, H: int, step_scale: float = 1e-4):
    """2 Hess(L_T)^-1 / T_used; second element flags a non-PD Hessian."""
    x = as_series(data)
    v = _values(theta_hat)
    f = _safe_objective(model, x, H)
    hess = numerical_hessian(f, v, step_scale)
    inv, full = _psd_inverse(hess)
    n_used = model.n_obs(x.shape[1])
    return 2.0 * inv / n_used, full


def _fd_gradient(f, lower, upper, scale=1e-7):
    def grad(v):
        eps = _steps(v, scale)
        g = np.empty_like(v)
        for j in range(v.size):
            hi = min(v[j] + eps[j], upper[j])
            lo = max(v[j] - eps[j], lower[j])
            a = v.copy()
            b = v.copy()
            a[j] = hi
            b[j] = lo
            g[j] = (f(a) - f(b)) / (hi - lo) if hi > lo else 0.0
        return g
    return grad


def _default_starts(model, x):
    tmpl = model.param_template
    starts = []
    if model.name == "var":
        K, p = model.base_dim, model.orders[0]
        T = x.shape[1]
        X = np.vstack([np.ones(T - p)] + [x[:, p - j : T - j] for j in range(1, p + 1)]).T
        coef, *_ = np.linalg.lstsq(X, x[:, p:].T, rcond=None)
        # rows of coef[1:] stack Phi_j' blocks; theta stacks vec(Phi_j')
        phis = [coef[1 + j * K : 1 + (j + 1) * K].T for j in range(p)]
        starts.append(np.concatenate([phi.reshape(-1) for phi in phis]))
    elif model.name == "ar_arch":
        y = x[0]
        yc = y - y.mean()
        a1 = float(yc[1:] @ yc[:-1] / (yc[:-1] @ yc[:-1]))
        starts.append(np.array([a1, 0.1]))
    else:
        starts.append(np.zeros(len(tmpl)))
    return [np.clip(s, tmpl.lower, tmpl.upper) for s in starts]


def _random_starts(model, n, seed):
    tmpl = model.param_template
    lo = np.where(np.isfinite(tmpl.lower), tmpl.lower, -1.0)
    hi = np.where(np.isfinite(tmpl.upper), tmpl.upper, 1.0)
    lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6c0f]))
    return [rng.uniform(lo, hi) for _ in range(n)]


def _simplex_diameter(sim):
    return float(np.max(np.abs(sim - sim[0]))) if sim is not None else math.inf


def gcov_estimate(model: ModelSpec, data, opts: GcovOptions | None = None,
                  starts=None) -> EstimationResult:
    """Minimize the GCov objective and assemble the inference diagnostics.

    Raises :class:`NoConvergence` (with ``.result`` populated) when the best
    local search exhausted ``max_iter`` with a simplex wider than ``x_tol``.
    """
    opts = opts or GcovOptions()
    x = as_series(data)
    tmpl = model.param_template
    J = len(tmpl)
    K = model.residual_dim
    H = opts.H
    if K * K * H < J:
        warnings.warn(f"order condition fails: K^2 H = {K * K * H} < dim(theta) = {J}",
                      stacklevel=2)
    f = _safe_objective(model, x, H)
    bounds = list(zip(tmpl.lower, tmpl.upper))

    if starts is None:
        starts = _default_starts(model, x) + _random_starts(model, opts.multistart, opts.seed)
    starts = [np.clip(np.asarray(s, dtype=float), tmpl.lower, tmpl.upper) for s in starts]

    best = None
    total_iter = 0
    n_bad = 0
    for i, s0 in enumerate(starts):
        if f(s0) >= BAD_OBJECTIVE:
            n_bad += 1
        res = optimize.minimize(
            f, s0, method="Nelder-Mead", bounds=bounds,
            options={"xatol": opts.x_tol, "fatol": opts.f_tol, "maxiter": opts.max_iter,
                     "maxfev": 4 * opts.max_iter},
        )
        total_iter += int(res.nit)
        # ties go to the earlier start so the OLS / sign-convention start wins
        if best is None or res.fun < best.fun - opts.f_tol:
            best = res
        log.debug("start %d: f=%.3e nit=%d status=%d", i, res.fun, res.nit, res.status)
    if n_bad == len(starts) and best.fun >= BAD_OBJECTIVE:
        raise IllConditioned("Gamma(0; theta) ill-conditioned at every start")

    nm_ok = best.status == 0 or _simplex_diameter(
        getattr(best, "final_simplex", (None,))[0]) <= opts.x_tol
    v_hat = np.asarray(best.x, dtype=float)
    f_hat = float(best.fun)

    polish = optimize.minimize(
        f, v_hat, method="L-BFGS-B", jac=_fd_gradient(f, tmpl.lower, tmpl.upper),
        bounds=bounds, options={"maxiter": min(200, opts.max_iter), "ftol": 1e-15, "gtol": 1e-12},
    )
    total_iter += int(polish.nit)
    if polish.fun < f_hat:
        v_hat, f_hat = np.asarray(polish.x, dtype=float), float(polish.fun)
    converged = bool(nm_ok or polish.success)

    flags = []
    if f(v_hat) >= BAD_OBJECTIVE:
        raise IllConditioned("Gamma(0; theta) ill-conditioned at the optimum")
    objective, penalty, n_used = _objective_terms(model, v_hat, x, H)
    if penalty > 0:
        flags.append("variance_floor_active")

    eps = _steps(v_hat, opts.fd_step_scale)
    at_bound = np.any(v_hat - eps < tmpl.lower) or np.any(v_hat + eps > tmpl.upper)
    if at_bound:
        flags.append("theta_at_boundary")
    jac = autocov_jacobian(model, v_hat, x, H, opts.fd_step_scale, check_bounds=False)
    rank = identification_rank(jac)
    g0, _ = _residual_gamma0(model, v_hat, x)
    omega = omega_matrix(jac, g0, H)
    if rank < J:
        flags.append("singular_omega")
        inv, _ = _psd_inverse(omega)
        cov1 = inv / n_used
    else:
        cov1 = np.linalg.inv(omega) / n_used
        cov1 = 0.5 * (cov1 + cov1.T)
    cov_h, hess_pd = hessian_covariance(model, v_hat, x, H)
    if not hess_pd:
        flags.append("hessian_not_pd")

    df = K * K * H - rank
    statistic = n_used * objective
    p_value = chi2_sf(statistic, df) if df >= 1 else None
    result = EstimationResult(
        theta_hat=tmpl.with_values(np.clip(v_hat, tmpl.lower, tmpl.upper)),
        objective=objective,
        statistic=statistic,
        df=df,
        p_value=p_value,
        cov_corollary1=cov1,
        cov_hessian=cov_h,
        jacobian_rank=rank,
        converged=converged,
        n_obs_used=n_used,
        iterations=total_iter,
        H=H,
        K=K,
        flags=flags,
    )
    if not converged:
        raise NoConvergence("optimizer hit max_iter without meeting x_tol", result)
    return result


def check_order_condition(model: ModelSpec, H: int):
    K = model.residual_dim
    J = model.n_params
    if K * K * H < J:
        raise IdentificationError(
            f"under-identified: K^2 H = {K * K * H} < dim(theta) = {J}; increase H or add transforms")
