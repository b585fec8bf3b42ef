"""Seeded simulators and the Monte Carlo grid harness."""

from __future__ import annotations

import itertools
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ExplosivePolynomial, GcovError
from .estimator import GcovOptions, gcov_estimate
from .models import IDENTITY, Transform, ar_arch_model, mar_model

log = logging.getLogger(__name__)

BURN_IN = 500
TRUNCATION_TOL = 1e-8
MAX_FAILURE_SHARE = 0.10
THREADS_ENV = "GCOV_THREADS"


def rng_stream(seed: int, *stream_id: int) -> np.random.Generator:
    """Independent reproducible substream keyed by (seed, *stream_id)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream_id)]))


def sample_student_t(nu: float, rng: np.random.Generator, size=None):
    """Student-t draws as N(0,1) / sqrt(chi2(nu) / nu); nu = inf gives N(0,1)."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    z = rng.standard_normal(size)
    if math.isinf(nu):
        return z
    return z / np.sqrt(rng.chisquare(nu, size) / nu)


def simulate_ar_arch(a1: float, alpha1: float, T: int, rng: np.random.Generator) -> np.ndarray:
    """y_t = a1 y_{t-1} + sigma_t u_t, sigma_t^2 = 1 + alpha1 eps_{t-1}^2; shape (1, T)."""
    if T < 10:
        raise ValueError("T must be >= 10")
    if abs(a1) >= 1 or alpha1 >= 1:
        warnings.warn(f"nonstationary AR-ARCH parameters a1={a1}, alpha1={alpha1}", stacklevel=2)
    n = T + BURN_IN
    u = rng.standard_normal(n)
    y = np.empty(n)
    y_prev = 0.0
    eps_prev = 0.0
    for t in range(n):
        eps = math.sqrt(1.0 + alpha1 * eps_prev * eps_prev) * u[t]
        y_prev = a1 * y_prev + eps
        y[t] = y_prev
        eps_prev = eps
    return y[BURN_IN:][np.newaxis, :]


def _check_roots(coefs, label):
    coefs = np.atleast_1d(np.asarray(coefs, dtype=float))
    if coefs.size == 0 or not np.any(coefs):
        return 0.0
    # companion eigenvalues are the reciprocals of the polynomial roots
    lam = np.roots(np.r_[1.0, -coefs])
    rho = float(np.max(np.abs(lam)))
    if rho >= 1.0:
        raise ExplosivePolynomial(f"{label} polynomial has a root inside or on the unit circle")
    return rho


def _ma_weights(coefs, m):
    """First m+1 coefficients of (1 - sum c_j z^j)^-1."""
    coefs = np.atleast_1d(np.asarray(coefs, dtype=float))
    w = np.zeros(m + 1)
    w[0] = 1.0
    for i in range(1, m + 1):
        k = min(i, coefs.size)
        w[i] = coefs[:k] @ w[i - k : i][::-1]
    return w


def truncation_length(phi, psi, tol: float = TRUNCATION_TOL) -> int:
    rho = max(_check_roots(phi, "causal"), _check_roots(psi, "noncausal"))
    if rho == 0.0:
        return max(len(np.atleast_1d(phi)), len(np.atleast_1d(psi)), 1)
    m = math.ceil(math.log(tol) / math.log(rho))
    # polynomial factor for repeated roots
    order = max(len(np.atleast_1d(phi)), len(np.atleast_1d(psi)))
    return m + 10 * order


def simulate_mar(phi, psi, T: int, nu_dof: float, rng: np.random.Generator,
                 m: int | None = None) -> np.ndarray:
    """Mixed causal-noncausal AR via a truncated two-sided MA; shape (1, T).

    ``m`` MA terms are kept on each side; by default the smallest count at
    which the slowest filter decay falls below 1e-8 (plus a margin).
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    if not nu_dof > 2:
        raise ValueError("nu_dof must exceed 2")
    m_default = truncation_length(phi, psi)
    m = m_default if m is None else int(m)
    eps = sample_student_t(nu_dof, rng, T + 2 * m)
    return two_sided_filter(eps, phi, psi, m)[np.newaxis, :]


def two_sided_filter(eps, phi, psi, m: int) -> np.ndarray:
    """Apply the truncated causal then noncausal MA filters to ``eps``.

    Output has length ``len(eps) - 2m``; entry k lines up with ``eps[k + m]``.
    """
    eps = np.asarray(eps, dtype=float)
    a = _ma_weights(phi, m)
    b = _ma_weights(psi, m)
    # v_t = sum_j a_j eps_{t-j}, valid for t >= m
    v = np.convolve(eps, a, mode="valid")
    # y_t = sum_k b_k v_{t+k}
    return np.convolve(v, b[::-1], mode="valid")


# Monte Carlo -----------------------------------------------------------------

FAMILY_PARAMS = {"ar_arch": ("a1", "alpha1"), "mar": ("phi", "psi")}


def default_model(family: str, transforms=None):
    if family == "ar_arch":
        return ar_arch_model() if transforms is None else ar_arch_model(tuple(transforms))
    if family == "mar":
        tf = (IDENTITY, Transform("square"), Transform("cube")) if transforms is None else tuple(transforms)
        return mar_model(1, 1, tf)
    raise GcovError(f"no Monte Carlo design for family {family!r}")


def simulate_family(family: str, params: dict, T: int, rng, nu_dof: float = 6.0):
    if family == "ar_arch":
        return simulate_ar_arch(params["a1"], params["alpha1"], T, rng)
    if family == "mar":
        return simulate_mar([params["phi"]], [params["psi"]], T, nu_dof, rng)
    raise GcovError(f"no simulator for family {family!r}")


@dataclass
class CellSummary:
    params: dict
    mean: dict
    q05: dict
    q95: dict
    replications: int
    failures: int
    flagged: bool


@dataclass
class MonteCarloTable:
    family: str
    param_names: tuple[str, ...]
    T: int
    replications: int
    seed: int
    cells: list[CellSummary] = field(default_factory=list)

    def rows(self) -> list[dict]:
        out = []
        for c in self.cells:
            row = dict(c.params)
            for n in self.param_names:
                row[f"mean_{n}"] = c.mean[n]
            for n in self.param_names:
                row[f"q05_{n}"] = c.q05[n]
                row[f"q95_{n}"] = c.q95[n]
            row.update(replications=c.replications, failures=c.failures, flagged=c.flagged)
            out.append(row)
        return out

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "T": self.T,
            "replications": self.replications,
            "seed": self.seed,
            "params": list(self.param_names),
            "cells": self.rows(),
        }


def _one_replication(job):
    family, cell_idx, rep, params, T, seed, opts, nu_dof, transforms = job
    rng = rng_stream(seed, cell_idx, rep)
    y = simulate_family(family, params, T, rng, nu_dof)
    model = default_model(family, transforms)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = gcov_estimate(model, y, opts)
    except (GcovError, np.linalg.LinAlgError) as exc:
        log.debug("cell %d rep %d failed: %s", cell_idx, rep, exc)
        return None
    return res.theta_hat.values


def run_monte_carlo(family: str, grid, T: int, replications: int, opts: GcovOptions | None = None,
                    seed: int = 0, nu_dof: float = 6.0, transforms=None,
                    workers: int | None = None) -> MonteCarloTable:
    """Simulate, estimate and summarize each grid cell.

    ``grid`` is a list of dicts keyed by the family's parameter names.  Each
    (cell, replication) pair draws from its own stream, so the table does
    not depend on ``workers``.
    """
    if replications < 2:
        raise ValueError("replications must be >= 2")
    opts = opts or GcovOptions()
    names = FAMILY_PARAMS[family] if family in FAMILY_PARAMS else None
    if names is None:
        raise GcovError(f"no Monte Carlo design for family {family!r}")
    grid = [dict(c) for c in grid]
    jobs = [(family, ci, r, cell, T, seed, opts, nu_dof, transforms)
            for ci, cell in enumerate(grid) for r in range(replications)]
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            estimates = list(pool.map(_one_replication, jobs, chunksize=4))
    else:
        estimates = [_one_replication(j) for j in jobs]

    table = MonteCarloTable(family, names, T, replications, seed)
    for ci, cell in enumerate(grid):
        chunk = estimates[ci * replications : (ci + 1) * replications]
        ok = np.array([e for e in chunk if e is not None])
        failures = replications - len(ok)
        if len(ok):
            mean = dict(zip(names, ok.mean(axis=0).tolist()))
            q05 = dict(zip(names, np.quantile(ok, 0.05, axis=0).tolist()))
            q95 = dict(zip(names, np.quantile(ok, 0.95, axis=0).tolist()))
        else:
            mean = q05 = q95 = {n: float("nan") for n in names}
        table.cells.append(CellSummary(
            params=dict(cell), mean=mean, q05=q05, q95=q95, replications=replications,
            failures=failures, flagged=failures > MAX_FAILURE_SHARE * replications))
    return table


def parse_grid_axis(text: str) -> tuple[str, list[float]]:
    """``name=start:step:stop`` (inclusive) or ``name=v1,v2,...``."""
    name, sep, spec = text.partition("=")
    if not sep or not name.strip():
        raise ValueError(f"bad grid axis {text!r}")
    spec = spec.strip()
    if ":" in spec:
        start, step, stop = (float(v) for v in spec.split(":"))
        if step <= 0:
            raise ValueError("grid step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + i * step, 12) for i in range(n)]
    else:
        values = [float(v) for v in spec.split(",") if v.strip()]
    return name.strip(), values


def expand_grid(axes) -> list[dict]:
    names = [n for n, _ in axes]
    return [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in axes))]
