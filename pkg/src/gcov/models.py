"""Residual maps g(Y_t; theta) for the supported model families.

A :class:`ModelSpec` bundles a family residual map with its parameter
template, the number of dates it consumes at each end of the sample and
an ordered stack of nonlinear transforms applied to the residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeMismatch, TooShort, UnknownModel
from .stats import as_series

ARCH_VARIANCE_FLOOR = 1e-8
ARCH_PENALTY = 1e3
AR_BOUND = 0.999

TRANSFORM_KINDS = ("identity", "abs", "square", "cube", "sign", "power", "indicator")


@dataclass(frozen=True)
class Transform:
    """Row-wise nonlinear transform of a residual matrix.

    ``indicator`` takes strictly increasing interior cut points; with ``n``
    cut points it defines ``n + 1`` bins and emits the first ``n`` bin
    indicators (the last one is redundant).
    """

    kind: str
    power: float | None = None
    edges: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise ValueError(f"unknown transform {self.kind!r}")
        if self.kind == "power" and self.power is None:
            raise ValueError("power transform needs an exponent")
        if self.kind == "indicator":
            edges = tuple(float(e) for e in self.edges if np.isfinite(e))
            if not edges:
                raise ValueError("indicator transform needs at least one finite edge")
            if any(b <= a for a, b in zip(edges, edges[1:])):
                raise ValueError("indicator edges must be strictly increasing")
            object.__setattr__(self, "edges", edges)

    @classmethod
    def parse(cls, text: str) -> "Transform":
        """Parse ``identity``, ``power:0.5`` or ``indicator:-1/0/1``."""
        kind, _, arg = text.strip().partition(":")
        kind = kind.strip().lower()
        if kind == "power":
            return cls("power", power=float(arg))
        if kind == "indicator":
            return cls("indicator", edges=tuple(float(v) for v in arg.split("/") if v))
        if arg:
            raise ValueError(f"transform {kind!r} takes no argument")
        return cls(kind)

    def __str__(self):
        if self.kind == "power":
            return f"power:{self.power:g}"
        if self.kind == "indicator":
            return "indicator:" + "/".join(f"{e:g}" for e in self.edges)
        return self.kind

    @property
    def rows_per_input(self) -> int:
        return len(self.edges) if self.kind == "indicator" else 1

    def apply(self, u: np.ndarray) -> np.ndarray:
        k = self.kind
        if k == "identity":
            return u
        if k == "abs":
            return np.abs(u)
        if k == "square":
            return u * u
        if k == "cube":
            return u * u * u
        if k == "sign":
            return np.sign(u)
        if k == "power":
            lam = float(self.power)
            if lam != int(lam) and np.any(u <= 0):
                raise DomainError(f"power {lam:g} needs strictly positive input")
            return u**lam
        bins = np.searchsorted(np.asarray(self.edges), u, side="right")
        out = [(bins == j).astype(float) for j in range(len(self.edges))]
        # rows grouped by input component, then by bin
        return np.concatenate([np.stack([o[i] for o in out]) for i in range(u.shape[0])])


IDENTITY = Transform("identity")


def apply_transforms(residuals, tags) -> np.ndarray:
    """Stack the transformed residuals in tag order."""
    if not tags:
        raise ValueError("at least one transform is required")
    u = np.atleast_2d(np.asarray(residuals, dtype=float))
    return np.concatenate([t.apply(u) for t in tags], axis=0)


@dataclass(frozen=True)
class ThetaVector:
    """Flat parameter vector with names and box bounds."""

    values: np.ndarray
    names: tuple[str, ...]
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.values, dtype=float)).copy()
        n = v.size
        if n < 1:
            raise ValueError("theta needs at least one coordinate")
        lo = np.full(n, -np.inf) if self.lower is None else np.broadcast_to(
            np.asarray(self.lower, dtype=float), (n,)).copy()
        hi = np.full(n, np.inf) if self.upper is None else np.broadcast_to(
            np.asarray(self.upper, dtype=float), (n,)).copy()
        if len(self.names) != n:
            raise ShapeMismatch(f"{len(self.names)} names for {n} values")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(v < lo) or np.any(v > hi):
            raise ValueError(f"theta {v} outside bounds")
        for name, arr in (("values", v), ("lower", lo), ("upper", hi)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "names", tuple(self.names))

    def __len__(self):
        return self.values.size

    def with_values(self, values) -> "ThetaVector":
        return ThetaVector(values, self.names, self.lower, self.upper)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


# family residual maps ---------------------------------------------------------


def residuals_var(series, phis) -> np.ndarray:
    """u_t = Y_t - sum_j Phi_j Y_{t-j} for t = p+1..T."""
    y = as_series(series)
    K, T = y.shape
    phis = [np.atleast_2d(np.asarray(p, dtype=float)) for p in phis]
    p = len(phis)
    for j, phi in enumerate(phis, 1):
        if phi.shape != (K, K):
            raise ShapeMismatch(f"Phi_{j} has shape {phi.shape}, expected {(K, K)}")
    if T <= p:
        raise TooShort(f"VAR({p}) needs T > {p}")
    u = y[:, p:].copy()
    for j, phi in enumerate(phis, 1):
        u -= phi @ y[:, p - j : T - j]
    return u


def residuals_mar(series, phi, psi) -> np.ndarray:
    """Residuals of (1 - sum phi_j L^j)(1 - sum psi_k L^-k) y_t = u_t.

    The noncausal (lead) filter is applied first, then the causal one; the
    output covers t = r+1..T-s.
    """
    y = as_series(series)
    if y.shape[0] != 1:
        raise ShapeMismatch("MAR residuals need a univariate series")
    y = y[0]
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    r, s = phi.size, psi.size
    T = y.size
    if T <= r + s:
        raise TooShort(f"MAR({r},{s}) needs T > {r + s}, got {T}")
    n = T - s
    w = y[:n].copy()
    for k in range(1, s + 1):
        w -= psi[k - 1] * y[k : n + k]
    u = w[r:].copy()
    for j in range(1, r + 1):
        u -= phi[j - 1] * w[r - j : n - j]
    return u[np.newaxis, :]


def _ar_arch_innovations(y, a1, alpha1):
    eps = y[1:] - a1 * y[:-1]
    var = 1.0 + alpha1 * eps[:-1] ** 2
    deficit = float(np.sum(np.maximum(ARCH_VARIANCE_FLOOR - var, 0.0)))
    var = np.maximum(var, ARCH_VARIANCE_FLOOR)
    return eps[1:] / np.sqrt(var), deficit


def residuals_ar_arch(series, a1: float, alpha1: float) -> np.ndarray:
    """Standardized AR(1)-ARCH(1) residuals stacked with their absolute values.

    Drift and ARCH intercept are fixed at 0 and 1.  Rows are (u_t, |u_t|)
    for t = 3..T.
    """
    y = as_series(series)
    if y.shape[0] != 1:
        raise ShapeMismatch("AR-ARCH residuals need a univariate series")
    if y.shape[1] < 3:
        raise TooShort("AR-ARCH residuals need T >= 3")
    u, _ = _ar_arch_innovations(y[0], a1, alpha1)
    return np.vstack([u, np.abs(u)])


# model specification ----------------------------------------------------------

FAMILIES = ("var", "mar", "ar_arch")


@dataclass(frozen=True)
class ModelSpec:
    """A residual map with its parameter template and transform stack.

    ``trim`` is ``(lead, lag)``: dates consumed at the end and at the start
    of the sample respectively.
    """

    name: str
    param_template: ThetaVector
    trim: tuple[int, int]
    base_dim: int
    transforms: tuple[Transform, ...] = (IDENTITY,)
    orders: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.name not in FAMILIES:
            raise UnknownModel(f"unknown model family {self.name!r}")
        if not self.transforms:
            raise ValueError("transform stack must be nonempty")
        object.__setattr__(self, "transforms", tuple(self.transforms))

    @property
    def residual_dim(self) -> int:
        return self.base_dim * sum(t.rows_per_input for t in self.transforms)

    @property
    def n_params(self) -> int:
        return len(self.param_template)

    def n_obs(self, T: int) -> int:
        return T - self.trim[0] - self.trim[1]

    def evaluate(self, values, data):
        """Raw residual evaluation: ``(residuals, penalty)``, no bound checks."""
        v = np.asarray(values, dtype=float)
        penalty = 0.0
        if self.name == "var":
            K, p = self.base_dim, self.orders[0]
            phis = [v[j * K * K : (j + 1) * K * K].reshape(K, K) for j in range(p)]
            u = residuals_var(data, phis)
        elif self.name == "mar":
            r, s = self.orders
            u = residuals_mar(data, v[:r], v[r : r + s])
        else:
            y = as_series(data)
            if y.shape[0] != 1:
                raise ShapeMismatch("AR-ARCH residuals need a univariate series")
            if y.shape[1] < 3:
                raise TooShort("AR-ARCH residuals need T >= 3")
            u, deficit = _ar_arch_innovations(y[0], v[0], v[1])
            u = u[np.newaxis, :]
            penalty = ARCH_PENALTY * deficit
        return apply_transforms(u, self.transforms), penalty

    def describe(self) -> dict:
        return {
            "model": self.name,
            "orders": list(self.orders),
            "transforms": [str(t) for t in self.transforms],
            "params": list(self.param_template.names),
        }


def var_model(K: int = 1, p: int = 1, transforms=(IDENTITY,), bound: float = np.inf) -> ModelSpec:
    """VAR(p) residual map with theta = [vec Phi_1', ..., vec Phi_p']."""
    names = tuple(
        f"phi{j}[{i + 1},{k + 1}]" for j in range(1, p + 1) for i in range(K) for k in range(K)
    )
    n = len(names)
    theta = ThetaVector(np.zeros(n), names, -bound, bound)
    return ModelSpec("var", theta, (0, p), K, tuple(transforms), (p,))


def mar_model(r: int = 1, s: int = 1, transforms=(IDENTITY,), bound: float = AR_BOUND) -> ModelSpec:
    names = tuple(f"phi{j}" for j in range(1, r + 1)) + tuple(f"psi{k}" for k in range(1, s + 1))
    theta = ThetaVector(np.zeros(r + s), names, -bound, bound)
    return ModelSpec("mar", theta, (s, r), 1, tuple(transforms), (r, s))


def ar_arch_model(transforms=(IDENTITY, Transform("abs")),
                  a1_bounds=(-1.5, 1.5), alpha1_bounds=(0.0, 3.0)) -> ModelSpec:
    theta = ThetaVector([0.0, 0.0], ("a1", "alpha1"),
                        [a1_bounds[0], alpha1_bounds[0]], [a1_bounds[1], alpha1_bounds[1]])
    return ModelSpec("ar_arch", theta, (0, 2), 1, tuple(transforms), (1, 1))


def build_model(name: str, **kwargs) -> ModelSpec:
    builders = {"var": var_model, "mar": mar_model, "ar_arch": ar_arch_model}
    try:
        builder = builders[name]
    except KeyError:
        raise UnknownModel(f"unknown model family {name!r}") from None
    return builder(**kwargs)


def model_residuals(model: ModelSpec, theta, data) -> np.ndarray:
    """Transformed residual series g(Y_t; theta) for ``model``."""
    if not isinstance(theta, ThetaVector):
        theta = model.param_template.with_values(theta)
    x = as_series(data)
    if x.shape[1] <= sum(model.trim) + 2:
        raise TooShort(f"{model.name} needs more than {sum(model.trim) + 2} observations")
    u, _ = model.evaluate(theta.values, x)
    return u
