"""Mean functions m(t) built from pre-specified basis function sets.

The same basis sets double as components of the low-rank kernel model, so
evaluation lives here and is shared.  Basis values are always returned in
user time units; the optimizer-side rescaling (for conditioning of
polynomial terms over long horizons) is exposed via ``coefficient_scales``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

_DOMAIN_TOL = 1e-9


@dataclass(frozen=True)
class ConstantBasis:
    """Empty basis: the mean is a single intercept, constant in t."""

    horizon: float

    @property
    def dimension(self) -> int:
        return 0

    def coefficient_scales(self) -> np.ndarray:
        return np.empty(0)

    def values(self, t):
        t = _check_domain(np.asarray(t, dtype=float), self.horizon)
        return np.zeros(t.shape + (0,))


@dataclass(frozen=True)
class PolynomialBasis:
    """b_d(t) = t^d for d = 1..degree."""

    degree: int
    horizon: float

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("polynomial degree must be >= 1")

    @property
    def dimension(self) -> int:
        return self.degree

    def coefficient_scales(self) -> np.ndarray:
        # coefficient of t^d in user units corresponds to (t/T)^d times T^d
        T = max(self.horizon, 1e-12)
        return T ** np.arange(1, self.degree + 1, dtype=float)

    def values(self, t):
        t = _check_domain(np.asarray(t, dtype=float), self.horizon)
        return t[..., None] ** np.arange(1, self.degree + 1)


@dataclass(frozen=True)
class CubicSplineBasis:
    """Truncated power cubic spline: t, t^2, t^3, (t - knot)^3_+ per knot."""

    knots: tuple[float, ...]
    horizon: float

    def __post_init__(self):
        knots = tuple(float(k) for k in self.knots)
        object.__setattr__(self, "knots", knots)
        if len(knots) < 1:
            raise ValueError("cubic spline basis needs at least one knot")
        if any(k2 <= k1 for k1, k2 in zip(knots, knots[1:])):
            raise ValueError("knots must be strictly increasing")
        if knots[0] <= 0.0 or knots[-1] >= self.horizon:
            raise ValueError("knots must lie strictly inside (0, horizon)")

    @property
    def dimension(self) -> int:
        return 3 + len(self.knots)

    def coefficient_scales(self) -> np.ndarray:
        T = max(self.horizon, 1e-12)
        return np.array([T, T**2, T**3] + [T**3] * len(self.knots))

    def values(self, t):
        t = _check_domain(np.asarray(t, dtype=float), self.horizon)
        polys = t[..., None] ** np.array([1, 2, 3])
        trunc = np.clip(t[..., None] - np.asarray(self.knots), 0.0, None) ** 3
        return np.concatenate([polys, trunc], axis=-1)


BasisSet = ConstantBasis | PolynomialBasis | CubicSplineBasis


def _check_domain(t: np.ndarray, horizon: float) -> np.ndarray:
    tol = _DOMAIN_TOL * max(1.0, horizon)
    if np.any(t < -tol) or np.any(t > horizon + tol):
        raise DomainError(f"time outside [0, {horizon}]: {t[(t < -tol) | (t > horizon + tol)][:3]}")
    return t


def basis_eval(basis: BasisSet, t) -> np.ndarray:
    """Evaluate the basis functions (without intercept) at time(s) t."""
    return basis.values(t)


def design_matrix(basis: BasisSet, times) -> np.ndarray:
    """(S, D+1) matrix with a leading intercept column."""
    vals = basis.values(np.asarray(times, dtype=float))
    ones = np.ones(vals.shape[:-1] + (1,))
    return np.concatenate([ones, vals], axis=-1)


@dataclass(frozen=True)
class MeanSpec:
    """Mean function alpha_0 + sum_d alpha_d b_d(t)."""

    basis: BasisSet
    coefficients: tuple[float, ...] = field(default=(0.0,))

    def __post_init__(self):
        coeffs = tuple(float(a) for a in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if len(coeffs) != self.basis.dimension + 1:
            raise ValueError(
                f"mean needs {self.basis.dimension + 1} coefficients "
                f"(intercept + basis), got {len(coeffs)}"
            )

    @property
    def horizon(self) -> float:
        return self.basis.horizon

    def __call__(self, t):
        return mean_eval(self, t)


def mean_eval(spec: MeanSpec, t):
    """Evaluate the mean function at time(s) t."""
    vals = design_matrix(spec.basis, t) @ np.asarray(spec.coefficients)
    return float(vals) if np.ndim(t) == 0 else vals


def default_knots(times, n_knots: int, horizon: float) -> tuple[float, ...]:
    """Equally spaced quantiles of the pooled observation times."""
    times = np.sort(np.asarray(times, dtype=float))
    qs = np.linspace(0, 1, n_knots + 2)[1:-1]
    knots = np.quantile(times, qs)
    # keep knots strictly interior and strictly increasing
    eps = 1e-6 * max(1.0, horizon)
    knots = np.clip(knots, eps, horizon - eps)
    for i in range(1, len(knots)):
        if knots[i] <= knots[i - 1]:
            knots[i] = knots[i - 1] + eps
    return tuple(float(k) for k in knots)
