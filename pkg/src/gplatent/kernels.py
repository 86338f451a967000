"""Covariance kernels for the latent Gaussian process.

Three stationary families (squared-exponential, exponential, periodic) plus
a low-rank basis-function kernel.  ``gram`` builds the covariance matrix on
a time grid and guarantees a usable Cholesky factor through a bounded
diagonal-jitter ladder.

Free-parameter layout (used by the optimizer and by ``kernel_gradient``):

* squared-exponential / exponential: ``(log c, log kappa)``
* periodic: ``(log c, log kappa, log p)``
* basis low-rank: ``(w_1, ..., w_H)`` (raw weights; the kernel uses w_h^2)

Note the exponential kernel divides the lag by ``2 * kappa**2`` rather than
the conventional ``kappa``; this matches the parametrization the rest of
the model suite is calibrated against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedKernelError
from .meanbasis import BasisSet, basis_eval

# jitter ladder: relative to the kernel's variance scale
_JITTER_STEPS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0.0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


@dataclass(frozen=True)
class SquaredExponential:
    """K(t,t') = c^2 exp(-(t-t')^2 / (2 kappa^2))."""

    c: float
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "c", _positive("c", self.c))
        object.__setattr__(self, "kappa", _positive("kappa", self.kappa))

    free_names = ("log_c", "log_kappa")

    def eval_lag(self, lag):
        lag = np.asarray(lag, dtype=float)
        return self.c**2 * np.exp(-(lag**2) / (2.0 * self.kappa**2))

    def lag_derivs(self, lag, k):
        return [2.0 * k, k * (np.asarray(lag) ** 2) / self.kappa**2]


@dataclass(frozen=True)
class Exponential:
    """K(t,t') = c^2 exp(-|t-t'| / (2 kappa^2))."""

    c: float
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "c", _positive("c", self.c))
        object.__setattr__(self, "kappa", _positive("kappa", self.kappa))

    free_names = ("log_c", "log_kappa")

    def eval_lag(self, lag):
        lag = np.abs(np.asarray(lag, dtype=float))
        return self.c**2 * np.exp(-lag / (2.0 * self.kappa**2))

    def lag_derivs(self, lag, k):
        return [2.0 * k, k * np.abs(np.asarray(lag)) / self.kappa**2]


@dataclass(frozen=True)
class Periodic:
    """K(t,t') = c^2 exp(-2 sin^2(pi |t-t'| / p) / kappa^2)."""

    c: float
    kappa: float
    p: float

    def __post_init__(self):
        object.__setattr__(self, "c", _positive("c", self.c))
        object.__setattr__(self, "kappa", _positive("kappa", self.kappa))
        object.__setattr__(self, "p", _positive("p", self.p))

    free_names = ("log_c", "log_kappa", "log_p")

    def eval_lag(self, lag):
        lag = np.abs(np.asarray(lag, dtype=float))
        s = np.sin(np.pi * lag / self.p)
        return self.c**2 * np.exp(-2.0 * s**2 / self.kappa**2)

    def lag_derivs(self, lag, k):
        lag = np.abs(np.asarray(lag, dtype=float))
        u = np.pi * lag / self.p
        d_logkappa = k * 4.0 * np.sin(u) ** 2 / self.kappa**2
        d_logp = k * 2.0 * np.pi * lag * np.sin(2.0 * u) / (self.p * self.kappa**2)
        return [2.0 * k, d_logkappa, d_logp]


@dataclass(frozen=True)
class BasisLowRank:
    """K(t,t') = sum_h w_h^2 phi_h(t) phi_h(t') for a pre-specified basis."""

    weights: tuple[float, ...]
    basis: BasisSet

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "weights", weights)
        if len(weights) < 1:
            raise ValueError("basis low-rank kernel needs at least one weight")
        if len(weights) != self.basis.dimension:
            raise ValueError(
                f"expected {self.basis.dimension} weights for this basis, got {len(weights)}"
            )

    @property
    def free_names(self) -> tuple[str, ...]:
        return tuple(f"w{h + 1}" for h in range(len(self.weights)))


KernelSpec = SquaredExponential | Exponential | Periodic | BasisLowRank

STATIONARY_KERNELS = (SquaredExponential, Exponential, Periodic)


def kernel_eval(spec: KernelSpec, t, t2):
    """Covariance K(t, t2); broadcasts over array arguments."""
    if isinstance(spec, BasisLowRank):
        phi1 = basis_eval(spec.basis, t)
        phi2 = basis_eval(spec.basis, t2)
        w2 = np.asarray(spec.weights) ** 2
        out = np.sum(w2 * phi1 * phi2, axis=-1)
    else:
        out = spec.eval_lag(np.asarray(t, dtype=float) - np.asarray(t2, dtype=float))
    return float(out) if out.ndim == 0 else out


def kernel_variance(spec: KernelSpec, t=0.0) -> float:
    """K(t, t): the process variance (constant for stationary kernels)."""
    return float(kernel_eval(spec, t, t))


def kernel_matrix(spec: KernelSpec, times) -> np.ndarray:
    """Raw (un-jittered) covariance matrix on a time grid."""
    times = np.asarray(times, dtype=float)
    if isinstance(spec, BasisLowRank):
        phi = basis_eval(spec.basis, times)
        return (phi * np.asarray(spec.weights) ** 2) @ phi.T
    return spec.eval_lag(times[:, None] - times[None, :])


def kernel_gradient(spec: KernelSpec, t, t2) -> np.ndarray:
    """Partials of K(t, t2) w.r.t. the free-parameter layout (see module doc)."""
    if isinstance(spec, BasisLowRank):
        phi1 = basis_eval(spec.basis, t)
        phi2 = basis_eval(spec.basis, t2)
        return np.moveaxis(2.0 * np.asarray(spec.weights) * phi1 * phi2, -1, 0)
    lag = np.asarray(t, dtype=float) - np.asarray(t2, dtype=float)
    k = spec.eval_lag(lag)
    return np.stack([np.asarray(d, dtype=float) for d in spec.lag_derivs(lag, k)])


def kernel_matrix_derivs(spec: KernelSpec, times, k_matrix: np.ndarray | None = None) -> list[np.ndarray]:
    """Per-free-parameter derivative matrices of the Gram matrix."""
    times = np.asarray(times, dtype=float)
    if isinstance(spec, BasisLowRank):
        phi = basis_eval(spec.basis, times)
        return [2.0 * w * np.outer(phi[:, h], phi[:, h]) for h, w in enumerate(spec.weights)]
    lag = times[:, None] - times[None, :]
    if k_matrix is None:
        k_matrix = spec.eval_lag(lag)
    return [np.asarray(d) for d in spec.lag_derivs(lag, k_matrix)]


@dataclass(frozen=True)
class GramMatrix:
    """Jittered covariance matrix on a grid, with its Cholesky factor."""

    points: np.ndarray
    matrix: np.ndarray
    chol: np.ndarray
    jitter_applied: float

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve matrix @ x = b using the stored factorization."""
        import scipy.linalg as sla

        return sla.cho_solve((self.chol, True), b, check_finite=False)

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))


def chol_with_jitter(matrix: np.ndarray, scale: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Cholesky of a PSD matrix, escalating diagonal jitter until it succeeds.

    Returns (jittered matrix, lower factor, jitter applied).  Raises
    IllConditionedKernelError when the ladder is exhausted.
    """
    n = matrix.shape[0]
    eye = np.eye(n)
    for step in _JITTER_STEPS:
        jitter = step * scale
        try:
            m = matrix + jitter * eye if jitter else matrix
            chol = np.linalg.cholesky(m)
            return m, chol, jitter
        except np.linalg.LinAlgError:
            continue
    raise IllConditionedKernelError(
        f"Gram matrix not factorizable at max jitter {_JITTER_STEPS[-1] * scale:.3e}"
    )


def gram(spec: KernelSpec, times) -> GramMatrix:
    """Gram matrix of the kernel on ``times`` with bounded jitter.

    Raises IllConditionedKernelError naming the closest pair of points when
    even the maximum jitter does not yield a positive-definite factorization.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1:
        raise ValueError("times must be a 1-D array with at least one point")
    if not np.all(np.isfinite(times)):
        raise ValueError("times must be finite")
    matrix = kernel_matrix(spec, times)
    scale = max(float(np.max(np.diag(matrix))), np.finfo(float).tiny)
    try:
        m, chol, jitter = chol_with_jitter(matrix, scale)
    except IllConditionedKernelError:
        i, j = _closest_pair(times)
        raise IllConditionedKernelError(
            f"kernel Gram matrix on {times.size} points is numerically singular "
            f"even at max jitter; closest points are t[{i}]={times[i]!r} and "
            f"t[{j}]={times[j]!r}"
        ) from None
    return GramMatrix(points=times.copy(), matrix=m, chol=chol, jitter_applied=jitter)


def _closest_pair(times: np.ndarray) -> tuple[int, int]:
    order = np.argsort(times)
    gaps = np.diff(times[order])
    if gaps.size == 0:
        return 0, 0
    g = int(np.argmin(gaps))
    return int(order[g]), int(order[g + 1])
