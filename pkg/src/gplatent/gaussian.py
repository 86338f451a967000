"""Multivariate-normal substrate: densities, sampling, conditioning.

Everything downstream (likelihood evaluation, posterior curves, Gibbs
sampling) funnels through the lower-triangular Cholesky factorization kept
on each GramMatrix, so there is a single numerical path to validate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.special import ndtr, ndtri

from .errors import GPLatentError
from .kernels import GramMatrix, KernelSpec, gram, kernel_eval, kernel_matrix
from .meanbasis import MeanSpec, mean_eval

_LOG_2PI = float(np.log(2.0 * np.pi))
_TAIL_CUTOFF = 4.0  # standardized bound beyond which inverse-CDF gives way to rejection


@dataclass(frozen=True)
class GaussianSurrogate:
    """Finite-dimensional Gaussian law on an individual's time grid."""

    mean: np.ndarray
    cov: GramMatrix

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        object.__setattr__(self, "mean", mean)
        if mean.shape != (self.cov.size,):
            raise ValueError(f"mean has shape {mean.shape}, cov is {self.cov.size}x{self.cov.size}")


def surrogate_for(mean_spec: MeanSpec, kernel_spec: KernelSpec, times) -> GaussianSurrogate:
    """Gaussian law of the latent process at ``times`` under mean/kernel specs."""
    times = np.asarray(times, dtype=float)
    return GaussianSurrogate(mean=mean_eval(mean_spec, times), cov=gram(kernel_spec, times))


def mvn_logpdf(x, surrogate: GaussianSurrogate) -> float:
    """Exact Gaussian log-density via the stored Cholesky factor."""
    x = np.asarray(x, dtype=float)
    if x.shape != surrogate.mean.shape:
        raise ValueError(f"x has shape {x.shape}, expected {surrogate.mean.shape}")
    L = surrogate.cov.chol
    z = sla.solve_triangular(L, x - surrogate.mean, lower=True, check_finite=False)
    return -0.5 * (x.size * _LOG_2PI + surrogate.cov.logdet() + float(z @ z))


def mvn_sample(surrogate: GaussianSurrogate, rng: np.random.Generator) -> np.ndarray:
    """One draw with the surrogate's exact mean and covariance."""
    z = rng.standard_normal(surrogate.mean.size)
    return surrogate.mean + surrogate.cov.chol @ z


@dataclass(frozen=True)
class ConditionalGaussian:
    """Law of theta(t*) given latent values at S conditioning times.

    The conditional variance does not depend on the conditioning values, so
    the weights are reusable across Monte Carlo draws.
    """

    mean_star: float
    mean_obs: np.ndarray
    weights: np.ndarray
    sigma2: float

    def mu_given(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        return self.mean_star + float(self.weights @ (theta - self.mean_obs))

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))


def _clamp_variance(var: np.ndarray, scale: float) -> np.ndarray:
    """Round-off can push conditional variances slightly negative; clamp the
    round-off band to zero and treat anything more negative as a bug."""
    tol = 1e-10 * max(1.0, scale)
    var = np.asarray(var, dtype=float)
    if np.any(var < -tol):
        raise GPLatentError(f"conditional variance {var.min():.3e} below round-off tolerance")
    return np.maximum(var, 0.0)


def conditional_grid(
    grid, times, mean_spec: MeanSpec, kernel_spec: KernelSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Conditioning weights for every grid point at once.

    Returns (prior mean on grid, prior mean at times, weight matrix of shape
    (grid, times), conditional variances).
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    times = np.asarray(times, dtype=float)
    g = gram(kernel_spec, times)
    k_cross = kernel_eval(kernel_spec, grid[:, None], times[None, :])
    k_cross = np.atleast_2d(k_cross)
    weights = g.solve(k_cross.T).T
    k_diag = np.array([kernel_eval(kernel_spec, t, t) for t in grid])
    sigma2 = _clamp_variance(k_diag - np.sum(weights * k_cross, axis=1), float(np.max(k_diag)))
    return mean_eval(mean_spec, grid), mean_eval(mean_spec, times), weights, sigma2


def conditional_at(
    t_star: float, times, mean_spec: MeanSpec, kernel_spec: KernelSpec
) -> ConditionalGaussian:
    """Conditional law of theta(t_star) given theta at ``times``."""
    m_grid, m_obs, weights, sigma2 = conditional_grid([t_star], times, mean_spec, kernel_spec)
    return ConditionalGaussian(
        mean_star=float(m_grid[0]),
        mean_obs=np.asarray(m_obs, dtype=float),
        weights=weights[0],
        sigma2=float(sigma2[0]),
    )


def condition_on_noisy_obs(
    mean_vec: np.ndarray,
    cov: np.ndarray,
    obs_idx: np.ndarray,
    values: np.ndarray,
    noise_vars: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior of a Gaussian vector given noisy observations of a subset.

    Observes values[k] = theta[obs_idx[k]] + noise, noise ~ N(0, noise_vars[k]).
    Returns the posterior mean (full length) and covariance.  Written in the
    "regression" form that never inverts the prior covariance, so it stays
    valid for singular (low-rank) priors.
    """
    mean_vec = np.asarray(mean_vec, dtype=float)
    if len(obs_idx) == 0:
        return mean_vec.copy(), np.array(cov, dtype=float, copy=True)
    k_oo = cov[np.ix_(obs_idx, obs_idx)] + np.diag(noise_vars)
    k_of = cov[obs_idx, :]
    c, low = sla.cho_factor(k_oo, lower=True, check_finite=False)
    solved = sla.cho_solve((c, low), k_of, check_finite=False)
    mu_hat = mean_vec + solved.T @ (values - mean_vec[obs_idx])
    v = cov - k_of.T @ solved
    return mu_hat, 0.5 * (v + v.T)


def truncnorm_mean(mu, lo, hi):
    """Analytic mean of N(mu, 1) truncated to [lo, hi); broadcasts."""
    mu = np.asarray(mu, dtype=float)
    a = np.asarray(lo, dtype=float) - mu
    b = np.asarray(hi, dtype=float) - mu
    phi_a = np.where(np.isfinite(a), np.exp(-0.5 * np.square(np.where(np.isfinite(a), a, 0.0))), 0.0)
    phi_b = np.where(np.isfinite(b), np.exp(-0.5 * np.square(np.where(np.isfinite(b), b, 0.0))), 0.0)
    phi_a /= np.sqrt(2.0 * np.pi)
    phi_b /= np.sqrt(2.0 * np.pi)
    # mass computed on the side with less cancellation
    flip = (a + b) > 0
    mass = np.where(flip, ndtr(-np.where(flip, a, b)) - ndtr(-np.where(flip, b, a)), ndtr(b) - ndtr(a))
    mass = np.maximum(mass, np.finfo(float).tiny)
    return mu + (phi_a - phi_b) / mass


def truncnorm_sample(mu, interval, rng: np.random.Generator, size=None):
    """Draw from N(mu, 1) truncated to interval = (lo, hi).

    Unit variance is implied by the probit measurement model.  Inverse-CDF
    in the body; an exponential-proposal rejection sampler takes over when
    the whole interval sits beyond ``4`` standardized units, which keeps far
    tails (8+ SDs) exact.  ``mu``, ``lo``, ``hi`` broadcast; ``size``
    optionally expands scalars.
    """
    lo, hi = interval
    mu = np.asarray(mu, dtype=float)
    a = np.asarray(lo, dtype=float) - mu
    b = np.asarray(hi, dtype=float) - mu
    shape = np.broadcast_shapes(a.shape, b.shape)
    if size is not None:
        shape = np.broadcast_shapes(shape, tuple(np.atleast_1d(size)))
    a = np.broadcast_to(a, shape).ravel()
    b = np.broadcast_to(b, shape).ravel()
    if np.any(a >= b):
        raise ValueError("empty truncation interval")

    out = np.empty(a.size)
    upper_tail = a >= _TAIL_CUTOFF
    lower_tail = b <= -_TAIL_CUTOFF
    body = ~(upper_tail | lower_tail)

    if np.any(body):
        pa = ndtr(a[body])
        pb = ndtr(b[body])
        u = pa + (pb - pa) * rng.uniform(size=int(body.sum()))
        out[body] = ndtri(u)
    if np.any(upper_tail):
        out[upper_tail] = _sample_upper_tail(a[upper_tail], b[upper_tail], rng)
    if np.any(lower_tail):
        out[lower_tail] = -_sample_upper_tail(-b[lower_tail], -a[lower_tail], rng)

    result = out.reshape(shape) + np.broadcast_to(mu, shape)
    return float(result) if result.ndim == 0 else result


def _sample_upper_tail(a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Exact rejection sampler for a standard normal restricted to [a, b], a >= 4.

    Proposes from a (truncated) exponential with the classic rate choice
    lam = (a + sqrt(a^2 + 4)) / 2 and accepts with exp(-(x - lam)^2 / 2).
    """
    lam = 0.5 * (a + np.sqrt(a * a + 4.0))
    width_factor = -np.expm1(-lam * (b - a))  # 1 - exp(-lam (b - a)), = 1 for b = inf
    out = np.empty(a.size)
    pending = np.arange(a.size)
    for _ in range(10_000):
        u1 = rng.uniform(size=pending.size)
        u2 = rng.uniform(size=pending.size)
        lam_p = lam[pending]
        x = a[pending] - np.log1p(-u1 * width_factor[pending]) / lam_p
        accept = u2 <= np.exp(-0.5 * (x - lam_p) ** 2)
        out[pending[accept]] = x[accept]
        pending = pending[~accept]
        if pending.size == 0:
            return out
    raise GPLatentError("truncated-normal tail sampler failed to accept")  # pragma: no cover
