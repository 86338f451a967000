"""Measurement models: linear factor (continuous) and probit (ordinal) items.

Items are conditionally independent given the latent trait, so a response
vector's log-density is the sum of per-item terms; missing entries (NaN)
contribute nothing.

The probit item uses the printed convention

    P(Y = l | theta) = Phi(b_{l+1} + a theta) - Phi(b_l + a theta),

equivalently the latent response Y* = -a theta + eps with eps ~ N(0, 1) and
Y = l iff b_l <= Y* < b_{l+1}.  Under this convention a positive loading
means higher theta shifts mass toward *lower* observed levels (the opposite
of the usual IRT orientation); the mass function and the latent-response
sampler agree with each other by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from .errors import DataError

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class LinearFactorItem:
    """Y | theta ~ N(a * theta + b, sigma2)."""

    a: float
    b: float
    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0.0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")


@dataclass(frozen=True)
class ProbitItem:
    """Ordinal item with levels 0..n and strictly increasing thresholds b_1..b_n."""

    a: float
    thresholds: tuple[float, ...]

    def __post_init__(self):
        thr = tuple(float(t) for t in self.thresholds)
        object.__setattr__(self, "thresholds", thr)
        if len(thr) < 1:
            raise ValueError("probit item needs at least one threshold")
        if any(t2 <= t1 for t1, t2 in zip(thr, thr[1:])):
            raise ValueError(f"thresholds must be strictly increasing, got {thr}")

    @property
    def n_levels(self) -> int:
        return len(self.thresholds) + 1


ItemSpec = LinearFactorItem | ProbitItem


@dataclass(frozen=True)
class MeasurementSpec:
    """Ordered item models, matching the dataset's indicator order."""

    items: tuple[ItemSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if len(self.items) < 1:
            raise ValueError("measurement model needs at least one item")

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def all_linear(self) -> bool:
        return all(isinstance(it, LinearFactorItem) for it in self.items)

    @property
    def ordinal_indices(self) -> tuple[int, ...]:
        return tuple(j for j, it in enumerate(self.items) if isinstance(it, ProbitItem))


def latent_response_interval(item: ProbitItem, level: int) -> tuple[float, float]:
    """Truncation interval [lo, hi) of the latent response for an observed level."""
    level = _check_level(item, level)
    thr = item.thresholds
    lo = thr[level - 1] if level >= 1 else -math.inf
    hi = thr[level] if level < len(thr) else math.inf
    return lo, hi


def _check_level(item: ProbitItem, level) -> int:
    lvl = float(level)
    if not lvl.is_integer() or not 0 <= lvl <= len(item.thresholds):
        raise DataError(f"ordinal level {level!r} outside 0..{len(item.thresholds)}")
    return int(lvl)


def log_interval_prob(lower, upper):
    """log(Phi(upper) - Phi(lower)), robust in both tails; broadcasts.

    Works in whichever tail has less cancellation by flipping the interval
    when it sits on the positive side.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    flip = (lower + upper) > 0
    lo = np.where(flip, -upper, lower)
    hi = np.where(flip, -lower, upper)
    log_hi = log_ndtr(hi)
    log_lo = log_ndtr(lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = log_hi + np.log1p(-np.exp(np.minimum(log_lo - log_hi, 0.0)))
    return out


def probit_level_logprob(item: ProbitItem, levels, theta):
    """Vectorized log P(Y = level | theta) under the probit item."""
    levels = np.asarray(levels)
    theta = np.asarray(theta, dtype=float)
    thr = np.concatenate([[-np.inf], item.thresholds, [np.inf]])
    idx = levels.astype(int)
    shift = item.a * theta
    return log_interval_prob(thr[idx] + shift, thr[idx + 1] + shift)


def item_logdensity(item: ItemSpec, y, theta: float) -> float:
    """Log conditional density/mass of one response; NaN (missing) gives 0."""
    yf = float(y)
    if math.isnan(yf):
        return 0.0
    if isinstance(item, LinearFactorItem):
        resid = yf - (item.a * theta + item.b)
        return -0.5 * (_LOG_2PI + math.log(item.sigma2) + resid * resid / item.sigma2)
    level = _check_level(item, yf)
    return float(probit_level_logprob(item, level, theta))


def response_logdensity(spec: MeasurementSpec, y_vec, theta: float) -> float:
    """Joint log-density of one time point's response vector (local independence)."""
    y_vec = np.asarray(y_vec, dtype=float)
    if y_vec.shape != (spec.n_items,):
        raise DataError(f"expected {spec.n_items} responses, got shape {y_vec.shape}")
    return sum(item_logdensity(it, y, theta) for it, y in zip(spec.items, y_vec))


def item_sample(item: ItemSpec, theta, rng: np.random.Generator):
    """Sample a response given theta; broadcasts over theta arrays.

    Ordinal items draw through the latent response Y* = -a theta + eps,
    which is distributionally identical to the interval-probability mass
    function.
    """
    theta = np.asarray(theta, dtype=float)
    if isinstance(item, LinearFactorItem):
        draw = item.a * theta + item.b + math.sqrt(item.sigma2) * rng.standard_normal(theta.shape)
    else:
        y_star = -item.a * theta + rng.standard_normal(theta.shape)
        draw = np.searchsorted(item.thresholds, y_star, side="right").astype(float)
    return float(draw) if draw.ndim == 0 else draw
