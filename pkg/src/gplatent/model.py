"""Full model specification: mean + kernel (possibly per group) + measurement.

Two identifiability constraints are always active: one fixes the latent
scale (kernel scale c = 1, or first loading a_1 = 1) and one pins the
location (mean intercept alpha_0 = 0, or the first item's location --
b_1 = 0 for a linear item, first threshold = 0 for a probit item).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping

from .errors import ConfigError
from .kernels import (
    BasisLowRank,
    Exponential,
    KernelSpec,
    Periodic,
    SquaredExponential,
)
from .meanbasis import (
    BasisSet,
    ConstantBasis,
    CubicSplineBasis,
    MeanSpec,
    PolynomialBasis,
)
from .measurement import LinearFactorItem, MeasurementSpec, ProbitItem

SCALE_CONSTRAINTS = ("kernel_scale", "first_loading")
LOCATION_CONSTRAINTS = ("intercept", "first_item")


@dataclass(frozen=True)
class ConstraintSet:
    """Identifiability constraints; exactly one of each kind is active."""

    scale: str = "first_loading"
    location: str = "first_item"

    def __post_init__(self):
        if self.scale not in SCALE_CONSTRAINTS:
            raise ConfigError(f"unknown scale constraint {self.scale!r}; use one of {SCALE_CONSTRAINTS}")
        if self.location not in LOCATION_CONSTRAINTS:
            raise ConfigError(
                f"unknown location constraint {self.location!r}; use one of {LOCATION_CONSTRAINTS}"
            )


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of the latent-curve model (the estimation target).

    ``mean`` and ``kernel`` are either shared specs or per-group mappings;
    measurement parameters are always shared across groups.
    """

    mean: MeanSpec | Mapping[str, MeanSpec]
    kernel: KernelSpec | Mapping[str, KernelSpec]
    measurement: MeasurementSpec
    constraints: ConstraintSet = field(default_factory=ConstraintSet)

    def __post_init__(self):
        if isinstance(self.mean, Mapping):
            object.__setattr__(self, "mean", MappingProxyType(dict(self.mean)))
        if isinstance(self.kernel, Mapping):
            object.__setattr__(self, "kernel", MappingProxyType(dict(self.kernel)))
        if self.grouped:
            m_labels = set(self.mean.keys()) if isinstance(self.mean, Mapping) else None
            k_labels = set(self.kernel.keys()) if isinstance(self.kernel, Mapping) else None
            if m_labels is not None and k_labels is not None and m_labels != k_labels:
                raise ConfigError(
                    f"group labels of mean ({sorted(m_labels)}) and kernel ({sorted(k_labels)}) differ"
                )

    @property
    def grouped(self) -> bool:
        return isinstance(self.mean, Mapping) or isinstance(self.kernel, Mapping)

    @property
    def group_labels(self) -> tuple[str, ...] | None:
        if isinstance(self.mean, Mapping):
            return tuple(sorted(self.mean.keys()))
        if isinstance(self.kernel, Mapping):
            return tuple(sorted(self.kernel.keys()))
        return None

    def mean_for(self, group: str | None) -> MeanSpec:
        if isinstance(self.mean, Mapping):
            if group not in self.mean:
                raise ConfigError(f"no mean specified for group {group!r}")
            return self.mean[group]
        return self.mean

    def kernel_for(self, group: str | None) -> KernelSpec:
        if isinstance(self.kernel, Mapping):
            if group not in self.kernel:
                raise ConfigError(f"no kernel specified for group {group!r}")
            return self.kernel[group]
        return self.kernel

    def kernels(self) -> list[tuple[str | None, KernelSpec]]:
        if isinstance(self.kernel, Mapping):
            return [(g, self.kernel[g]) for g in sorted(self.kernel.keys())]
        return [(None, self.kernel)]

    def replace(self, **kwargs) -> "ModelSpec":
        return replace(self, **kwargs)


def validate_constraint_values(model: ModelSpec) -> None:
    """Check that the constrained entries sit exactly at their fixed values."""
    cons = model.constraints
    if cons.scale == "kernel_scale":
        for label, k in model.kernels():
            if isinstance(k, BasisLowRank):
                raise ConfigError("kernel_scale constraint is undefined for the basis low-rank kernel")
            if k.c != 1.0:
                raise ConfigError(f"kernel_scale constraint requires c = 1 (group {label!r} has c={k.c})")
    else:
        if model.measurement.items[0].a != 1.0:
            raise ConfigError("first_loading constraint requires a_1 = 1")
    if cons.location == "intercept":
        means = model.mean.values() if isinstance(model.mean, Mapping) else [model.mean]
        for m in means:
            if m.coefficients[0] != 0.0:
                raise ConfigError("intercept constraint requires alpha_0 = 0")
    else:
        first = model.measurement.items[0]
        if isinstance(first, LinearFactorItem):
            if first.b != 0.0:
                raise ConfigError("first_item constraint requires b_1 = 0")
        else:
            if first.thresholds[0] != 0.0:
                raise ConfigError("first_item constraint requires the first threshold of item 1 to be 0")


# --- JSON-friendly (de)serialization, used by reports and sidecar files ---


def basis_to_dict(basis: BasisSet) -> dict:
    if isinstance(basis, ConstantBasis):
        return {"type": "constant", "horizon": basis.horizon}
    if isinstance(basis, PolynomialBasis):
        return {"type": "polynomial", "degree": basis.degree, "horizon": basis.horizon}
    return {"type": "cubic_spline", "knots": list(basis.knots), "horizon": basis.horizon}


def basis_from_dict(d: dict) -> BasisSet:
    kind = d["type"]
    if kind == "constant":
        return ConstantBasis(horizon=d["horizon"])
    if kind == "polynomial":
        return PolynomialBasis(degree=d["degree"], horizon=d["horizon"])
    if kind == "cubic_spline":
        return CubicSplineBasis(knots=tuple(d["knots"]), horizon=d["horizon"])
    raise ConfigError(f"unknown basis type {kind!r}")


def mean_to_dict(spec: MeanSpec) -> dict:
    d = basis_to_dict(spec.basis)
    d["coefficients"] = list(spec.coefficients)
    return d


def mean_from_dict(d: dict) -> MeanSpec:
    basis = basis_from_dict({k: v for k, v in d.items() if k != "coefficients"})
    return MeanSpec(basis=basis, coefficients=tuple(d["coefficients"]))


def kernel_to_dict(spec: KernelSpec) -> dict:
    if isinstance(spec, SquaredExponential):
        return {"type": "se", "c": spec.c, "kappa": spec.kappa}
    if isinstance(spec, Exponential):
        return {"type": "exponential", "c": spec.c, "kappa": spec.kappa}
    if isinstance(spec, Periodic):
        return {"type": "periodic", "c": spec.c, "kappa": spec.kappa, "p": spec.p}
    return {"type": "basis_lowrank", "weights": list(spec.weights), "basis": basis_to_dict(spec.basis)}


def kernel_from_dict(d: dict) -> KernelSpec:
    kind = d["type"]
    if kind == "se":
        return SquaredExponential(c=d["c"], kappa=d["kappa"])
    if kind == "exponential":
        return Exponential(c=d["c"], kappa=d["kappa"])
    if kind == "periodic":
        return Periodic(c=d["c"], kappa=d["kappa"], p=d["p"])
    if kind == "basis_lowrank":
        return BasisLowRank(weights=tuple(d["weights"]), basis=basis_from_dict(d["basis"]))
    raise ConfigError(f"unknown kernel type {kind!r}")


def item_to_dict(item) -> dict:
    if isinstance(item, LinearFactorItem):
        return {"type": "linear", "a": item.a, "b": item.b, "sigma2": item.sigma2}
    return {"type": "probit", "a": item.a, "thresholds": list(item.thresholds)}


def item_from_dict(d: dict):
    if d["type"] == "linear":
        return LinearFactorItem(a=d["a"], b=d["b"], sigma2=d["sigma2"])
    if d["type"] == "probit":
        return ProbitItem(a=d["a"], thresholds=tuple(d["thresholds"]))
    raise ConfigError(f"unknown item type {d['type']!r}")


def model_to_dict(model: ModelSpec) -> dict:
    out: dict = {}
    if isinstance(model.mean, Mapping):
        out["mean_by_group"] = {g: mean_to_dict(m) for g, m in sorted(model.mean.items())}
    else:
        out["mean"] = mean_to_dict(model.mean)
    if isinstance(model.kernel, Mapping):
        out["kernel_by_group"] = {g: kernel_to_dict(k) for g, k in sorted(model.kernel.items())}
    else:
        out["kernel"] = kernel_to_dict(model.kernel)
    out["items"] = [item_to_dict(it) for it in model.measurement.items]
    out["constraints"] = {"scale": model.constraints.scale, "location": model.constraints.location}
    return out


def model_from_dict(d: dict) -> ModelSpec:
    mean = (
        {g: mean_from_dict(m) for g, m in d["mean_by_group"].items()}
        if "mean_by_group" in d
        else mean_from_dict(d["mean"])
    )
    kernel = (
        {g: kernel_from_dict(k) for g, k in d["kernel_by_group"].items()}
        if "kernel_by_group" in d
        else kernel_from_dict(d["kernel"])
    )
    measurement = MeasurementSpec(items=tuple(item_from_dict(it) for it in d["items"]))
    constraints = ConstraintSet(**d["constraints"])
    return ModelSpec(mean=mean, kernel=kernel, measurement=measurement, constraints=constraints)
