"""Datasets of irregularly sampled multivariate longitudinal observations.

Responses are stored as float arrays with NaN marking missing entries;
ordinal levels are small non-negative integers stored exactly.  Datasets
are immutable after construction and safe to share across workers.

CSV layouts (UTF-8, header row required):

* wide: ``id,time,<y1..yJ>[,group]`` - one row per observation time.
* long: ``id,time,item,value[,group]`` - one row per (time, item) pair,
  for multi-item ordinal files; absent pairs become missing.

Time is kept in whatever unit the input uses (typically study days); no
internal rescaling is applied, so kernel length-scales stay interpretable.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .util import format_float

logger = logging.getLogger(__name__)

TIE_PERTURB = 1e-9  # duplicate timestamps are kept, the later shifted by this


@dataclass(frozen=True)
class Continuous:
    """Continuous indicator."""


@dataclass(frozen=True)
class Ordinal:
    """Ordinal indicator with levels 0..n_levels-1."""

    n_levels: int

    def __post_init__(self):
        if self.n_levels < 2:
            raise ValueError("ordinal item needs at least 2 levels")


ItemType = Continuous | Ordinal


@dataclass(frozen=True)
class CovariateProfile:
    group: str | None = None
    extras: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True)
class ObservationRecord:
    """One measurement occasion, as read from a file row."""

    individual_id: str
    time: float
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class IndividualSeries:
    """All measurement occasions of one individual, sorted by time."""

    individual_id: str
    times: np.ndarray
    responses: np.ndarray  # (S, J), NaN = missing
    covariates: CovariateProfile = field(default_factory=CovariateProfile)

    @property
    def n_times(self) -> int:
        return self.times.size

    @property
    def group(self) -> str | None:
        return self.covariates.group

    def __eq__(self, other):
        if not isinstance(other, IndividualSeries):
            return NotImplemented
        return (
            self.individual_id == other.individual_id
            and self.covariates == other.covariates
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.responses, other.responses, equal_nan=True)
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    individuals: tuple[IndividualSeries, ...]
    item_types: tuple[ItemType, ...]
    time_horizon: float

    @property
    def n_individuals(self) -> int:
        return len(self.individuals)

    @property
    def n_items(self) -> int:
        return len(self.item_types)

    @property
    def group_labels(self) -> tuple[str, ...]:
        labels = {s.group for s in self.individuals if s.group is not None}
        return tuple(sorted(labels))

    @property
    def has_groups(self) -> bool:
        return any(s.group is not None for s in self.individuals)

    @property
    def n_observations(self) -> int:
        return sum(s.n_times for s in self.individuals)

    def pooled_times(self) -> np.ndarray:
        return np.concatenate([s.times for s in self.individuals])

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.item_types == other.item_types
            and self.time_horizon == other.time_horizon
            and self.individuals == other.individuals
        )


def normalize_times(times, responses) -> tuple[np.ndarray, np.ndarray, int]:
    """Sort one series by time and nudge duplicate timestamps apart.

    Duplicates are kept (EMA exports often contain same-minute records); the
    later record is shifted by +1e-9 time units so Gram matrices stay
    well-conditioned.  Returns (times, responses, number of nudged rows).
    """
    times = np.asarray(times, dtype=float)
    responses = np.asarray(responses, dtype=float)
    order = np.argsort(times, kind="stable")
    times = times[order].copy()
    responses = responses[order].copy()
    n_perturbed = 0
    for s in range(1, times.size):
        if times[s] <= times[s - 1]:
            times[s] = times[s - 1] + TIE_PERTURB
            n_perturbed += 1
    return times, responses, n_perturbed


def build_dataset(
    series_list,
    item_types,
    time_horizon: float | None = None,
) -> Dataset:
    """Validate and assemble a Dataset from per-individual series."""
    series_list = tuple(series_list)
    item_types = tuple(item_types)
    if len(series_list) < 1:
        raise DataError("dataset needs at least one individual")
    if len(item_types) < 1:
        raise DataError("dataset needs at least one indicator")
    max_time = 0.0
    for s in series_list:
        if s.n_times < 1:
            raise DataError(f"individual {s.individual_id!r} has no observations")
        if s.responses.shape != (s.n_times, len(item_types)):
            raise DataError(
                f"individual {s.individual_id!r}: responses shape {s.responses.shape} "
                f"does not match {s.n_times} times x {len(item_types)} items"
            )
        if np.any(np.diff(s.times) <= 0):
            raise DataError(f"individual {s.individual_id!r}: times not strictly increasing")
        if s.times[0] < 0:
            raise DataError(f"individual {s.individual_id!r}: negative time {s.times[0]}")
        max_time = max(max_time, float(s.times[-1]))
        for j, it in enumerate(item_types):
            if isinstance(it, Ordinal):
                col = s.responses[:, j]
                obs = col[~np.isnan(col)]
                bad = obs[(obs != np.floor(obs)) | (obs < 0) | (obs > it.n_levels - 1)]
                if bad.size:
                    raise DataError(
                        f"individual {s.individual_id!r}, item {j + 1}: ordinal level "
                        f"{bad[0]} outside 0..{it.n_levels - 1}"
                    )
    horizon = float(time_horizon) if time_horizon is not None else max_time
    if max_time > horizon:
        raise DataError(f"observation time {max_time} exceeds horizon {horizon}")
    return Dataset(individuals=series_list, item_types=item_types, time_horizon=horizon)


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for CSV ingestion.

    ``values`` names the response columns (wide layout); for the long layout
    give ``item``/``value`` column names and the indicator order in
    ``items``.  ``group_levels``, when provided, restricts the allowed group
    labels.
    """

    id: str = "id"
    time: str = "time"
    values: tuple[str, ...] = ("y1",)
    layout: str = "wide"
    item: str = "item"
    value: str = "value"
    items: tuple[str, ...] = ()
    group: str | None = None
    group_levels: tuple[str, ...] | None = None
    item_types: tuple[ItemType, ...] | None = None
    time_horizon: float | None = None

    def resolved_item_types(self) -> tuple[ItemType, ...]:
        if self.item_types is not None:
            return tuple(self.item_types)
        n = len(self.items) if self.layout == "long" else len(self.values)
        return tuple(Continuous() for _ in range(n))


def _parse_float(text: str, row_num: int, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"row {row_num}: non-numeric {what} {text!r}") from None


def ingest_csv(path, schema: CsvSchema) -> Dataset:
    """Read and validate a dataset; rows may arrive unsorted.

    Errors (malformed numbers, unknown group labels, ordinal levels out of
    range, empty file) are reported with the offending file row number.
    """
    item_types = schema.resolved_item_types()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        col = {name: i for i, name in enumerate(header)}
        needed = [schema.id, schema.time]
        if schema.layout == "wide":
            needed += list(schema.values)
        elif schema.layout == "long":
            needed += [schema.item, schema.value]
        else:
            raise DataError(f"unknown layout {schema.layout!r}")
        if schema.group is not None:
            needed.append(schema.group)
        for name in needed:
            if name not in col:
                raise DataError(f"{path}: missing column {name!r} (header: {header})")

        rows = []  # (id, time, j, value, group, row_num)
        for row_num, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            ind = row[col[schema.id]].strip()
            t = _parse_float(row[col[schema.time]].strip(), row_num, "time")
            if t < 0:
                raise DataError(f"row {row_num}: negative time {t}")
            group = None
            if schema.group is not None:
                group = row[col[schema.group]].strip()
                if schema.group_levels is not None and group not in schema.group_levels:
                    raise DataError(
                        f"row {row_num}: unknown group label {group!r} "
                        f"(declared: {list(schema.group_levels)})"
                    )
            if schema.layout == "wide":
                for j, vname in enumerate(schema.values):
                    text = row[col[vname]].strip()
                    v = math.nan if text == "" else _parse_float(text, row_num, "response")
                    rows.append((ind, t, j, v, group, row_num))
            else:
                item_name = row[col[schema.item]].strip()
                if item_name not in schema.items:
                    raise DataError(f"row {row_num}: unknown item {item_name!r}")
                j = schema.items.index(item_name)
                text = row[col[schema.value]].strip()
                v = math.nan if text == "" else _parse_float(text, row_num, "response")
                rows.append((ind, t, j, v, group, row_num))

    if not rows:
        raise DataError(f"{path}: no data rows")

    # validate ordinal levels with row numbers before assembling arrays
    for ind, t, j, v, group, row_num in rows:
        it = item_types[j]
        if isinstance(it, Ordinal) and not math.isnan(v):
            if v != math.floor(v) or not 0 <= v <= it.n_levels - 1:
                raise DataError(f"row {row_num}: ordinal level {v} outside 0..{it.n_levels - 1}")

    by_individual: dict[str, dict] = {}
    id_order: list[str] = []
    for ind, t, j, v, group, row_num in rows:
        if ind not in by_individual:
            by_individual[ind] = {"points": {}, "group": group}
            id_order.append(ind)
        entry = by_individual[ind]
        if entry["group"] != group:
            raise DataError(f"row {row_num}: individual {ind!r} has conflicting group labels")
        # wide rows always open a new time point (duplicate times are kept and
        # nudged apart); long rows merge items measured at the same time
        point = entry["points"].setdefault((t, row_num) if schema.layout == "wide" else t, {})
        if schema.layout == "long" and j in point:
            raise DataError(f"row {row_num}: duplicate (id, time, item) entry for {ind!r}")
        point[j] = v

    n_perturbed_total = 0
    series = []
    for ind in id_order:
        entry = by_individual[ind]
        keys = list(entry["points"])
        times = np.array([k[0] if isinstance(k, tuple) else k for k in keys])
        resp = np.full((len(keys), len(item_types)), math.nan)
        for s, k in enumerate(keys):
            for j, v in entry["points"][k].items():
                resp[s, j] = v
        times, resp, n_pert = normalize_times(times, resp)
        n_perturbed_total += n_pert
        series.append(
            IndividualSeries(
                individual_id=ind,
                times=times,
                responses=resp,
                covariates=CovariateProfile(group=entry["group"]),
            )
        )
    if n_perturbed_total:
        logger.warning(
            "perturbed %d duplicate timestamps by +%g to keep times strictly increasing",
            n_perturbed_total,
            TIE_PERTURB,
        )
    return build_dataset(series, item_types, schema.time_horizon)


def write_csv(dataset: Dataset, path) -> None:
    """Write a dataset in the wide layout; re-ingesting reproduces it exactly."""
    # revalidate so invariant violations fail before any file is touched
    build_dataset(dataset.individuals, dataset.item_types, dataset.time_horizon)
    with_group = dataset.has_groups
    if with_group and any(s.group is None for s in dataset.individuals):
        raise DataError("either all or no individuals must carry a group label")
    lines = []
    header = ["id", "time"] + [f"y{j + 1}" for j in range(dataset.n_items)]
    if with_group:
        header.append("group")
    lines.append(",".join(header))
    for s in dataset.individuals:
        for i, t in enumerate(s.times):
            cells = [s.individual_id, format_float(t)]
            for j, it in enumerate(dataset.item_types):
                v = s.responses[i, j]
                if math.isnan(v):
                    cells.append("")
                elif isinstance(it, Ordinal):
                    cells.append(str(int(v)))
                else:
                    cells.append(format_float(v))
            if with_group:
                cells.append(s.group)
            lines.append(",".join(cells))
    from .util import atomic_write_text

    atomic_write_text(path, "\n".join(lines) + "\n")


def default_schema_for(dataset: Dataset) -> CsvSchema:
    """Schema that reads back the files produced by write_csv."""
    return CsvSchema(
        id="id",
        time="time",
        values=tuple(f"y{j + 1}" for j in range(dataset.n_items)),
        group="group" if dataset.has_groups else None,
        item_types=dataset.item_types,
        time_horizon=dataset.time_horizon,
    )
