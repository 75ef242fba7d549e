"""Core domain types: attribute schemas, group keys, benchmarks and cohorts.

Proportions are fractions in [0, 1] everywhere inside the package;
percentages only appear when reading or printing tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from itertools import product
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence
from urllib.parse import quote, unquote

from .errors import (
    CountInconsistency,
    EmptyCohort,
    InvalidSchema,
    NegativeInput,
    NoPositives,
    ParseError,
    PercentSumOutOfBand,
    UnknownAttributeValue,
    UnknownGroup,
    ValidationError,
    ZeroMass,
)

# Tolerance on Σ P_i for a stored benchmark.
BENCHMARK_SUM_TOL = 1e-6
# Published percentage columns are accepted if they sum to 100 ± this.
PERCENT_SUM_BAND = 0.5


class Phase(str, Enum):
    TRAINING = "training"
    PRODUCTION = "production"


@dataclass(frozen=True)
class Attribute:
    name: str
    values: tuple[str, ...]


@dataclass(frozen=True)
class GroupKey:
    """One intersectional group: an (attribute, value) pair per schema attribute."""

    items: tuple[tuple[str, str], ...]

    @property
    def values(self) -> tuple[str, ...]:
        return tuple(v for _, v in self.items)

    def as_dict(self) -> dict[str, str]:
        return dict(self.items)

    def serialize(self) -> str:
        return ";".join(f"{quote(a, safe=' ')}={quote(v, safe=' ')}" for a, v in self.items)

    def label(self) -> str:
        return ", ".join(self.values)

    def __str__(self) -> str:
        return self.serialize()


@dataclass(frozen=True)
class AttributeSchema:
    """Protected attributes and their ordered value domains.

    The group space is the Cartesian product of the value lists, and the
    canonical group order is the lexicographic order of value positions.
    ``aliases`` maps attribute name -> {raw label: canonical value} and is
    only consulted when resolving labels read from files.
    """

    attributes: tuple[Attribute, ...]
    aliases: Mapping[str, Mapping[str, str]] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self) -> None:
        attrs = tuple(
            a if isinstance(a, Attribute) else Attribute(a[0], tuple(a[1])) for a in self.attributes
        )
        object.__setattr__(self, "attributes", attrs)
        if not attrs:
            raise InvalidSchema("schema needs at least one attribute")
        names = [a.name for a in attrs]
        if len(set(names)) != len(names):
            raise InvalidSchema(f"duplicate attribute names in {names}")
        for a in attrs:
            if not a.values:
                raise InvalidSchema(f"attribute {a.name!r} has no values")
            if len(set(a.values)) != len(a.values):
                raise InvalidSchema(f"attribute {a.name!r} has duplicate values")
        if self.size < 2:
            raise InvalidSchema("group space must contain at least two groups")
        for name, table in self.aliases.items():
            if name not in names:
                raise InvalidSchema(f"alias table for unknown attribute {name!r}")
            domain = set(self.attribute(name).values)
            for raw, target in table.items():
                if target not in domain:
                    raise InvalidSchema(f"alias {raw!r} -> {target!r} is not a value of {name!r}")
        index = {a.name: {v: i for i, v in enumerate(a.values)} for a in attrs}
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "aliases", MappingProxyType({k: dict(v) for k, v in self.aliases.items()}))

    @classmethod
    def from_dict(cls, data: Mapping) -> AttributeSchema:
        try:
            attrs = tuple(Attribute(str(a["name"]), tuple(str(v) for v in a["values"])) for a in data["attributes"])
        except (KeyError, TypeError) as exc:
            raise InvalidSchema(f"malformed schema object: {exc}") from None
        return cls(attrs, aliases=data.get("aliases") or {})

    def to_dict(self) -> dict:
        out: dict = {"attributes": [{"name": a.name, "values": list(a.values)} for a in self.attributes]}
        if self.aliases:
            out["aliases"] = {k: dict(v) for k, v in self.aliases.items()}
        return out

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    @property
    def size(self) -> int:
        return math.prod(len(a.values) for a in self.attributes)

    def attribute(self, name: str) -> Attribute:
        for a in self.attributes:
            if a.name == name:
                return a
        raise UnknownAttributeValue(f"unknown attribute {name!r}")

    def compatible_with(self, other: AttributeSchema) -> bool:
        return self.attributes == other.attributes

    def group_space(self) -> list[GroupKey]:
        return [
            GroupKey(tuple(zip(self.names, combo)))
            for combo in product(*(a.values for a in self.attributes))
        ]

    def resolve(self, name: str, raw: str) -> str:
        """Trim ``raw``, apply the alias table, and check domain membership."""
        value = raw.strip()
        value = self.aliases.get(name, {}).get(value, value)
        if value not in self._index[name]:
            raise UnknownAttributeValue(f"{value!r} is not a value of attribute {name!r}")
        return value

    def key(self, values: Sequence[str] | Mapping[str, str]) -> GroupKey:
        """Build a validated key from values in schema order or a name->value map."""
        if isinstance(values, Mapping):
            missing = [n for n in self.names if n not in values]
            extra = [n for n in values if n not in self._index]
            if missing or extra:
                raise UnknownGroup(f"group {dict(values)} does not match attributes {list(self.names)}")
            values = [values[n] for n in self.names]
        if len(values) != len(self.attributes):
            raise UnknownGroup(f"expected {len(self.attributes)} values, got {len(values)}")
        for name, v in zip(self.names, values):
            if v not in self._index[name]:
                raise UnknownAttributeValue(f"{v!r} is not a value of attribute {name!r}")
        return GroupKey(tuple(zip(self.names, values)))

    def validate_key(self, key: GroupKey) -> GroupKey:
        if tuple(a for a, _ in key.items) != self.names:
            raise UnknownGroup(f"group {key} does not follow schema attribute order {list(self.names)}")
        return self.key(key.values)

    def sort_key(self, key: GroupKey) -> tuple[int, ...]:
        return tuple(self._index[a][v] for a, v in key.items)

    def canonical(self, keys: Iterable[GroupKey]) -> list[GroupKey]:
        return sorted(keys, key=self.sort_key)

    def parse_key(self, text: str) -> GroupKey:
        pairs = []
        for part in text.split(";"):
            name, sep, value = part.partition("=")
            if not sep:
                raise ParseError(f"malformed group key {text!r}")
            pairs.append((unquote(name), unquote(value)))
        return self.validate_key(GroupKey(tuple(pairs)))


@dataclass(frozen=True)
class FairRange:
    metric: str
    lower: float
    upper: float
    ideal: float

    # Absorbs float rounding so that e.g. 0.55 - 0.45 still lands on the 0.1 edge.
    EDGE_SLACK = 1e-12

    def __post_init__(self) -> None:
        if not self.lower <= self.ideal <= self.upper:
            raise ValidationError(f"fair range for {self.metric} needs lower <= ideal <= upper")

    def contains(self, value: float) -> bool:
        return self.lower - self.EDGE_SLACK <= value <= self.upper + self.EDGE_SLACK


@dataclass(frozen=True)
class GroupCounts:
    """Per-group tallies. Confusion cells are all present or all None."""

    total: int
    positive: int
    tp: int | None = None
    fp: int | None = None
    fn: int | None = None
    tn: int | None = None

    def __post_init__(self) -> None:
        cells = (self.tp, self.fp, self.fn, self.tn)
        for name, v in (("total", self.total), ("positive", self.positive)):
            _check_count(name, v)
        if self.positive > self.total:
            raise CountInconsistency(f"positive count {self.positive} exceeds total {self.total}")
        present = [c is not None for c in cells]
        if any(present) and not all(present):
            raise CountInconsistency("confusion counts must be given all together")
        if all(present):
            for name, v in zip(("tp", "fp", "fn", "tn"), cells):
                _check_count(name, v)
            if sum(cells) != self.total:
                raise CountInconsistency(f"tp+fp+fn+tn = {sum(cells)} but total = {self.total}")
            if self.tp + self.fp != self.positive:
                raise CountInconsistency(f"tp+fp = {self.tp + self.fp} but positive = {self.positive}")

    @property
    def has_confusion(self) -> bool:
        return self.tp is not None

    def __add__(self, other: GroupCounts) -> GroupCounts:
        if self.has_confusion and other.has_confusion:
            return GroupCounts(
                self.total + other.total, self.positive + other.positive,
                self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn,
            )
        return GroupCounts(self.total + other.total, self.positive + other.positive)


def _check_count(name: str, v: object) -> None:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValidationError(f"{name} must be an integer, got {v!r}")
    if v < 0:
        raise NegativeInput(f"{name} must be non-negative, got {v}")


@dataclass(frozen=True)
class ObservedCohort:
    """Per-group observed counts for one phase and (optionally) one time window."""

    label: str
    phase: Phase
    schema: AttributeSchema
    counts: Mapping[GroupKey, GroupCounts]
    window: tuple[datetime, datetime] | None = None
    rejected: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "phase", Phase(self.phase))
        ordered = {}
        for k in self.schema.canonical(self.counts):
            ordered[self.schema.validate_key(k)] = self.counts[k]
        object.__setattr__(self, "counts", MappingProxyType(ordered))
        if self.total < 1:
            raise EmptyCohort(f"cohort {self.label!r} has no members")
        if self.window is not None and self.window[0] > self.window[1]:
            raise ValidationError(f"cohort {self.label!r} window starts after it ends")

    @property
    def groups(self) -> list[GroupKey]:
        return list(self.counts)

    @property
    def total(self) -> int:
        return sum(c.total for c in self.counts.values())

    @property
    def total_positive(self) -> int:
        return sum(c.positive for c in self.counts.values())

    @property
    def has_labels(self) -> bool:
        return all(c.has_confusion for c in self.counts.values())

    def with_counts(self, counts: Mapping[GroupKey, GroupCounts], **changes) -> ObservedCohort:
        return replace(self, counts=dict(counts), **changes)


@dataclass(frozen=True)
class DemographicBenchmark:
    """Named reference population: expected proportion P_i per group.

    ``raw`` keeps the values the benchmark was built from, in ``raw_unit``
    ("count", "percent" or "proportion").
    """

    name: str
    schema: AttributeSchema
    entries: Mapping[GroupKey, float]
    version: str = ""
    provenance: str = ""
    source: str = ""
    digest: str = ""
    raw: Mapping[GroupKey, float] | None = None
    raw_unit: str | None = None

    def __post_init__(self) -> None:
        ordered = {}
        for k in self.schema.canonical(self.entries):
            p = float(self.entries[k])
            if not p >= 0 or math.isinf(p):
                raise NegativeInput(f"expected proportion for {k} must be a non-negative number, got {p}")
            ordered[self.schema.validate_key(k)] = p
        total = sum(ordered.values())
        if abs(total - 1.0) > BENCHMARK_SUM_TOL:
            raise ValidationError(f"benchmark proportions sum to {total!r}, not 1")
        object.__setattr__(self, "entries", MappingProxyType(ordered))
        if self.raw is not None:
            object.__setattr__(self, "raw", MappingProxyType({k: self.raw[k] for k in self.schema.canonical(self.raw)}))

    @property
    def groups(self) -> list[GroupKey]:
        return list(self.entries)

    @property
    def identity(self) -> str:
        return f"{self.name}:{self.version}" if self.version else self.name


def observed_proportions(cohort: ObservedCohort) -> dict[GroupKey, float]:
    """R_i = N_i / N for every group present in the cohort."""
    n = cohort.total
    if n < 1:
        raise EmptyCohort(f"cohort {cohort.label!r} has no members")
    return {k: c.total / n for k, c in cohort.counts.items()}


def positive_shares(cohort: ObservedCohort) -> dict[GroupKey, float]:
    """Share of all positive decisions that went to each group."""
    n_pos = cohort.total_positive
    if n_pos < 1:
        raise NoPositives(f"cohort {cohort.label!r} has no positive decisions")
    return {k: c.positive / n_pos for k, c in cohort.counts.items()}


def normalize_benchmark(
    values: Mapping[GroupKey, float] | DemographicBenchmark,
    schema: AttributeSchema | None = None,
    *,
    unit: str = "count",
    name: str = "benchmark",
    version: str = "",
    provenance: str = "",
    source: str = "",
    digest: str = "",
) -> DemographicBenchmark:
    """Turn raw counts, percentages or proportions into a benchmark.

    Every value is divided by the total, so proportions sum to 1.
    Percentages must sum to 100 ± 0.5 and proportions to 1 ± 0.005; a
    larger gap points at a mis-keyed table and raises
    PercentSumOutOfBand. Passing an existing benchmark renormalizes its
    entries and keeps its metadata.
    """
    if isinstance(values, DemographicBenchmark):
        bench = values
        renormalized = normalize_benchmark(
            bench.entries, bench.schema, unit="proportion", name=bench.name, version=bench.version,
            provenance=bench.provenance, source=bench.source, digest=bench.digest,
        )
        if bench.raw is None:
            return renormalized
        return replace(renormalized, raw=bench.raw, raw_unit=bench.raw_unit)
    if schema is None:
        raise ValidationError("schema is required when normalizing raw values")
    if unit not in ("count", "percent", "proportion"):
        raise ValidationError(f"unknown unit {unit!r}")
    raw = {}
    for k, v in values.items():
        schema.validate_key(k)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or math.isnan(v) or math.isinf(v):
            raise ValidationError(f"value for {k} is not a finite number: {v!r}")
        if v < 0:
            raise NegativeInput(f"negative {unit} for {k}: {v}")
        if unit == "count" and v != int(v):
            raise ValidationError(f"count for {k} is not an integer: {v}")
        raw[k] = int(v) if unit == "count" else float(v)
    ordered = schema.canonical(raw)
    total = sum(raw[k] for k in ordered)
    if total <= 0:
        raise ZeroMass("benchmark has no positive mass")
    if unit == "percent" and abs(total - 100.0) > PERCENT_SUM_BAND:
        raise PercentSumOutOfBand(f"percentages sum to {total:g}, outside 100 ± {PERCENT_SUM_BAND}")
    if unit == "proportion" and abs(total - 1.0) > PERCENT_SUM_BAND / 100:
        raise PercentSumOutOfBand(f"proportions sum to {total:g}, outside 1 ± {PERCENT_SUM_BAND / 100}")
    entries = {k: raw[k] / total for k in ordered}
    return DemographicBenchmark(
        name=name, schema=schema, entries=entries, version=version, provenance=provenance,
        source=source, digest=digest, raw=raw, raw_unit=unit,
    )
