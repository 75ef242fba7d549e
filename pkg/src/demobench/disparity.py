"""Demographic disparity between a reference benchmark and an observed cohort.

For each aligned group i with expected proportion P_i, observed proportion
R_i and positive-decision share S_i:

    DD_i  = P_i - R_i          TDD  = sum |DD_i|     NDD  = mean |DD_i| / P_i
    DDP_i = P_i - S_i          TDDP = sum |DDP_i|    NDDP = mean |DDP_i| / P_i

The normalized forms average over groups with P_i > 0 only; the others are
reported as skipped. All sums run in canonical group order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .errors import AllGroupsSkipped, EmptyCohort, GroupMismatch, NoPositives, SchemaMismatch, ZeroMass
from .model import AttributeSchema, DemographicBenchmark, GroupKey, ObservedCohort


class AlignmentPolicy(str, Enum):
    STRICT = "strict"
    UNION = "union-zero-fill"
    INTERSECT = "intersect"


class NddpNormalization(str, Enum):
    """Denominator of the NDDP terms.

    EXPECTED divides by the benchmark proportion P_i, parallel to NDD.
    LITERAL divides by the group's positive share S_i, which is undefined
    for groups without positives; those are skipped.
    """

    EXPECTED = "expected"
    LITERAL = "literal"


@dataclass(frozen=True)
class AlignmentDiagnostics:
    only_in_benchmark: tuple[GroupKey, ...] = ()
    only_in_cohort: tuple[GroupKey, ...] = ()
    zero_expected: tuple[GroupKey, ...] = ()
    zero_observed: tuple[GroupKey, ...] = ()
    dropped: tuple[GroupKey, ...] = ()

    @property
    def clean(self) -> bool:
        return not any(
            (self.only_in_benchmark, self.only_in_cohort, self.zero_expected, self.zero_observed, self.dropped)
        )

    def as_rows(self) -> list[dict]:
        rows = []
        for kind in ("only_in_benchmark", "only_in_cohort", "zero_expected", "zero_observed", "dropped"):
            for g in getattr(self, kind):
                rows.append({"kind": kind, "group": g.serialize()})
        return rows


@dataclass(frozen=True)
class AlignedDistributions:
    """Expected, observed and (optionally) positive-share vectors over one group list."""

    schema: AttributeSchema
    groups: tuple[GroupKey, ...]
    expected: tuple[float, ...]
    actual: tuple[float, ...]
    positive: tuple[float, ...] | None = None
    diagnostics: AlignmentDiagnostics = field(default_factory=AlignmentDiagnostics)
    policy: AlignmentPolicy = AlignmentPolicy.UNION

    @property
    def n(self) -> int:
        return len(self.groups)


@dataclass(frozen=True)
class SkippedGroup:
    group: GroupKey
    metric: str
    reason: str

    def as_dict(self) -> dict:
        return {"group": self.group.serialize(), "metric": self.metric, "reason": self.reason}


@dataclass(frozen=True)
class PositiveDisparities:
    ddp: dict[GroupKey, float]
    tddp: float
    nddp: float
    skipped: tuple[SkippedGroup, ...]
    normalization: NddpNormalization


def _distribution(groups: list[GroupKey], mass: Mapping[GroupKey, float]) -> tuple[float, ...] | None:
    values = [float(mass.get(g, 0.0)) for g in groups]
    total = 0.0
    for v in values:
        total += v
    if total <= 0:
        return None
    return tuple(v / total for v in values)


def align_masses(
    schema: AttributeSchema,
    expected: Mapping[GroupKey, float],
    actual: Mapping[GroupKey, float],
    positive: Mapping[GroupKey, float] | None = None,
    policy: AlignmentPolicy | str = AlignmentPolicy.UNION,
) -> AlignedDistributions:
    """Align two unnormalized per-group masses (proportions or counts).

    Each side is renormalized over the aligned group set, so counts and
    proportions give the same result.
    """
    policy = AlignmentPolicy(policy)
    exp_groups = set(expected)
    act_groups = set(actual)
    only_exp = tuple(schema.canonical(exp_groups - act_groups))
    only_act = tuple(schema.canonical(act_groups - exp_groups))
    dropped: tuple[GroupKey, ...] = ()
    if policy is AlignmentPolicy.STRICT:
        if only_exp or only_act:
            missing = ", ".join(g.label() for g in (*only_exp, *only_act))
            raise GroupMismatch(f"group sets differ under strict alignment: {missing}")
        groups = schema.canonical(exp_groups)
    elif policy is AlignmentPolicy.UNION:
        groups = schema.canonical(exp_groups | act_groups)
    else:
        groups = schema.canonical(exp_groups & act_groups)
        dropped = only_exp + only_act
    p = _distribution(groups, expected)
    if p is None:
        raise ZeroMass("expected distribution has no mass over the aligned groups")
    r = _distribution(groups, actual)
    if r is None:
        raise EmptyCohort("observed distribution has no mass over the aligned groups")
    s = _distribution(groups, positive) if positive is not None else None
    diagnostics = AlignmentDiagnostics(
        only_in_benchmark=only_exp if policy is AlignmentPolicy.UNION else (),
        only_in_cohort=only_act if policy is AlignmentPolicy.UNION else (),
        zero_expected=tuple(g for g, v in zip(groups, p) if v == 0.0),
        zero_observed=tuple(g for g, v in zip(groups, r) if v == 0.0),
        dropped=dropped,
    )
    return AlignedDistributions(schema, tuple(groups), p, r, s, diagnostics, policy)


def align_groups(
    benchmark: DemographicBenchmark,
    cohort: ObservedCohort,
    policy: AlignmentPolicy | str = AlignmentPolicy.UNION,
) -> AlignedDistributions:
    """Put benchmark and cohort on one canonical group list.

    ``strict`` rejects any difference in group sets; ``union-zero-fill``
    gives missing groups zero mass on the side that lacks them;
    ``intersect`` keeps shared groups only and lists the rest as dropped.
    Positive shares are attached when the cohort has any positives.
    """
    if not benchmark.schema.compatible_with(cohort.schema):
        raise SchemaMismatch(
            f"benchmark {benchmark.name!r} and cohort {cohort.label!r} use different attribute schemas"
        )
    totals = {k: c.total for k, c in cohort.counts.items()}
    positives = {k: c.positive for k, c in cohort.counts.items()} if cohort.total_positive else None
    return align_masses(benchmark.schema, benchmark.entries, totals, positives, policy)


def demographic_disparity(aligned: AlignedDistributions) -> dict[GroupKey, float]:
    return {g: p - r for g, p, r in zip(aligned.groups, aligned.expected, aligned.actual)}


def total_demographic_disparity(aligned: AlignedDistributions) -> float:
    total = 0.0
    for p, r in zip(aligned.expected, aligned.actual):
        total += abs(p - r)
    return total


def _normalized(
    groups: tuple[GroupKey, ...],
    diffs: list[float],
    denominators: tuple[float, ...],
    metric: str,
    reason: str,
) -> tuple[float, tuple[SkippedGroup, ...]]:
    total = 0.0
    used = 0
    skipped = []
    for g, d, q in zip(groups, diffs, denominators):
        if q > 0:
            total += abs(d) / q
            used += 1
        else:
            skipped.append(SkippedGroup(g, metric, reason))
    if used == 0:
        raise AllGroupsSkipped(f"{metric}: every group has a zero denominator")
    return total / used, tuple(skipped)


def normalized_demographic_disparity(aligned: AlignedDistributions) -> tuple[float, tuple[SkippedGroup, ...]]:
    """Mean of |P_i - R_i| / P_i over groups with P_i > 0, plus the skipped groups."""
    diffs = [p - r for p, r in zip(aligned.expected, aligned.actual)]
    return _normalized(aligned.groups, diffs, aligned.expected, "NDD", "zero expected proportion")


def positive_decision_disparities(
    aligned: AlignedDistributions,
    normalization: NddpNormalization | str = NddpNormalization.EXPECTED,
) -> PositiveDisparities:
    normalization = NddpNormalization(normalization)
    if aligned.positive is None:
        raise NoPositives("no positive decisions to compare against the benchmark")
    diffs = [p - s for p, s in zip(aligned.expected, aligned.positive)]
    tddp = 0.0
    for d in diffs:
        tddp += abs(d)
    if normalization is NddpNormalization.EXPECTED:
        nddp, skipped = _normalized(aligned.groups, diffs, aligned.expected, "NDDP", "zero expected proportion")
    else:
        nddp, skipped = _normalized(aligned.groups, diffs, aligned.positive, "NDDP", "zero positive share")
    return PositiveDisparities(dict(zip(aligned.groups, diffs)), tddp, nddp, skipped, normalization)


@dataclass(frozen=True)
class DisparityReport:
    benchmark: str
    cohort: str
    aligned: AlignedDistributions
    dd: dict[GroupKey, float]
    tdd: float
    ndd: float
    positive: PositiveDisparities | None
    skipped: tuple[SkippedGroup, ...]

    @property
    def ddp(self) -> dict[GroupKey, float] | None:
        return self.positive.ddp if self.positive else None

    @property
    def tddp(self) -> float | None:
        return self.positive.tddp if self.positive else None

    @property
    def nddp(self) -> float | None:
        return self.positive.nddp if self.positive else None

    def rows(self) -> list[dict]:
        a = self.aligned
        out = []
        for i, g in enumerate(a.groups):
            out.append({
                "group": g.serialize(),
                "values": g.as_dict(),
                "P": a.expected[i],
                "R": a.actual[i],
                "S": a.positive[i] if a.positive is not None else None,
                "DD": self.dd[g],
                "DDP": self.positive.ddp[g] if self.positive else None,
            })
        return out

    def to_dict(self) -> dict:
        return {
            "benchmark": self.benchmark,
            "cohort": self.cohort,
            "policy": self.aligned.policy.value,
            "nddp_normalization": self.positive.normalization.value if self.positive else None,
            "rows": self.rows(),
            "aggregates": {"TDD": self.tdd, "NDD": self.ndd, "TDDP": self.tddp, "NDDP": self.nddp},
            "skipped": [s.as_dict() for s in self.skipped],
            "diagnostics": self.aligned.diagnostics.as_rows(),
        }


def disparity_report(
    benchmark: DemographicBenchmark,
    cohort: ObservedCohort,
    policy: AlignmentPolicy | str = AlignmentPolicy.UNION,
    nddp_normalization: NddpNormalization | str = NddpNormalization.EXPECTED,
) -> DisparityReport:
    """Every disparity metric for one cohort; DDP family only if it has positives."""
    aligned = align_groups(benchmark, cohort, policy)
    ndd, skipped = normalized_demographic_disparity(aligned)
    positive = None
    if aligned.positive is not None:
        positive = positive_decision_disparities(aligned, nddp_normalization)
        skipped = skipped + positive.skipped
    return DisparityReport(
        benchmark=benchmark.identity,
        cohort=cohort.label,
        aligned=aligned,
        dd=demographic_disparity(aligned),
        tdd=total_demographic_disparity(aligned),
        ndd=ndd,
        positive=positive,
        skipped=skipped,
    )
