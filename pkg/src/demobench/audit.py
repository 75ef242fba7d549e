"""Bias staging, drift monitoring and the LL144 small-group filter.

Sampling bias compares training data with the benchmark, deployment bias
compares the production population with the benchmark (never with the
training set), and structural bias compares the positive-decision
distribution with the benchmark.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from datetime import datetime
from enum import Enum
from typing import Mapping, Sequence

from .disparity import (
    AlignmentPolicy,
    DisparityReport,
    NddpNormalization,
    align_masses,
    disparity_report,
    total_demographic_disparity,
)
from .errors import EmptyCohort, EmptyWindow, NoPositives, PhaseMismatch, SchemaMismatch, UnorderedWindows
from .fairness import (
    DEFAULT_FAIR_RANGES,
    FairnessAssessment,
    ReferenceStrategy,
    pairwise_fairness_sweep,
    select_reference_group,
)
from .model import DemographicBenchmark, FairRange, GroupKey, ObservedCohort, Phase

logger = logging.getLogger(__name__)

# Same float tolerance fair ranges use at their endpoints.
_SLACK = FairRange.EDGE_SLACK

DEPLOYMENT_CAVEAT = (
    "production-vs-training drift is informational only; the training "
    "distribution is not ground truth and severity follows the benchmark comparison"
)


class Stage(str, Enum):
    SAMPLING = "sampling"
    DEPLOYMENT = "deployment"
    STRUCTURAL = "structural"


class Severity(str, Enum):
    PASS = "pass"
    WARN = "warn"
    FAIL = "fail"


@dataclass(frozen=True)
class AuditConfig:
    """Thresholds and strategy choices for one audit run.

    ``pass_max``/``warn_max`` grade TDD (sampling, deployment) and TDDP
    (structural): value <= pass_max is Pass, <= warn_max is Warn, else Fail.
    """

    pass_max: float = 0.05
    warn_max: float = 0.15
    policy: AlignmentPolicy = AlignmentPolicy.UNION
    nddp_normalization: NddpNormalization = NddpNormalization.EXPECTED
    reference_strategy: ReferenceStrategy = ReferenceStrategy.LARGEST
    reference_group: str | None = None
    fair_ranges: Mapping[str, FairRange] = field(default_factory=lambda: dict(DEFAULT_FAIR_RANGES))
    ll144: bool = False
    ll144_threshold: float = 0.02
    drift_threshold: float = 0.15
    step_threshold: float = 0.10
    top_offenders: int = 5

    def __post_init__(self) -> None:
        object.__setattr__(self, "policy", AlignmentPolicy(self.policy))
        object.__setattr__(self, "nddp_normalization", NddpNormalization(self.nddp_normalization))
        object.__setattr__(self, "reference_strategy", ReferenceStrategy(self.reference_strategy))
        object.__setattr__(self, "fair_ranges", {**DEFAULT_FAIR_RANGES, **self.fair_ranges})
        if not 0 <= self.pass_max <= self.warn_max:
            raise ValueError("severity thresholds need 0 <= pass_max <= warn_max")
        if not 0 <= self.ll144_threshold < 1:
            raise ValueError("ll144_threshold must lie in [0, 1)")

    def severity(self, value: float) -> Severity:
        if value <= self.pass_max + _SLACK:
            return Severity.PASS
        if value <= self.warn_max + _SLACK:
            return Severity.WARN
        return Severity.FAIL

    def echo(self) -> dict:
        """Settings that differ from the defaults, in serializable form."""
        default = AuditConfig()
        out = {}
        for f in fields(self):
            value, base = getattr(self, f.name), getattr(default, f.name)
            if value == base:
                continue
            if f.name == "fair_ranges":
                out[f.name] = {
                    m: [r.lower, r.upper] for m, r in sorted(value.items()) if base.get(m) != r
                }
            elif isinstance(value, Enum):
                out[f.name] = value.value
            else:
                out[f.name] = value
        return out


@dataclass(frozen=True)
class Offender:
    group: GroupKey
    value: float

    @property
    def direction(self) -> str:
        # value is expected minus observed
        return "over-represented" if self.value < 0 else "under-represented"

    def to_dict(self) -> dict:
        return {"group": self.group.serialize(), "value": self.value, "direction": self.direction}


@dataclass(frozen=True)
class BiasFinding:
    stage: Stage
    phase: Phase
    metrics: dict[str, float]
    offenders: tuple[Offender, ...]
    severity: Severity
    narrative: str
    disparity: DisparityReport
    supplementary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "stage": self.stage.value,
            "phase": self.phase.value,
            "metrics": dict(self.metrics),
            "worst_offenders": [o.to_dict() for o in self.offenders],
            "severity": self.severity.value,
            "narrative": self.narrative,
            "supplementary": dict(self.supplementary),
        }


def _offenders(values: Mapping[GroupKey, float], order: Sequence[GroupKey], limit: int) -> tuple[Offender, ...]:
    rank = {g: i for i, g in enumerate(order)}
    ranked = sorted(values.items(), key=lambda kv: (-abs(kv[1]), rank[kv[0]]))
    return tuple(Offender(g, v) for g, v in ranked[:limit] if v != 0.0)


def _narrative(stage: Stage, metric: str, value: float, severity: Severity, config: AuditConfig,
               benchmark: DemographicBenchmark, offenders: tuple[Offender, ...]) -> str:
    text = (
        f"{stage.value} bias: {metric} {value:.4f} against {benchmark.identity} is {severity.value} "
        f"(pass <= {config.pass_max:g}, warn <= {config.warn_max:g})."
    )
    if offenders:
        top = offenders[0]
        text += f" Largest gap: {top.group.label()} {top.direction} by {abs(top.value) * 100:.2f} pp."
    return text


def _require_phase(cohort: ObservedCohort, phase: Phase, stage: Stage) -> None:
    if cohort.phase is not phase:
        raise PhaseMismatch(
            f"{stage.value} audit needs a {phase.value} cohort, {cohort.label!r} is {cohort.phase.value}"
        )


def sampling_bias_audit(cohort: ObservedCohort, benchmark: DemographicBenchmark,
                        config: AuditConfig | None = None) -> BiasFinding:
    config = config or AuditConfig()
    _require_phase(cohort, Phase.TRAINING, Stage.SAMPLING)
    report = disparity_report(benchmark, cohort, config.policy, config.nddp_normalization)
    severity = config.severity(report.tdd)
    offenders = _offenders(report.dd, report.aligned.groups, config.top_offenders)
    return BiasFinding(
        Stage.SAMPLING, cohort.phase, {"TDD": report.tdd, "NDD": report.ndd}, offenders, severity,
        _narrative(Stage.SAMPLING, "TDD", report.tdd, severity, config, benchmark, offenders), report,
    )


def deployment_bias_audit(cohort: ObservedCohort, benchmark: DemographicBenchmark,
                          training: ObservedCohort | None = None,
                          config: AuditConfig | None = None) -> BiasFinding:
    """Production population against the benchmark.

    When a training cohort is given, the production-vs-training TDD is
    attached under ``supplementary`` with a caveat; it never affects severity.
    """
    config = config or AuditConfig()
    _require_phase(cohort, Phase.PRODUCTION, Stage.DEPLOYMENT)
    report = disparity_report(benchmark, cohort, config.policy, config.nddp_normalization)
    severity = config.severity(report.tdd)
    offenders = _offenders(report.dd, report.aligned.groups, config.top_offenders)
    supplementary = {}
    if training is not None:
        if not training.schema.compatible_with(cohort.schema):
            raise SchemaMismatch("training and production cohorts use different schemas")
        aligned = align_masses(
            cohort.schema,
            {k: c.total for k, c in training.counts.items()},
            {k: c.total for k, c in cohort.counts.items()},
            policy=AlignmentPolicy.UNION,
        )
        supplementary = {
            "training_cohort": training.label,
            "production_vs_training_tdd": total_demographic_disparity(aligned),
            "caveat": DEPLOYMENT_CAVEAT,
        }
    return BiasFinding(
        Stage.DEPLOYMENT, cohort.phase, {"TDD": report.tdd, "NDD": report.ndd}, offenders, severity,
        _narrative(Stage.DEPLOYMENT, "TDD", report.tdd, severity, config, benchmark, offenders), report,
        supplementary,
    )


def structural_bias_audit(cohort: ObservedCohort, benchmark: DemographicBenchmark,
                          config: AuditConfig | None = None) -> BiasFinding:
    config = config or AuditConfig()
    if cohort.total_positive < 1:
        raise NoPositives(f"structural audit needs positive decisions; {cohort.label!r} has none")
    report = disparity_report(benchmark, cohort, config.policy, config.nddp_normalization)
    severity = config.severity(report.tddp)
    offenders = _offenders(report.ddp, report.aligned.groups, config.top_offenders)
    return BiasFinding(
        Stage.STRUCTURAL, cohort.phase, {"TDDP": report.tddp, "NDDP": report.nddp}, offenders, severity,
        _narrative(Stage.STRUCTURAL, "TDDP", report.tddp, severity, config, benchmark, offenders), report,
    )


def apply_ll144_exclusion(cohort: ObservedCohort, threshold: float = 0.02) -> tuple[ObservedCohort, tuple[GroupKey, ...]]:
    """Drop groups holding less than ``threshold`` of the cohort (and empty groups).

    Only meant for fairness sweeps; disparity metrics should see the
    unfiltered cohort.
    """
    n = cohort.total
    kept: dict = {}
    excluded = []
    for g, c in cohort.counts.items():
        if c.total == 0 or c.total / n < threshold:
            excluded.append(g)
        else:
            kept[g] = c
    if excluded:
        logger.info("LL144 filter excluded %d of %d groups from %s", len(excluded), len(cohort.counts), cohort.label)
    if not kept:
        raise EmptyCohort(f"LL144 filter at {threshold:g} excludes every group of {cohort.label!r}")
    return cohort.with_counts(kept), tuple(excluded)


@dataclass(frozen=True)
class WindowResult:
    index: int
    label: str
    window: tuple[datetime, datetime] | None
    tdd_vs_benchmark: float
    tdd_vs_previous: float | None


@dataclass(frozen=True)
class Crossing:
    index: int
    kind: str  # "benchmark" or "step"
    value: float
    threshold: float


@dataclass(frozen=True)
class DriftSeries:
    benchmark: str
    windows: tuple[WindowResult, ...]
    crossings: tuple[Crossing, ...]
    benchmark_threshold: float
    step_threshold: float

    @property
    def step_tdds(self) -> list[float]:
        return [w.tdd_vs_previous for w in self.windows[1:]]

    def to_dict(self) -> dict:
        return {
            "benchmark": self.benchmark,
            "thresholds": {"benchmark": self.benchmark_threshold, "step": self.step_threshold},
            "windows": [
                {
                    "index": w.index,
                    "label": w.label,
                    "start": w.window[0].isoformat() if w.window else None,
                    "end": w.window[1].isoformat() if w.window else None,
                    "tdd_vs_benchmark": w.tdd_vs_benchmark,
                    "tdd_vs_previous": w.tdd_vs_previous,
                }
                for w in self.windows
            ],
            "crossings": [
                {"index": c.index, "kind": c.kind, "value": c.value, "threshold": c.threshold}
                for c in self.crossings
            ],
        }


def _check_order(windows: Sequence[ObservedCohort]) -> None:
    bounded = [w.window is not None for w in windows]
    if any(bounded) and not all(bounded):
        raise UnorderedWindows("either every window carries bounds or none does")
    if not all(bounded):
        return
    for prev, cur in zip(windows, windows[1:]):
        try:
            ok = cur.window[0] >= prev.window[1]
        except TypeError:
            raise UnorderedWindows("window bounds mix timezone-aware and naive timestamps") from None
        if not ok:
            raise UnorderedWindows(
                f"window {cur.label!r} starts at {cur.window[0].isoformat()} before "
                f"{prev.label!r} ends at {prev.window[1].isoformat()}"
            )


def drift_monitor(
    windows: Sequence[ObservedCohort],
    benchmark: DemographicBenchmark,
    benchmark_threshold: float = 0.15,
    step_threshold: float = 0.10,
    policy: AlignmentPolicy | str = AlignmentPolicy.UNION,
) -> DriftSeries:
    """TDD of each window against the benchmark and against the previous window.

    A crossing is recorded whenever either value is strictly above its
    threshold by more than 1e-12 (float noise). Windows must be
    time-ordered and non-overlapping when they carry bounds; otherwise
    list order is taken as time order.
    """
    if not windows:
        raise EmptyWindow("drift monitoring needs at least one window")
    for w in windows:
        if w.total < 1:
            raise EmptyWindow(f"window {w.label!r} is empty")
        if not w.schema.compatible_with(benchmark.schema):
            raise SchemaMismatch(f"window {w.label!r} does not use the benchmark schema")
    _check_order(windows)
    schema = benchmark.schema
    results, crossings = [], []
    prev = None
    for i, w in enumerate(windows):
        totals = {k: c.total for k, c in w.counts.items()}
        vs_bench = total_demographic_disparity(align_masses(schema, benchmark.entries, totals, policy=policy))
        vs_prev = None
        if prev is not None:
            vs_prev = total_demographic_disparity(
                align_masses(schema, prev, totals, policy=AlignmentPolicy.UNION)
            )
        results.append(WindowResult(i, w.label, w.window, vs_bench, vs_prev))
        if vs_bench > benchmark_threshold + _SLACK:
            crossings.append(Crossing(i, "benchmark", vs_bench, benchmark_threshold))
        if vs_prev is not None and vs_prev > step_threshold + _SLACK:
            crossings.append(Crossing(i, "step", vs_prev, step_threshold))
        prev = totals
    return DriftSeries(benchmark.identity, tuple(results), tuple(crossings), benchmark_threshold, step_threshold)


@dataclass(frozen=True)
class AuditOutcome:
    """Everything one ``audit run`` produces, before serialization."""

    cohort: ObservedCohort
    findings: tuple[BiasFinding, ...]
    disparity: DisparityReport
    reference: GroupKey | None
    fairness: tuple[FairnessAssessment, ...]
    excluded: tuple[GroupKey, ...]
    training: ObservedCohort | None = None

    @property
    def worst(self) -> Severity:
        order = [Severity.PASS, Severity.WARN, Severity.FAIL]
        return max((f.severity for f in self.findings), key=order.index, default=Severity.PASS)


def run_audit(
    cohort: ObservedCohort,
    benchmark: DemographicBenchmark,
    config: AuditConfig | None = None,
    *,
    training: ObservedCohort | None = None,
    structural: bool = False,
) -> AuditOutcome:
    """Stage-appropriate audits for one cohort.

    Training cohorts get a sampling audit, production cohorts a deployment
    audit; ``structural`` adds the positive-decision audit. A fairness
    sweep runs whenever the cohort has positive decisions, after the LL144
    filter if enabled.
    """
    config = config or AuditConfig()
    if cohort.phase is Phase.TRAINING:
        findings = [sampling_bias_audit(cohort, benchmark, config)]
    else:
        findings = [deployment_bias_audit(cohort, benchmark, training, config)]
    if structural:
        findings.append(structural_bias_audit(cohort, benchmark, config))

    reference, sweep, excluded = None, [], ()
    if cohort.total_positive > 0:
        swept = cohort
        if config.ll144:
            try:
                swept, excluded = apply_ll144_exclusion(cohort, config.ll144_threshold)
            except EmptyCohort:
                swept, excluded = None, tuple(cohort.groups)
        if swept is not None:
            explicit = None
            if config.reference_strategy is ReferenceStrategy.EXPLICIT and config.reference_group:
                explicit = cohort.schema.parse_key(config.reference_group)
            reference = select_reference_group(swept, config.reference_strategy, explicit)
            sweep = pairwise_fairness_sweep(swept, reference, config.fair_ranges)
    return AuditOutcome(
        cohort=cohort,
        findings=tuple(findings),
        disparity=findings[0].disparity,
        reference=reference,
        fairness=tuple(sweep),
        excluded=excluded,
        training=training,
    )
