"""Group fairness metrics between an underprivileged (UG) and a privileged (PG) group.

    TPR = TP / (TP + FN)        EOD = TPR_UG - TPR_PG
    FPR = FP / (FP + TN)        OD  = (FPR_UG - FPR_PG) + (TPR_UG - TPR_PG)
    PPP = (TP + FP) / N_group   SPD = PPP_UG - PPP_PG
                                DI  = PPP_UG / PPP_PG

A metric whose inputs divide by zero is reported with an Undefined verdict
instead of raising, so sweeps keep every row.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .errors import EmptyCohort, MissingLabels, UnknownGroup
from .model import FairRange, GroupCounts, GroupKey, ObservedCohort

METRICS = ("EOD", "OD", "SPD", "DI")

DEFAULT_FAIR_RANGES: dict[str, FairRange] = {
    "EOD": FairRange("EOD", -0.1, 0.1, 0.0),
    "OD": FairRange("OD", -0.1, 0.1, 0.0),
    "SPD": FairRange("SPD", -0.1, 0.1, 0.0),
    "DI": FairRange("DI", 0.8, 1.2, 1.0),
}
# Conventional four-fifths band, symmetric in ratio terms.
FOUR_FIFTHS_DI = FairRange("DI", 0.8, 1.25, 1.0)


class Verdict(str, Enum):
    FAIR = "fair"
    UNFAIR = "unfair"
    UNDEFINED = "undefined"


class ReferenceStrategy(str, Enum):
    LARGEST = "largest"
    BEST_PPP = "best-ppp"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class GroupRates:
    group: GroupKey
    tpr: float | None
    fpr: float | None
    ppp: float | None
    counts: GroupCounts


@dataclass(frozen=True)
class FairnessAssessment:
    metric: str
    value: float | None
    fair_range: FairRange
    verdict: Verdict
    privileged: GroupKey
    underprivileged: GroupKey
    reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "value": self.value,
            "fair_range": [self.fair_range.lower, self.fair_range.upper],
            "ideal": self.fair_range.ideal,
            "verdict": self.verdict.value,
            "privileged": self.privileged.serialize(),
            "underprivileged": self.underprivileged.serialize(),
            "reason": self.reason,
        }


def _counts(cohort: ObservedCohort, group: GroupKey) -> GroupCounts:
    try:
        return cohort.counts[group]
    except KeyError:
        raise UnknownGroup(f"group {group.label()!r} is not in cohort {cohort.label!r}") from None


def _ratio(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def group_rates(cohort: ObservedCohort, group: GroupKey, *, require_labels: bool = False) -> GroupRates:
    """TPR/FPR/PPP of one group; a zero denominator leaves that rate as None.

    With ``require_labels`` a group without confusion counts raises
    MissingLabels; otherwise TPR and FPR are just None.
    """
    c = _counts(cohort, group)
    if not c.has_confusion:
        if require_labels:
            raise MissingLabels(f"cohort {cohort.label!r} has no true labels for {group.label()!r}")
        return GroupRates(group, None, None, _ratio(c.positive, c.total), c)
    return GroupRates(
        group,
        tpr=_ratio(c.tp, c.tp + c.fn),
        fpr=_ratio(c.fp, c.fp + c.tn),
        ppp=_ratio(c.tp + c.fp, c.total),
        counts=c,
    )


def _assess(metric, value, fair_range, ug, pg, reason=None) -> FairnessAssessment:
    if value is None:
        return FairnessAssessment(metric, None, fair_range, Verdict.UNDEFINED, pg, ug, reason or "zero denominator")
    verdict = Verdict.FAIR if fair_range.contains(value) else Verdict.UNFAIR
    return FairnessAssessment(metric, value, fair_range, verdict, pg, ug)


def _range(metric: str, fair_range: FairRange | None) -> FairRange:
    return fair_range if fair_range is not None else DEFAULT_FAIR_RANGES[metric]


def equal_opportunity_difference(cohort, ug, pg, fair_range: FairRange | None = None) -> FairnessAssessment:
    a = group_rates(cohort, ug, require_labels=True)
    b = group_rates(cohort, pg, require_labels=True)
    value = a.tpr - b.tpr if a.tpr is not None and b.tpr is not None else None
    return _assess("EOD", value, _range("EOD", fair_range), ug, pg)


def odds_difference(cohort, ug, pg, fair_range: FairRange | None = None) -> FairnessAssessment:
    a = group_rates(cohort, ug, require_labels=True)
    b = group_rates(cohort, pg, require_labels=True)
    if None in (a.tpr, b.tpr, a.fpr, b.fpr):
        value = None
    else:
        value = (a.fpr - b.fpr) + (a.tpr - b.tpr)
    return _assess("OD", value, _range("OD", fair_range), ug, pg)


def statistical_parity_difference(cohort, ug, pg, fair_range: FairRange | None = None) -> FairnessAssessment:
    a = group_rates(cohort, ug)
    b = group_rates(cohort, pg)
    value = a.ppp - b.ppp if a.ppp is not None and b.ppp is not None else None
    return _assess("SPD", value, _range("SPD", fair_range), ug, pg)


def disparate_impact(cohort, ug, pg, fair_range: FairRange | None = None) -> FairnessAssessment:
    a = group_rates(cohort, ug)
    b = group_rates(cohort, pg)
    value = a.ppp / b.ppp if a.ppp is not None and b.ppp else None
    return _assess("DI", value, _range("DI", fair_range), ug, pg)


_METRIC_FUNCS = {
    "EOD": equal_opportunity_difference,
    "OD": odds_difference,
    "SPD": statistical_parity_difference,
    "DI": disparate_impact,
}


def select_reference_group(
    cohort: ObservedCohort,
    strategy: ReferenceStrategy | str = ReferenceStrategy.LARGEST,
    explicit: GroupKey | None = None,
) -> GroupKey:
    """Pick the privileged reference group; ties go to the first group in canonical order."""
    strategy = ReferenceStrategy(strategy)
    if not cohort.counts:
        raise EmptyCohort(f"cohort {cohort.label!r} has no groups")
    if strategy is ReferenceStrategy.EXPLICIT:
        if explicit is None:
            raise UnknownGroup("explicit reference strategy needs a group")
        key = cohort.schema.validate_key(explicit)
        _counts(cohort, key)
        return key
    if strategy is ReferenceStrategy.LARGEST:
        score = {g: c.total for g, c in cohort.counts.items()}
    else:
        score = {g: c.positive / c.total for g, c in cohort.counts.items() if c.total > 0}
    best = None
    for g in cohort.groups:
        if g in score and (best is None or score[g] > score[best]):
            best = g
    return best


def pairwise_fairness_sweep(
    cohort: ObservedCohort,
    reference: GroupKey,
    fair_ranges: Mapping[str, FairRange] | None = None,
    metrics: tuple[str, ...] = METRICS,
) -> list[FairnessAssessment]:
    """Assess every other group of ``cohort`` against ``reference``.

    Rows come in canonical group order, metrics in EOD, OD, SPD, DI order.
    Label-dependent metrics on an unlabelled cohort yield Undefined rows
    with reason ``missing labels``.
    """
    ranges = {**DEFAULT_FAIR_RANGES, **(fair_ranges or {})}
    _counts(cohort, reference)
    rows = []
    for g in cohort.groups:
        if g == reference:
            continue
        for m in metrics:
            try:
                rows.append(_METRIC_FUNCS[m](cohort, g, reference, ranges[m]))
            except MissingLabels:
                rows.append(_assess(m, None, ranges[m], g, reference, "missing labels"))
    return rows
