import random

import pytest

from demobench.errors import MissingLabels, UnknownGroup
from demobench.fairness import (
    FOUR_FIFTHS_DI,
    METRICS,
    ReferenceStrategy,
    Verdict,
    disparate_impact,
    equal_opportunity_difference,
    group_rates,
    odds_difference,
    pairwise_fairness_sweep,
    select_reference_group,
    statistical_parity_difference,
)
from demobench.ingest import load_records
from demobench.model import AttributeSchema

from conftest import make_cohort


def key(schema, v):
    return schema.key([v])


class TestRates:
    def test_tpr_and_fpr(self, ab):
        c = make_cohort(ab, {"A": (100, 40, 40, 0, 10, 50), "B": (10, 5, 5, 0, 0, 5)})
        r = group_rates(c, key(ab, "A"))
        assert r.tpr == 0.8
        assert r.fpr == 0.0

    def test_ppp_uses_group_total(self, ab):
        c = make_cohort(ab, {"A": (120, 30), "B": (880, 10)})
        assert group_rates(c, key(ab, "A")).ppp == 0.25

    def test_zero_denominators_are_none(self, ab):
        c = make_cohort(ab, {"A": (5, 0, 0, 0, 0, 5), "B": (5, 5, 5, 0, 0, 0)})
        assert group_rates(c, key(ab, "A")).tpr is None
        assert group_rates(c, key(ab, "B")).fpr is None

    def test_require_labels(self, ab):
        c = make_cohort(ab, {"A": (5, 1), "B": (5, 1)})
        assert group_rates(c, key(ab, "A")).tpr is None
        with pytest.raises(MissingLabels):
            group_rates(c, key(ab, "A"), require_labels=True)

    def test_unknown_group(self, abc):
        c = make_cohort(abc, {"A": (5, 1), "B": (5, 1)})
        with pytest.raises(UnknownGroup):
            group_rates(c, key(abc, "C"))


class TestMetrics:
    def test_eod(self, ab):
        # TPR 0.6 vs 0.8
        c = make_cohort(ab, {"A": (20, 6, 6, 0, 4, 10), "B": (20, 8, 8, 0, 2, 10)})
        a = equal_opportunity_difference(c, key(ab, "A"), key(ab, "B"))
        assert a.value == pytest.approx(-0.2, abs=1e-15)
        assert a.verdict is Verdict.UNFAIR

    def test_od_cancellation(self, ab):
        # TPR +0.1, FPR -0.1
        c = make_cohort(ab, {"A": (20, 10, 9, 1, 1, 9), "B": (20, 10, 8, 2, 2, 8)})
        a = odds_difference(c, key(ab, "A"), key(ab, "B"))
        assert a.value == pytest.approx(0.0, abs=1e-15)
        assert a.verdict is Verdict.FAIR

    def test_spd_and_di(self, ab):
        c = make_cohort(ab, {"A": (100, 30), "B": (100, 50)})
        spd = statistical_parity_difference(c, key(ab, "A"), key(ab, "B"))
        di = disparate_impact(c, key(ab, "A"), key(ab, "B"))
        assert spd.value == pytest.approx(-0.2, abs=1e-15) and spd.verdict is Verdict.UNFAIR
        assert di.value == pytest.approx(0.6, abs=1e-15) and di.verdict is Verdict.UNFAIR

    def test_identical_groups_are_ideal(self, ab):
        c = make_cohort(ab, {"A": (20, 8, 6, 2, 4, 8), "B": (40, 16, 12, 4, 8, 16)})
        ug, pg = key(ab, "A"), key(ab, "B")
        assert equal_opportunity_difference(c, ug, pg).value == 0.0
        assert odds_difference(c, ug, pg).value == 0.0
        assert statistical_parity_difference(c, ug, pg).value == 0.0
        assert disparate_impact(c, ug, pg).value == 1.0

    @pytest.mark.parametrize("pos_a, verdict", [(80, Verdict.FAIR), (79, Verdict.UNFAIR), (120, Verdict.FAIR),
                                                (121, Verdict.UNFAIR)])
    def test_di_boundaries_inclusive(self, ab, pos_a, verdict):
        c = make_cohort(ab, {"A": (1000, pos_a), "B": (1000, 100)})
        assert disparate_impact(c, key(ab, "A"), key(ab, "B")).verdict is verdict

    @pytest.mark.parametrize("pos_a, verdict", [(400, Verdict.FAIR), (399, Verdict.UNFAIR), (600, Verdict.FAIR),
                                                (601, Verdict.UNFAIR)])
    def test_spd_boundaries_inclusive(self, ab, pos_a, verdict):
        c = make_cohort(ab, {"A": (1000, pos_a), "B": (1000, 500)})
        assert statistical_parity_difference(c, key(ab, "A"), key(ab, "B")).verdict is verdict

    def test_four_fifths_range(self, ab):
        c = make_cohort(ab, {"A": (100, 50), "B": (100, 40)})
        ug, pg = key(ab, "A"), key(ab, "B")
        assert disparate_impact(c, ug, pg).verdict is Verdict.UNFAIR
        assert disparate_impact(c, ug, pg, FOUR_FIFTHS_DI).verdict is Verdict.FAIR

    def test_zero_reference_ppp_is_undefined(self, ab):
        c = make_cohort(ab, {"A": (10, 3), "B": (10, 0)})
        a = disparate_impact(c, key(ab, "A"), key(ab, "B"))
        assert a.value is None and a.verdict is Verdict.UNDEFINED and a.reason == "zero denominator"

    def test_eod_undefined_when_no_actual_positives(self, ab):
        c = make_cohort(ab, {"A": (10, 2, 0, 2, 0, 8), "B": (10, 5, 4, 1, 1, 4)})
        assert equal_opportunity_difference(c, key(ab, "A"), key(ab, "B")).verdict is Verdict.UNDEFINED

    def test_spd_equals_ppp_times_di_minus_one(self, ab):
        c = make_cohort(ab, {"A": (37, 11), "B": (53, 29)})
        ug, pg = key(ab, "A"), key(ab, "B")
        ppp_pg = group_rates(c, pg).ppp
        spd = statistical_parity_difference(c, ug, pg).value
        di = disparate_impact(c, ug, pg).value
        assert abs(spd - ppp_pg * (di - 1)) <= 1e-12


class TestReference:
    def test_largest(self, abc):
        c = make_cohort(abc, {"A": (10, 9), "B": (30, 3), "C": (20, 2)})
        assert select_reference_group(c).values == ("B",)

    def test_best_ppp(self, abc):
        c = make_cohort(abc, {"A": (10, 9), "B": (30, 3), "C": (20, 2)})
        assert select_reference_group(c, "best-ppp").values == ("A",)

    def test_ties_break_canonically(self, abc):
        c = make_cohort(abc, {"C": (10, 1), "B": (10, 1)})
        assert select_reference_group(c).values == ("B",)
        assert select_reference_group(c, ReferenceStrategy.BEST_PPP).values == ("B",)

    def test_explicit(self, abc):
        c = make_cohort(abc, {"A": (10, 1), "B": (10, 1)})
        assert select_reference_group(c, "explicit", key(abc, "A")).values == ("A",)
        with pytest.raises(UnknownGroup):
            select_reference_group(c, "explicit", key(abc, "C"))
        with pytest.raises(UnknownGroup):
            select_reference_group(c, "explicit")


class TestSweep:
    def test_cardinality_and_order(self, race_sex, cohorts):
        adp = cohorts["adp"]
        ref = select_reference_group(adp)
        rows = pairwise_fairness_sweep(adp, ref)
        others = [g for g in adp.groups if g != ref]
        assert len(rows) == len(METRICS) * len(others)
        assert [r.metric for r in rows[:4]] == list(METRICS)
        assert all(r.privileged == ref and r.underprivileged != ref for r in rows)
        assert [r.underprivileged for r in rows[::4]] == others

    def test_missing_labels_rows(self, cohorts):
        adp = cohorts["adp"]
        rows = pairwise_fairness_sweep(adp, select_reference_group(adp))
        for r in rows:
            if r.metric in ("EOD", "OD"):
                assert r.verdict is Verdict.UNDEFINED and r.reason == "missing labels"
            elif adp.counts[r.underprivileged].total == 0:
                assert r.verdict is Verdict.UNDEFINED and r.reason == "zero denominator"
            else:
                assert r.value is not None

    def test_custom_range(self, ab):
        from demobench.model import FairRange

        c = make_cohort(ab, {"A": (100, 30), "B": (100, 50)})
        rows = pairwise_fairness_sweep(c, key(ab, "B"), {"SPD": FairRange("SPD", -0.25, 0.25, 0.0)})
        spd = next(r for r in rows if r.metric == "SPD")
        assert spd.verdict is Verdict.FAIR


def test_record_level_oracle():
    """Metrics from loaded records equal a brute-force per-record computation."""
    schema = AttributeSchema((("g", ("A", "B", "C")),))
    rng = random.Random(11)
    rows = [(rng.choice("ABC"), rng.randint(0, 1), rng.randint(0, 1)) for _ in range(600)]
    cohort = load_records("g,decision,label\n" + "".join(f"{g},{d},{y}\n" for g, d, y in rows), schema)

    def rates(g):
        sub = [(d, y) for gg, d, y in rows if gg == g]
        tpr = sum(d for d, y in sub if y) / sum(1 for _, y in sub if y)
        fpr = sum(d for d, y in sub if not y) / sum(1 for _, y in sub if not y)
        ppp = sum(d for d, _ in sub) / len(sub)
        return tpr, fpr, ppp

    pg = schema.key(["A"])
    ta, fa, pa = rates("A")
    for g in "BC":
        tu, fu, pu = rates(g)
        ug = schema.key([g])
        assert equal_opportunity_difference(cohort, ug, pg).value == pytest.approx(tu - ta, abs=1e-12)
        assert odds_difference(cohort, ug, pg).value == pytest.approx((fu - fa) + (tu - ta), abs=1e-12)
        assert statistical_parity_difference(cohort, ug, pg).value == pytest.approx(pu - pa, abs=1e-12)
        assert disparate_impact(cohort, ug, pg).value == pytest.approx(pu / pa, abs=1e-12)
