"""Demographic benchmarking audits: disparity against reference populations,
group fairness metrics, bias staging and drift monitoring."""

__version__ = "0.1.0"

from .audit import (
    AuditConfig,
    BiasFinding,
    DriftSeries,
    Severity,
    Stage,
    apply_ll144_exclusion,
    deployment_bias_audit,
    drift_monitor,
    run_audit,
    sampling_bias_audit,
    structural_bias_audit,
)
from .disparity import (
    AlignedDistributions,
    AlignmentPolicy,
    DisparityReport,
    NddpNormalization,
    align_groups,
    demographic_disparity,
    disparity_report,
    normalized_demographic_disparity,
    positive_decision_disparities,
    total_demographic_disparity,
)
from .fairness import (
    FairnessAssessment,
    GroupRates,
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
from .ingest import (
    BenchmarkStore,
    list_benchmarks,
    load_aggregate_audit,
    load_benchmark,
    load_cohort,
    load_records,
    load_schema,
    save_benchmark,
)
from .model import (
    AttributeSchema,
    DemographicBenchmark,
    FairRange,
    GroupCounts,
    GroupKey,
    ObservedCohort,
    Phase,
    normalize_benchmark,
    observed_proportions,
    positive_shares,
)
