"""Audit report assembly and rendering (structured JSON or a plain-text digest)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import ROUND_HALF_EVEN, Decimal
from urllib.parse import unquote

from . import __version__
from .audit import AuditConfig, AuditOutcome, DriftSeries
from .model import DemographicBenchmark, ObservedCohort

SCHEMA_VERSION = "1"
# Keys left out of the report digest.
_VOLATILE = ("timestamp", "report_digest")


@dataclass(frozen=True)
class AuditReport:
    kind: str
    benchmark: dict
    cohorts: list[dict]
    config: dict
    disparity: list[dict] = field(default_factory=list)
    fairness: dict | None = None
    findings: list[dict] = field(default_factory=list)
    drift: dict | None = None
    exclusions: dict | None = None
    tool_version: str = __version__
    timestamp: str = ""

    def to_dict(self) -> dict:
        body = {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
            "benchmark": self.benchmark,
            "cohorts": self.cohorts,
            "config": self.config,
            "disparity": self.disparity,
            "fairness": self.fairness,
            "findings": self.findings,
            "drift": self.drift,
            "exclusions": self.exclusions,
        }
        body["report_digest"] = report_digest(body)
        return body


def report_digest(body: dict) -> str:
    stable = {k: v for k, v in body.items() if k not in _VOLATILE}
    blob = json.dumps(stable, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def _benchmark_identity(bench: DemographicBenchmark) -> dict:
    return {"name": bench.name, "version": bench.version, "digest": bench.digest, "source": bench.source}


def _cohort_identity(cohort: ObservedCohort, role: str) -> dict:
    return {
        "label": cohort.label,
        "role": role,
        "phase": cohort.phase.value,
        "total": cohort.total,
        "positives": cohort.total_positive,
        "labelled": cohort.has_labels,
        "rejected_records": cohort.rejected,
        "window": [cohort.window[0].isoformat(), cohort.window[1].isoformat()] if cohort.window else None,
    }


def build_audit_report(outcome: AuditOutcome, benchmark: DemographicBenchmark, config: AuditConfig,
                       timestamp: str | None = None) -> AuditReport:
    cohorts = [_cohort_identity(outcome.cohort, "audited")]
    if outcome.training is not None:
        cohorts.append(_cohort_identity(outcome.training, "training"))
    fairness = None
    if outcome.reference is not None:
        fairness = {
            "reference": outcome.reference.serialize(),
            "strategy": config.reference_strategy.value,
            "rows": [a.to_dict() for a in outcome.fairness],
        }
    exclusions = None
    if config.ll144:
        exclusions = {
            "rule": "ll144",
            "threshold": config.ll144_threshold,
            "excluded": [g.serialize() for g in outcome.excluded],
            "applies_to": "fairness sweep only",
        }
    return AuditReport(
        kind="audit",
        benchmark=_benchmark_identity(benchmark),
        cohorts=cohorts,
        config=config.echo(),
        disparity=[outcome.disparity.to_dict()],
        fairness=fairness,
        findings=[f.to_dict() for f in outcome.findings],
        exclusions=exclusions,
        timestamp=_now() if timestamp is None else timestamp,
    )


def build_drift_report(series: DriftSeries, windows: list[ObservedCohort], benchmark: DemographicBenchmark,
                       config: AuditConfig, timestamp: str | None = None) -> AuditReport:
    return AuditReport(
        kind="monitor",
        benchmark=_benchmark_identity(benchmark),
        cohorts=[_cohort_identity(w, "window") for w in windows],
        config=config.echo(),
        drift=series.to_dict(),
        timestamp=_now() if timestamp is None else timestamp,
    )


def fmt(value: float | None, places: int = 4) -> str:
    """Fixed-point with half-even rounding; None prints as '-'."""
    if value is None:
        return "-"
    q = Decimal(1).scaleb(-places)
    return str(Decimal(repr(float(value))).quantize(q, rounding=ROUND_HALF_EVEN))


def parse_report(text: str) -> dict:
    return json.loads(text)


def render_report(report: AuditReport | dict, mode: str = "structured") -> str:
    body = report.to_dict() if isinstance(report, AuditReport) else report
    if mode == "structured":
        return json.dumps(body, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if mode == "human":
        return _render_human(body)
    raise ValueError(f"unknown render mode {mode!r}")


def _label(serialized: str) -> str:
    return ", ".join(unquote(part.partition("=")[2]) for part in serialized.split(";"))


def _render_human(body: dict) -> str:
    b = body["benchmark"]
    out = [
        f"demobench {body['kind']} report (schema {body['schema_version']}, tool {body['tool_version']})",
        f"benchmark: {b['name']}:{b['version']}  sha256 {b['digest'][:16]}",
    ]
    for c in body["cohorts"]:
        out.append(
            f"cohort: {c['label']} [{c['role']}, {c['phase']}] N={c['total']} positives={c['positives']}"
            + (f" rejected={c['rejected_records']}" if c["rejected_records"] else "")
        )
    if body["config"]:
        out.append("config: " + ", ".join(f"{k}={v}" for k, v in sorted(body["config"].items())))

    for d in body["disparity"]:
        rows = d["rows"]
        width = max([len("group")] + [len(_label(r["group"])) for r in rows])
        out += ["", f"disparity vs benchmark (policy {d['policy']})"]
        out.append(f"{'group':<{width}}  {'P':>8}  {'R':>8}  {'S':>8}  {'DD':>8}  {'DDP':>8}")
        for r in rows:
            out.append(
                f"{_label(r['group']):<{width}}  {fmt(r['P']):>8}  {fmt(r['R']):>8}  {fmt(r['S']):>8}  "
                f"{fmt(r['DD']):>8}  {fmt(r['DDP']):>8}"
            )
        a = d["aggregates"]
        out.append(
            f"aggregates: TDD {fmt(a['TDD'])}  NDD {fmt(a['NDD'])}  TDDP {fmt(a['TDDP'])}  NDDP {fmt(a['NDDP'])}"
        )
        if d["skipped"]:
            out.append("skipped:")
            out += [f"  {_label(s['group'])} ({s['metric']}): {s['reason']}" for s in d["skipped"]]
        if d["diagnostics"]:
            out.append("diagnostics:")
            out += [f"  {x['kind']}: {_label(x['group'])}" for x in d["diagnostics"]]

    if body["findings"]:
        out += ["", "findings:"]
        for f in body["findings"]:
            out.append(f"  [{f['severity'].upper()}] {f['narrative']}")
            if f["supplementary"]:
                sup = f["supplementary"]
                out.append(
                    f"    production vs training ({sup['training_cohort']}): TDD "
                    f"{fmt(sup['production_vs_training_tdd'])} - {sup['caveat']}"
                )

    if body["fairness"]:
        fz = body["fairness"]
        out += ["", f"fairness sweep (reference {_label(fz['reference'])}, strategy {fz['strategy']}):"]
        for r in fz["rows"]:
            note = f" ({r['reason']})" if r["reason"] else ""
            out.append(
                f"  {r['metric']:<4} {_label(r['underprivileged'])}: {fmt(r['value'])} "
                f"[{fmt(r['fair_range'][0], 2)}, {fmt(r['fair_range'][1], 2)}] {r['verdict']}{note}"
            )
    if body["exclusions"] is not None:
        ex = body["exclusions"]
        names = "; ".join(_label(g) for g in ex["excluded"]) or "none"
        out.append(f"ll144 exclusion (< {fmt(ex['threshold'] * 100, 2)}% of cohort, fairness sweep only): {names}")

    if body["drift"]:
        dr = body["drift"]
        th = dr["thresholds"]
        out += ["", f"drift (benchmark threshold {fmt(th['benchmark'])}, step threshold {fmt(th['step'])})"]
        out.append(f"{'idx':>3}  {'window':<20}  {'vs benchmark':>12}  {'vs previous':>12}")
        for w in dr["windows"]:
            out.append(f"{w['index']:>3}  {w['label']:<20}  {fmt(w['tdd_vs_benchmark']):>12}  {fmt(w['tdd_vs_previous']):>12}")
        if dr["crossings"]:
            out.append("crossings:")
            out += [
                f"  window {c['index']}: {c['kind']} TDD {fmt(c['value'])} > {fmt(c['threshold'])}"
                for c in dr["crossings"]
            ]
        else:
            out.append("crossings: none")
    out.append(f"report digest: {body['report_digest']}")
    return "\n".join(out) + "\n"
