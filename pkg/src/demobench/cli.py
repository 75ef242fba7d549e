"""Command-line interface.

Exit codes: 0 all findings pass / no drift crossings, 1 a finding is Warn
or Fail / a drift threshold was crossed, 2 operational error (bad input,
missing benchmark, I/O).
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .audit import AuditConfig, Severity, drift_monitor, run_audit
from .errors import DemobenchError
from .fairness import FOUR_FIFTHS_DI, METRICS
from .ingest import BenchmarkStore, load_benchmark, load_cohort, load_schema
from .model import FairRange, Phase
from .report import build_audit_report, build_drift_report, fmt, render_report

logger = logging.getLogger("demobench")

STORE_ENV = "DEMOBENCH_STORE"
DEFAULT_STORE = "benchmarks"

EXIT_OK, EXIT_FINDINGS, EXIT_ERROR = 0, 1, 2

_FLOAT_KEYS = ("pass_max", "warn_max", "ll144_threshold", "drift_threshold", "step_threshold")
_CONFIG_KEYS = {
    *_FLOAT_KEYS, "policy", "nddp_normalization", "reference_strategy", "reference_group",
    "ll144", "top_offenders", "di_rule", *(f"{m.lower()}_range" for m in METRICS),
}


class ConfigError(DemobenchError):
    pass


def parse_config(text: str, source: str = "config") -> dict:
    """Flat ``key = value`` document (``#`` comments) -> AuditConfig keyword arguments."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    try:
        parser.read_string("[config]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    raw = dict(parser["config"])
    unknown = sorted(set(raw) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{source}: unknown keys {', '.join(unknown)}")
    out: dict = {}
    ranges: dict[str, FairRange] = {}
    try:
        for key, value in raw.items():
            if key in _FLOAT_KEYS:
                out[key] = float(value)
            elif key == "top_offenders":
                out[key] = int(value)
            elif key == "ll144":
                out[key] = parser.getboolean("config", key)
            elif key == "di_rule":
                if value not in ("default", "four-fifths"):
                    raise ValueError(f"di_rule must be 'default' or 'four-fifths', got {value!r}")
                if value == "four-fifths":
                    ranges.setdefault("DI", FOUR_FIFTHS_DI)
            elif key.endswith("_range"):
                metric = key[: -len("_range")].upper()
                lower, upper = (float(x) for x in value.split(","))
                ideal = 1.0 if metric == "DI" else 0.0
                ranges[metric] = FairRange(metric, lower, upper, ideal)
            else:
                out[key] = value
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if ranges:
        out["fair_ranges"] = ranges
    return out


def _build_config(args: argparse.Namespace, flag_map: dict[str, str]) -> AuditConfig:
    settings: dict = {}
    if getattr(args, "config", None):
        settings.update(parse_config(Path(args.config).read_text(encoding="utf-8"), args.config))
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None and value is not False:
            settings[key] = value
    try:
        return AuditConfig(**settings)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _store(args: argparse.Namespace) -> BenchmarkStore:
    return BenchmarkStore(args.store or os.environ.get(STORE_ENV) or DEFAULT_STORE)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_benchmark_build(args: argparse.Namespace) -> int:
    schema = load_schema(Path(args.schema).read_text(encoding="utf-8")) if args.schema else None
    content = Path(args.input).read_text(encoding="utf-8")
    bench = load_benchmark(content, args.format, schema, name=args.name, source=Path(args.input).name)
    stored = _store(args).save(bench)
    width = max(len(g.label()) for g in stored.groups)
    print(f"benchmark {stored.identity} ({len(stored.entries)} groups, source {stored.source})")
    print(f"{'group':<{width}}  {'proportion':>10}  {'percent':>8}")
    for g, p in stored.entries.items():
        print(f"{g.label():<{width}}  {fmt(p, 6):>10}  {fmt(p * 100, 4):>8}")
    return EXIT_OK


def cmd_benchmark_list(args: argparse.Namespace) -> int:
    store = _store(args)
    names = [args.name] if args.name else store.names()
    for name in names:
        for v in store.list_versions(name):
            print(f"{name}:{v}")
    return EXIT_OK


_AUDIT_FLAGS = {
    "ll144": "ll144",
    "ll144_threshold": "ll144_threshold",
    "policy": "policy",
    "reference_strategy": "reference_strategy",
    "reference_group": "reference_group",
    "pass_max": "pass_max",
    "warn_max": "warn_max",
}


def cmd_audit_run(args: argparse.Namespace) -> int:
    bench = _store(args).resolve(args.benchmark)
    config = _build_config(args, _AUDIT_FLAGS)
    cohort = load_cohort(
        Path(args.cohort).read_text(encoding="utf-8"), bench.schema,
        phase=Phase(args.phase), source=Path(args.cohort).name,
    )
    training = None
    if args.training:
        training = load_cohort(
            Path(args.training).read_text(encoding="utf-8"), bench.schema,
            phase=Phase.TRAINING, source=Path(args.training).name,
        )
    outcome = run_audit(cohort, bench, config, training=training, structural=args.positives)
    report = build_audit_report(outcome, bench, config)
    _emit(render_report(report, args.format), args.out)
    return EXIT_OK if outcome.worst is Severity.PASS else EXIT_FINDINGS


_MONITOR_FLAGS = {"threshold": "drift_threshold", "step_threshold": "step_threshold", "policy": "policy"}


def cmd_monitor(args: argparse.Namespace) -> int:
    bench = _store(args).resolve(args.benchmark)
    config = _build_config(args, _MONITOR_FLAGS)
    windows = [
        load_cohort(Path(p).read_text(encoding="utf-8"), bench.schema, phase=Phase.PRODUCTION, source=Path(p).name)
        for p in args.windows
    ]
    series = drift_monitor(windows, bench, config.drift_threshold, config.step_threshold, config.policy)
    report = build_drift_report(series, windows, bench, config)
    _emit(render_report(report, args.format), args.out)
    return EXIT_FINDINGS if series.crossings else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="demobench",
        description="Audit decision systems against demographic reference benchmarks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_store(p):
        p.add_argument("--store", "--out", dest="store",
                       help=f"benchmark store directory (default: ${STORE_ENV} or ./{DEFAULT_STORE})")

    bench = sub.add_parser("benchmark", help="build and list reference benchmarks")
    bsub = bench.add_subparsers(dest="benchmark_command", required=True)
    build = bsub.add_parser("build", help="normalize a benchmark table and store a new version")
    build.add_argument("--schema", help="attribute schema JSON (required for delimited input)")
    build.add_argument("--input", required=True, help="benchmark file")
    build.add_argument("--format", choices=("delimited", "structured"), default="delimited",
                       help="input format (default: delimited)")
    build.add_argument("--name", required=True, help="benchmark name in the store")
    add_store(build)
    build.set_defaults(func=cmd_benchmark_build)
    lst = bsub.add_parser("list", help="list stored benchmark versions, oldest first")
    lst.add_argument("--name", help="only this benchmark")
    add_store(lst)
    lst.set_defaults(func=cmd_benchmark_list)

    audit = sub.add_parser("audit", help="audit a cohort against a benchmark")
    asub = audit.add_subparsers(dest="audit_command", required=True)
    run = asub.add_parser("run", help="run sampling/deployment/structural audits on one cohort")
    run.add_argument("--benchmark", required=True, help="stored benchmark as NAME or NAME:VERSION")
    run.add_argument("--cohort", required=True, help="aggregate table or decision records file")
    run.add_argument("--phase", required=True, choices=("training", "production"))
    run.add_argument("--positives", action="store_true",
                     help="also audit the positive-decision distribution (structural bias)")
    run.add_argument("--training", help="training cohort, reported next to a production audit")
    run.add_argument("--ll144", action="store_true", default=None,
                     help="exclude groups under the LL144 share threshold from the fairness sweep")
    run.add_argument("--ll144-threshold", type=float, help="LL144 share threshold (default 0.02)")
    run.add_argument("--policy", choices=("strict", "union-zero-fill", "intersect"),
                     help="group alignment policy (default union-zero-fill)")
    run.add_argument("--reference-strategy", choices=("largest", "best-ppp", "explicit"),
                     help="privileged reference group selection (default largest)")
    run.add_argument("--reference-group", help="reference group key for --reference-strategy explicit, "
                     "e.g. 'race=White alone;sex=Male'")
    run.add_argument("--pass-max", type=float, help="largest TDD/TDDP graded Pass (default 0.05)")
    run.add_argument("--warn-max", type=float, help="largest TDD/TDDP graded Warn (default 0.15)")
    run.add_argument("--config", help="flat key = value configuration file")
    run.add_argument("--format", choices=("structured", "human"), default="structured",
                     help="report format (default structured JSON)")
    run.add_argument("--out", help="write the report here instead of stdout")
    run.add_argument("--store", help=f"benchmark store directory (default: ${STORE_ENV} or ./{DEFAULT_STORE})")
    run.set_defaults(func=cmd_audit_run)

    mon = sub.add_parser("monitor", help="track disparity drift across production windows")
    mon.add_argument("--benchmark", required=True, help="stored benchmark as NAME or NAME:VERSION")
    mon.add_argument("--windows", required=True, nargs="+", help="window files in time order")
    mon.add_argument("--threshold", type=float, help="window-vs-benchmark TDD threshold (default 0.15)")
    mon.add_argument("--step-threshold", type=float, help="window-vs-previous TDD threshold (default 0.10)")
    mon.add_argument("--policy", choices=("strict", "union-zero-fill", "intersect"),
                     help="alignment policy against the benchmark (default union-zero-fill)")
    mon.add_argument("--config", help="flat key = value configuration file")
    mon.add_argument("--format", choices=("structured", "human"), default="structured")
    mon.add_argument("--out", help="write the report here instead of stdout")
    mon.add_argument("--store", help=f"benchmark store directory (default: ${STORE_ENV} or ./{DEFAULT_STORE})")
    mon.set_defaults(func=cmd_monitor)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DemobenchError, OSError, ValueError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
