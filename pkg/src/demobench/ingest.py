"""Parsing of benchmark tables, decision records and aggregate audit tables,
plus a versioned on-disk benchmark store.

Delimited files are UTF-8, comma separated, with ``#`` comment lines.
Comment lines of the form ``# window_start: <iso>`` / ``# window_end: <iso>``
set the observation window of a cohort file.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import re
import tempfile
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping

from filelock import FileLock

from .errors import (
    BenchmarkNotFound,
    CountInconsistency,
    DuplicateGroup,
    EmptyCohort,
    InvalidSchema,
    MixedLabels,
    ParseError,
    StoreError,
    UnknownAttributeValue,
    ValidationError,
    VersionCollision,
)
from .model import (
    AttributeSchema,
    DemographicBenchmark,
    GroupCounts,
    GroupKey,
    ObservedCohort,
    Phase,
    normalize_benchmark,
)

BENCHMARK_FORMAT_VERSION = 1
VALUE_COLUMNS = ("count", "percent", "proportion")
CONFUSION_COLUMNS = ("tp", "fp", "fn", "tn")
_WINDOW_RE = re.compile(r"^#\s*window_(start|end)\s*:\s*(\S+)\s*$")
_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


def content_digest(content: str | bytes) -> str:
    if isinstance(content, str):
        content = content.encode("utf-8")
    return hashlib.sha256(content).hexdigest()


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


class _Table:
    """Header plus data rows of a delimited file, with source line numbers."""

    def __init__(self, content: str, source: str = ""):
        self.source = source
        self.comments: list[str] = []
        self.window: dict[str, datetime] = {}
        self.header: list[str] | None = None
        self.header_line = 0
        self.rows: list[tuple[int, list[str]]] = []
        for lineno, line in enumerate(content.lstrip("﻿").splitlines(), start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                self._comment(stripped, lineno)
                continue
            try:
                cells = next(csv.reader([line], skipinitialspace=False))
            except csv.Error as exc:
                raise ParseError(str(exc), lineno, source) from None
            cells = [c.strip() for c in cells]
            if self.header is None:
                self.header = cells
                self.header_line = lineno
            else:
                if len(cells) != len(self.header):
                    raise ParseError(
                        f"expected {len(self.header)} fields, found {len(cells)}", lineno, source
                    )
                self.rows.append((lineno, cells))

    def _comment(self, text: str, lineno: int) -> None:
        m = _WINDOW_RE.match(text)
        if m:
            try:
                self.window[m.group(1)] = parse_timestamp(m.group(2))
            except ValueError:
                raise ParseError(f"bad window timestamp {m.group(2)!r}", lineno, self.source) from None
        else:
            self.comments.append(text.lstrip("#").strip())

    def columns(self, schema: AttributeSchema, required: tuple[str, ...], optional: tuple[str, ...] = ()) -> dict[str, int]:
        if self.header is None:
            raise ParseError("missing header row", None, self.source)
        index: dict[str, int] = {}
        for i, name in enumerate(self.header):
            col = name if name in schema.names else name.lower()
            if col in index:
                raise ParseError(f"duplicate column {name!r}", self.header_line, self.source)
            if col not in schema.names and col not in required and col not in optional:
                raise ParseError(f"unexpected column {name!r}", self.header_line, self.source)
            index[col] = i
        for col in (*schema.names, *required):
            if col not in index:
                raise ParseError(f"missing column {col!r}", self.header_line, self.source)
        return index

    def window_bounds(self) -> tuple[datetime, datetime] | None:
        if not self.window:
            return None
        if set(self.window) != {"start", "end"}:
            raise ParseError("window_start and window_end must be given together", None, self.source)
        return self.window["start"], self.window["end"]

    def group(self, schema: AttributeSchema, index: Mapping[str, int], lineno: int, cells: list[str]) -> GroupKey | None:
        """Group key of a row, or None when an attribute cell is blank."""
        raw = [cells[index[n]] for n in schema.names]
        if any(not v for v in raw):
            return None
        try:
            return schema.key([schema.resolve(n, v) for n, v in zip(schema.names, raw)])
        except UnknownAttributeValue as exc:
            raise UnknownAttributeValue(f"{self._where(lineno)}{exc}") from None

    def _where(self, lineno: int) -> str:
        return f"{self.source}:line {lineno}: " if self.source else f"line {lineno}: "


def _int_cell(text: str, column: str, lineno: int, source: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ParseError(f"{column} must be an integer, got {text!r}", lineno, source) from None
    return value


def _number_cell(text: str, column: str, lineno: int, source: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{column} must be a number, got {text!r}", lineno, source) from None
    if value != value or value in (float("inf"), float("-inf")):
        raise ParseError(f"{column} must be finite, got {text!r}", lineno, source)
    return value


def _binary_cell(text: str, column: str, lineno: int, source: str) -> int:
    if text not in ("0", "1"):
        raise ParseError(f"{column} must be 0 or 1, got {text!r}", lineno, source)
    return int(text)


# --- schema ----------------------------------------------------------------


def load_schema(content: str | Mapping) -> AttributeSchema:
    """Schema from a JSON document ``{"attributes": [{"name", "values"}], "aliases"?}``."""
    if isinstance(content, Mapping):
        return AttributeSchema.from_dict(content)
    try:
        data = json.loads(content)
    except json.JSONDecodeError as exc:
        raise ParseError(f"schema is not valid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(data, dict):
        raise InvalidSchema("schema document must be an object")
    return AttributeSchema.from_dict(data)


# --- benchmarks ------------------------------------------------------------


def load_benchmark(
    content: str,
    format: str = "delimited",
    schema: AttributeSchema | None = None,
    *,
    name: str | None = None,
    source: str = "",
    version: str = "",
) -> DemographicBenchmark:
    """Parse a benchmark file and return it normalized.

    ``delimited`` files need ``schema`` and a header ``attr1,...,attrK,count``
    (or ``percent``). ``structured`` files carry their own schema; if one is
    passed as well it must match. The source name and a SHA-256 of the
    content are recorded on the result.
    """
    digest = content_digest(content)
    if format == "structured":
        bench = _benchmark_from_object(content, source)
        if schema is not None and not schema.compatible_with(bench.schema):
            raise InvalidSchema("structured benchmark schema differs from the supplied schema")
        changes = {"source": bench.source or source, "digest": bench.digest or digest}
        if name:
            changes["name"] = name
        if version:
            changes["version"] = version
        return replace(bench, **changes)
    if format != "delimited":
        raise ValidationError(f"unknown benchmark format {format!r}")
    if schema is None:
        raise ValidationError("delimited benchmarks need a schema")

    table = _Table(content, source)
    if table.header is None:
        raise ParseError("missing header row", None, source)
    lowered = [h.lower() for h in table.header]
    units = [u for u in VALUE_COLUMNS if u in lowered]
    if len(units) != 1:
        raise ParseError(
            "header needs exactly one of count, percent or proportion", table.header_line, source
        )
    unit = units[0]
    index = table.columns(schema, (unit,))
    values: dict[GroupKey, float] = {}
    for lineno, cells in table.rows:
        key = table.group(schema, index, lineno, cells)
        if key is None:
            raise ParseError("blank attribute value", lineno, source)
        if key in values:
            raise DuplicateGroup(f"{table._where(lineno)}group {key.label()!r} appears twice")
        text = cells[index[unit]]
        values[key] = _int_cell(text, unit, lineno, source) if unit == "count" else _number_cell(text, unit, lineno, source)
    provenance = "; ".join(table.comments)
    return normalize_benchmark(
        values, schema, unit=unit, name=name or (Path(source).stem if source else "benchmark"),
        version=version, provenance=provenance, source=source, digest=digest,
    )


def benchmark_to_dict(bench: DemographicBenchmark) -> dict:
    out = {
        "format_version": BENCHMARK_FORMAT_VERSION,
        "name": bench.name,
        "version": bench.version,
        "schema": bench.schema.to_dict(),
        "entries": [{"group": k.as_dict(), "proportion": p} for k, p in bench.entries.items()],
        "provenance": bench.provenance,
        "source": bench.source,
        "digest": bench.digest,
    }
    if bench.raw is not None:
        out["raw_unit"] = bench.raw_unit
        out["raw"] = [{"group": k.as_dict(), "value": v} for k, v in bench.raw.items()]
    return out


def save_benchmark(bench: DemographicBenchmark) -> str:
    """Structured (JSON) serialization of a benchmark."""
    return json.dumps(benchmark_to_dict(bench), indent=2, ensure_ascii=False) + "\n"


def _benchmark_from_object(content: str | Mapping, source: str = "") -> DemographicBenchmark:
    if isinstance(content, Mapping):
        data = content
    else:
        try:
            data = json.loads(content)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, source) from None
    try:
        schema = AttributeSchema.from_dict(data["schema"])
        entries: dict[GroupKey, float] = {}
        for item in data["entries"]:
            key = schema.key(item["group"])
            if key in entries:
                raise DuplicateGroup(f"group {key.label()!r} appears twice")
            entries[key] = item["proportion"]
        raw = None
        if data.get("raw") is not None:
            raw = {schema.key(item["group"]): item["value"] for item in data["raw"]}
        name = data["name"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed benchmark object: missing or invalid {exc}", None, source) from None
    bench = normalize_benchmark(
        entries, schema, unit="proportion", name=name, version=str(data.get("version", "")),
        provenance=data.get("provenance", ""), source=data.get("source", ""), digest=data.get("digest", ""),
    )
    # Proportions that already sum to 1 are kept bit-for-bit.
    if abs(sum(entries.values()) - 1.0) <= 1e-12:
        bench = replace(bench, entries=entries)
    return replace(bench, raw=raw, raw_unit=data.get("raw_unit") if raw is not None else None)


class BenchmarkStore:
    """Append-only directory of versioned benchmark files.

    Layout: ``<root>/<name>/v0001.json``, ``v0002.json``, ... Writes hold
    a lock file so versions are assigned by a single writer at a time;
    files are published with a hard link, so readers never see partial
    content and an existing version is never overwritten.
    """

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    def _dir(self, name: str) -> Path:
        if not _NAME_RE.match(name):
            raise StoreError(f"invalid benchmark name {name!r}")
        return self.root / name

    def names(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if p.is_dir() and _NAME_RE.match(p.name))

    def list_versions(self, name: str) -> list[str]:
        d = self._dir(name)
        if not d.is_dir():
            return []
        found = [p.stem for p in d.glob("v*.json") if re.fullmatch(r"v\d+", p.stem)]
        return sorted(found, key=lambda v: int(v[1:]))

    def save(self, bench: DemographicBenchmark, version: str | None = None) -> DemographicBenchmark:
        d = self._dir(bench.name)
        try:
            d.mkdir(parents=True, exist_ok=True)
            with FileLock(str(self.root / ".lock")):
                if version is None:
                    existing = self.list_versions(bench.name)
                    version = f"v{int(existing[-1][1:]) + 1 if existing else 1:04d}"
                elif not re.fullmatch(r"v\d+", version):
                    raise StoreError(f"invalid version identifier {version!r}")
                stored = replace(bench, version=version)
                payload = benchmark_to_dict(stored)
                payload["saved_at"] = datetime.now(timezone.utc).isoformat()
                target = d / f"{version}.json"
                fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".json")
                try:
                    with os.fdopen(fd, "w", encoding="utf-8") as fh:
                        fh.write(json.dumps(payload, indent=2, ensure_ascii=False) + "\n")
                    try:
                        os.link(tmp, target)
                    except FileExistsError:
                        raise VersionCollision(f"{bench.name}:{version} already exists") from None
                finally:
                    os.unlink(tmp)
        except OSError as exc:
            raise StoreError(f"cannot write benchmark store at {self.root}: {exc}") from exc
        return stored

    def load(self, name: str, version: str | None = None) -> DemographicBenchmark:
        versions = self.list_versions(name)
        if not versions:
            raise BenchmarkNotFound(f"no benchmark named {name!r} in {self.root}")
        if version is None:
            version = versions[-1]
        if version not in versions:
            raise BenchmarkNotFound(f"benchmark {name!r} has no version {version!r}")
        path = self._dir(name) / f"{version}.json"
        bench = load_benchmark(path.read_text(encoding="utf-8"), "structured", source=str(path))
        return replace(bench, version=version)

    def resolve(self, ref: str) -> DemographicBenchmark:
        """Load ``name`` (latest version) or ``name:version``."""
        name, _, version = ref.partition(":")
        return self.load(name, version or None)


def list_benchmarks(store: str | os.PathLike, name: str) -> list[str]:
    return BenchmarkStore(store).list_versions(name)


# --- cohorts ---------------------------------------------------------------


def load_records(
    content: str,
    schema: AttributeSchema,
    *,
    label: str | None = None,
    phase: Phase | str = Phase.TRAINING,
    source: str = "",
) -> ObservedCohort:
    """Aggregate record-level decisions into per-group counts.

    Confusion cells are filled when a label column is present:
    TP = decision 1 & label 1, FP = 1 & 0, FN = 0 & 1, TN = 0 & 0.
    Rows with a blank attribute are skipped and counted in ``rejected``.
    """
    table = _Table(content, source)
    if table.header is None:
        raise EmptyCohort("record file is empty")
    index = table.columns(schema, ("decision",), ("label", "timestamp"))
    has_label_col = "label" in index
    tallies: dict[GroupKey, list[int]] = {}
    labelled = unlabelled = rejected = 0
    stamps: list[datetime] = []
    missing_stamp = False
    for lineno, cells in table.rows:
        key = table.group(schema, index, lineno, cells)
        decision = _binary_cell(cells[index["decision"]], "decision", lineno, source)
        label_cell = cells[index["label"]] if has_label_col else ""
        label_value = _binary_cell(label_cell, "label", lineno, source) if label_cell else None
        if label_value is None:
            unlabelled += 1
        else:
            labelled += 1
        if labelled and unlabelled:
            raise MixedLabels(f"{table._where(lineno)}some records carry a label and some do not")
        if "timestamp" in index:
            text = cells[index["timestamp"]]
            if text:
                try:
                    stamps.append(parse_timestamp(text))
                except ValueError:
                    raise ParseError(f"bad timestamp {text!r}", lineno, source) from None
            else:
                missing_stamp = True
        if key is None:
            rejected += 1
            continue
        # total, positive, tp, fp, fn, tn
        t = tallies.setdefault(key, [0, 0, 0, 0, 0, 0])
        t[0] += 1
        t[1] += decision
        if label_value is not None:
            t[2 + (0 if decision and label_value else 1 if decision else 2 if label_value else 3)] += 1
    if not tallies:
        raise EmptyCohort(f"{source or 'record file'} has no usable records")
    counts = {
        k: GroupCounts(t[0], t[1], *t[2:]) if labelled else GroupCounts(t[0], t[1])
        for k, t in tallies.items()
    }
    window = table.window_bounds()
    if window is None and stamps:
        if missing_stamp:
            raise ParseError("timestamps must be present on every record or none", None, source)
        try:
            window = (min(stamps), max(stamps))
        except TypeError:
            raise ParseError("timestamps mix timezone-aware and naive values", None, source) from None
    return ObservedCohort(
        label=label or (Path(source).stem if source else "records"),
        phase=Phase(phase), schema=schema, counts=counts, window=window, rejected=rejected,
    )


def load_aggregate_audit(
    content: str,
    schema: AttributeSchema,
    *,
    label: str | None = None,
    phase: Phase | str = Phase.PRODUCTION,
    source: str = "",
) -> ObservedCohort:
    """Cohort from a per-group table ``attrs...,total,positive[,tp,fp,fn,tn]``."""
    table = _Table(content, source)
    if table.header is None:
        raise EmptyCohort("aggregate file is empty")
    index = table.columns(schema, ("total", "positive"), CONFUSION_COLUMNS)
    present = [c for c in CONFUSION_COLUMNS if c in index]
    if present and len(present) != 4:
        raise ParseError("confusion columns tp, fp, fn, tn must appear together", table.header_line, source)
    counts: dict[GroupKey, GroupCounts] = {}
    for lineno, cells in table.rows:
        key = table.group(schema, index, lineno, cells)
        if key is None:
            raise ParseError("blank attribute value", lineno, source)
        if key in counts:
            raise DuplicateGroup(f"{table._where(lineno)}group {key.label()!r} appears twice")
        values = [_int_cell(cells[index[c]], c, lineno, source) for c in ("total", "positive", *present)]
        try:
            counts[key] = GroupCounts(*values)
        except CountInconsistency as exc:
            raise CountInconsistency(f"{table._where(lineno)}{exc}") from None
        except ValidationError as exc:
            raise ParseError(str(exc), lineno, source) from None
    if not counts:
        raise EmptyCohort(f"{source or 'aggregate file'} has no rows")
    return ObservedCohort(
        label=label or (Path(source).stem if source else "aggregate"),
        phase=Phase(phase), schema=schema, counts=counts, window=table.window_bounds(),
    )


def load_cohort(
    content: str,
    schema: AttributeSchema,
    *,
    label: str | None = None,
    phase: Phase | str = Phase.PRODUCTION,
    source: str = "",
) -> ObservedCohort:
    """Dispatch on the header: a ``total`` column means aggregate, ``decision`` means records."""
    header = _Table(content, source).header
    if header is None:
        raise EmptyCohort(f"{source or 'cohort file'} is empty")
    lowered = {h.lower() for h in header}
    if "total" in lowered:
        return load_aggregate_audit(content, schema, label=label, phase=phase, source=source)
    if "decision" in lowered:
        return load_records(content, schema, label=label, phase=phase, source=source)
    raise ParseError("header has neither a 'total' nor a 'decision' column", None, source)

