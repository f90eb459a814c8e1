"""Domain types, identity rules, and run-submission validation.

Everything here is an immutable value after validation; mutation happens
only inside store transactions. Pointer identity is the raw name string,
case-sensitive, with no path normalization: normalizing would silently
merge distinct artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Iterable, Mapping

from .errors import ErrorCode, RunValidationError

TS_FORMAT = "%Y-%m-%dT%H:%M:%S.%fZ"

# Client clocks may be skewed; timestamps further in the future than this
# are clamped to the server receive time (noted on the run).
CLOCK_SKEW_LIMIT = timedelta(minutes=5)


def format_ts(ts: datetime) -> str:
    """Render a UTC timestamp at microsecond precision, fixed width."""
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).strftime(TS_FORMAT)


def parse_ts(raw: str) -> datetime:
    return datetime.strptime(raw, TS_FORMAT).replace(tzinfo=timezone.utc)


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


class PointerKind(str, Enum):
    MODEL = "model"
    DATA = "data"
    ENDPOINT = "endpoint"
    UNKNOWN = "unknown"


_MODEL_EXTENSIONS = {".joblib", ".pt", ".onnx", ".pkl"}
_DATA_EXTENSIONS = {".csv", ".parquet", ".jsonl"}


def infer_kind(name: str) -> PointerKind:
    """Classify a pointer name by URL scheme or file extension.

    Pure function of the name string; unmatched names are ``unknown``.
    """
    if name.startswith("http://") or name.startswith("https://"):
        return PointerKind.ENDPOINT
    dot = name.rfind(".")
    if dot <= 0:
        return PointerKind.UNKNOWN
    ext = name[dot:]
    if ext in _MODEL_EXTENSIONS:
        return PointerKind.MODEL
    if ext in _DATA_EXTENSIONS:
        return PointerKind.DATA
    return PointerKind.UNKNOWN


class Phase(str, Enum):
    BEFORE = "before"
    AFTER = "after"


class TriggerStatus(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    ERROR = "ERROR"
    PENDING = "PENDING"


class StaleReasonCode(str, Enum):
    AGED_DEPENDENCY = "AGED_DEPENDENCY"
    NOT_FRESHEST = "NOT_FRESHEST"
    FAILED_TEST = "FAILED_TEST"


class Comparator(str, Enum):
    GE = ">="
    LE = "<="


@dataclass(frozen=True)
class SlaSpec:
    """A business-level metric target: windowed mean compared to a threshold."""

    metric_name: str
    comparator: Comparator
    threshold: float
    window: int = 1

    def validate(self) -> list[str]:
        problems = []
        if not self.metric_name:
            problems.append("sla metric_name is empty")
        if self.window < 1:
            problems.append(f"sla window must be >= 1, got {self.window}")
        if not _is_finite(self.threshold):
            problems.append(f"sla threshold must be finite, got {self.threshold}")
        return problems


@dataclass(frozen=True)
class TriggerBinding:
    """One declared check: phase, registered check name, and parameters."""

    phase: Phase
    check_name: str
    params: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class ComponentSpec:
    """Static registration of a pipeline stage."""

    name: str
    description: str = ""
    owner: str = ""
    tags: tuple[str, ...] = ()
    trigger_bindings: tuple[TriggerBinding, ...] = ()
    sla_metrics: tuple[SlaSpec, ...] = ()

    def validate(self) -> list[str]:
        problems = []
        if not self.name or not self.name.strip():
            problems.append("component name is empty")
        if len(set(self.tags)) != len(self.tags):
            problems.append("tags contain duplicates")
        for sla in self.sla_metrics:
            problems.extend(sla.validate())
        return problems


@dataclass(frozen=True)
class PointerVersion:
    """One concrete write of a named artifact identifier.

    ``producer_run_id`` is None for source data that first appeared as an
    input with no eligible producer.
    """

    name: str
    version: int
    producer_run_id: int | None
    created_at: datetime
    kind: PointerKind = PointerKind.UNKNOWN
    flagged: bool = False


@dataclass(frozen=True)
class PointerRef:
    """A (name, version) pair identifying one PointerVersion."""

    name: str
    version: int


@dataclass(frozen=True)
class StalenessReason:
    code: StaleReasonCode
    pointer: str | None = None
    age_days: float | None = None
    detail: str = ""


@dataclass(frozen=True)
class StalenessVerdict:
    reasons: tuple[StalenessReason, ...] = ()

    @property
    def stale(self) -> bool:
        return bool(self.reasons)


@dataclass(frozen=True)
class TriggerResult:
    check_name: str
    phase: Phase
    status: TriggerStatus
    metric_value: float | None = None
    detail: str = ""
    evaluated_at: datetime | None = None


@dataclass(frozen=True)
class ColumnSample:
    """Captured values for one column, with None as the missing marker."""

    column: str
    values: tuple[float | None, ...]
    captured_at: datetime | None = None
    source_run_id: int | None = None
    source_pointer: str | None = None

    def numeric_values(self) -> list[float]:
        return [v for v in self.values if v is not None]

    def missing_count(self) -> int:
        return sum(1 for v in self.values if v is None)


@dataclass(frozen=True)
class AlertRecord:
    """Fired when a windowed SLA aggregate violates its threshold."""

    component: str
    metric_name: str
    run_ids: tuple[int, ...]
    value: float
    threshold: float
    comparator: Comparator
    fired_at: datetime


@dataclass(frozen=True)
class ComponentRun:
    """One committed execution of a component."""

    run_id: int
    component_name: str
    start_time: datetime
    end_time: datetime
    code_version: str = ""
    notes: str = ""
    inputs: tuple[PointerRef, ...] = ()
    outputs: tuple[PointerRef, ...] = ()
    dependencies: frozenset[int] = frozenset()
    stale: StalenessVerdict = StalenessVerdict()
    trigger_results: tuple[TriggerResult, ...] = ()
    samples: tuple[ColumnSample, ...] = ()
    metrics: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class InputDecl:
    """A declared input: bare name (latest rule) or pinned to a version."""

    name: str
    pinned_version: int | None = None


@dataclass(frozen=True)
class OutputDecl:
    name: str
    kind: PointerKind


@dataclass(frozen=True)
class NormalizedRun:
    """A run submission after validation: trimmed names, inferred kinds."""

    component_name: str
    start_time: datetime
    end_time: datetime
    code_version: str
    notes: str
    inputs: tuple[InputDecl, ...]
    outputs: tuple[OutputDecl, ...]
    samples: tuple[ColumnSample, ...]
    metrics: Mapping[str, float]
    idempotency_key: str | None = None


def _is_finite(x: object) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and x == x and abs(x) != float("inf")


def _coerce_ts(value: object, field_name: str, problems: list[tuple[ErrorCode, str]]) -> datetime | None:
    if isinstance(value, datetime):
        if value.tzinfo is None:
            return value.replace(tzinfo=timezone.utc)
        return value.astimezone(timezone.utc)
    if isinstance(value, str):
        try:
            return parse_ts(value)
        except ValueError:
            problems.append((ErrorCode.VALIDATION, f"{field_name} is not a valid timestamp: {value!r}"))
            return None
    problems.append((ErrorCode.VALIDATION, f"{field_name} is missing or not a timestamp"))
    return None


def _coerce_inputs(raw: object, problems: list[tuple[ErrorCode, str]]) -> list[InputDecl]:
    decls: list[InputDecl] = []
    seen: set[tuple[str, int | None]] = set()
    if raw is None:
        return decls
    if not isinstance(raw, (list, tuple)):
        problems.append((ErrorCode.VALIDATION, "inputs must be a list"))
        return decls
    for item in raw:
        if isinstance(item, str):
            name, pin = item.strip(), None
        elif isinstance(item, Mapping) and isinstance(item.get("name"), str):
            name = item["name"].strip()
            pin = item.get("version")
            if pin is not None and (not isinstance(pin, int) or isinstance(pin, bool) or pin < 1):
                problems.append((ErrorCode.VALIDATION, f"pinned version for input {name!r} must be a positive integer"))
                continue
        else:
            problems.append((ErrorCode.VALIDATION, f"input entry is not a name or name/version object: {item!r}"))
            continue
        if not name:
            problems.append((ErrorCode.VALIDATION, "input name is empty"))
            continue
        if (name, pin) not in seen:
            seen.add((name, pin))
            decls.append(InputDecl(name=name, pinned_version=pin))
    return decls


def _coerce_outputs(raw: object, problems: list[tuple[ErrorCode, str]]) -> list[OutputDecl]:
    decls: list[OutputDecl] = []
    seen: set[str] = set()
    if raw is None:
        return decls
    if not isinstance(raw, (list, tuple)):
        problems.append((ErrorCode.VALIDATION, "outputs must be a list"))
        return decls
    for item in raw:
        kind: PointerKind | None = None
        if isinstance(item, str):
            name = item.strip()
        elif isinstance(item, Mapping) and isinstance(item.get("name"), str):
            name = item["name"].strip()
            if "kind" in item and item["kind"] is not None:
                try:
                    kind = PointerKind(item["kind"])
                except ValueError:
                    problems.append((ErrorCode.VALIDATION, f"unknown pointer kind {item['kind']!r} for output {name!r}"))
                    continue
        else:
            problems.append((ErrorCode.VALIDATION, f"output entry is not a name or name/kind object: {item!r}"))
            continue
        if not name:
            problems.append((ErrorCode.VALIDATION, "output name is empty"))
            continue
        if name not in seen:
            seen.add(name)
            decls.append(OutputDecl(name=name, kind=kind if kind is not None else infer_kind(name)))
    return decls


def _coerce_samples(
    raw: object, default_ts: datetime | None, problems: list[tuple[ErrorCode, str]]
) -> list[ColumnSample]:
    samples: list[ColumnSample] = []
    if raw is None:
        return samples
    if not isinstance(raw, (list, tuple)):
        problems.append((ErrorCode.VALIDATION, "samples must be a list"))
        return samples
    for item in raw:
        if not isinstance(item, Mapping) or not isinstance(item.get("column"), str):
            problems.append((ErrorCode.VALIDATION, f"sample entry needs a column name: {item!r}"))
            continue
        column = item["column"].strip()
        values_raw = item.get("values", [])
        if not isinstance(values_raw, (list, tuple)):
            problems.append((ErrorCode.VALIDATION, f"sample values for {column!r} must be a list"))
            continue
        values: list[float | None] = []
        ok = True
        for v in values_raw:
            if v is None:
                values.append(None)
            elif isinstance(v, (int, float)) and not isinstance(v, bool):
                values.append(float(v))
            else:
                problems.append((ErrorCode.VALIDATION, f"sample value for {column!r} is not numeric or null: {v!r}"))
                ok = False
                break
        if not ok:
            continue
        captured = item.get("captured_at")
        captured_ts = _coerce_ts(captured, f"sample {column!r} captured_at", problems) if captured else default_ts
        pointer = item.get("pointer")
        if pointer is not None and not isinstance(pointer, str):
            problems.append((ErrorCode.VALIDATION, f"sample pointer for {column!r} must be a string"))
            continue
        samples.append(
            ColumnSample(column=column, values=tuple(values), captured_at=captured_ts, source_pointer=pointer)
        )
    return samples


def validate_run_record(
    record: Mapping[str, object],
    known_components: Iterable[str],
    received_at: datetime | None = None,
) -> NormalizedRun:
    """Validate and canonicalize a raw run submission.

    Returns the normalized record, or raises RunValidationError carrying
    the complete list of violations — never a partial mix of the two.
    """
    problems: list[tuple[ErrorCode, str]] = []
    received_at = received_at or utcnow()

    component = record.get("component", record.get("component_name"))
    if not isinstance(component, str) or not component.strip():
        problems.append((ErrorCode.VALIDATION, "component name is missing"))
        component = ""
    else:
        component = component.strip()
        if component not in set(known_components):
            problems.append((ErrorCode.UNKNOWN_COMPONENT, f"component {component!r} is not registered"))

    start = _coerce_ts(record.get("start_time"), "start_time", problems)
    end = _coerce_ts(record.get("end_time"), "end_time", problems)

    notes = record.get("notes", "")
    if not isinstance(notes, str):
        problems.append((ErrorCode.VALIDATION, "notes must be a string"))
        notes = ""
    code_version = record.get("code_version", "")
    if not isinstance(code_version, str):
        problems.append((ErrorCode.VALIDATION, "code_version must be a string"))
        code_version = ""

    if start is not None and start - received_at > CLOCK_SKEW_LIMIT:
        notes = _append_note(notes, f"start_time clamped from {format_ts(start)} to server receive time")
        start = received_at
    if end is not None and end - received_at > CLOCK_SKEW_LIMIT:
        notes = _append_note(notes, f"end_time clamped from {format_ts(end)} to server receive time")
        end = received_at
    if start is not None and end is not None and start > end:
        problems.append(
            (ErrorCode.TIME_INVERSION, f"start_time {format_ts(start)} is after end_time {format_ts(end)}")
        )

    inputs = _coerce_inputs(record.get("inputs"), problems)
    outputs = _coerce_outputs(record.get("outputs"), problems)
    if not inputs and not outputs:
        problems.append((ErrorCode.EMPTY_OUTPUT_AND_INPUT, "run declares neither inputs nor outputs"))

    overlap = {d.name for d in inputs} & {d.name for d in outputs}
    for name in sorted(overlap):
        problems.append((ErrorCode.IO_OVERLAP, f"{name!r} appears as both input and output of one run"))

    samples = _coerce_samples(record.get("samples"), end, problems)

    metrics_raw = record.get("metrics", {})
    metrics: dict[str, float] = {}
    if not isinstance(metrics_raw, Mapping):
        problems.append((ErrorCode.VALIDATION, "metrics must be a mapping of name to value"))
    else:
        for k, v in metrics_raw.items():
            if not isinstance(k, str) or not _is_finite(v):
                problems.append((ErrorCode.VALIDATION, f"metric {k!r} must map a string name to a finite number"))
            else:
                metrics[k] = float(v)

    key = record.get("idempotency_key")
    if key is not None and not isinstance(key, str):
        problems.append((ErrorCode.VALIDATION, "idempotency_key must be a string"))
        key = None

    if problems:
        raise RunValidationError(problems)
    assert start is not None and end is not None
    return NormalizedRun(
        component_name=component,
        start_time=start,
        end_time=end,
        code_version=code_version,
        notes=notes,
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        samples=tuple(samples),
        metrics=metrics,
        idempotency_key=key,
    )


def _append_note(notes: str, extra: str) -> str:
    return f"{notes} [{extra}]" if notes else f"[{extra}]"
