"""Canonical textual encoding for domain values and journal records.

Every record is a single line: a JSON object with sorted keys and no
inter-token whitespace, so equal values always encode to identical bytes.
Parsers are strict: unknown or duplicate fields are rejected, every
declared field is required, and enum values must match exactly. The
journal on disk, the export format, and the wire payloads all share
these encoders.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Mapping, Union

from .errors import DomainError, ErrorCode
from .model import (
    AlertRecord,
    ColumnSample,
    Comparator,
    ComponentRun,
    ComponentSpec,
    Phase,
    PointerKind,
    PointerRef,
    PointerVersion,
    SlaSpec,
    StaleReasonCode,
    StalenessReason,
    StalenessVerdict,
    TriggerBinding,
    TriggerResult,
    TriggerStatus,
    format_ts,
    parse_ts,
)


def canonical_dumps(obj: object) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _reject_duplicates(pairs: list[tuple[str, Any]]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in pairs:
        if key in out:
            raise DomainError(ErrorCode.VALIDATION, f"duplicate field {key!r} in record")
        out[key] = value
    return out


def loads_strict(text: str) -> dict[str, Any]:
    try:
        parsed = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise DomainError(ErrorCode.VALIDATION, f"record is not a valid object: {exc}") from None
    if not isinstance(parsed, dict):
        raise DomainError(ErrorCode.VALIDATION, "record is not an object")
    return parsed


class _Fields:
    """Pull typed fields out of a parsed object, tracking leftovers."""

    def __init__(self, raw: Mapping[str, Any], ctx: str):
        self._d = dict(raw)
        self._ctx = ctx

    def _take(self, key: str) -> Any:
        if key not in self._d:
            raise DomainError(ErrorCode.VALIDATION, f"{self._ctx}: missing field {key!r}")
        return self._d.pop(key)

    def str_(self, key: str) -> str:
        v = self._take(key)
        if not isinstance(v, str):
            raise DomainError(ErrorCode.VALIDATION, f"{self._ctx}: field {key!r} must be a string")
        return v

    def opt_str(self, key: str) -> str | None:
        v = self._take(key)
        if v is not None and not isinstance(v, str):
            raise DomainError(ErrorCode.VALIDATION, f"{self._ctx}: field {key!r} must be a string or null")
        return v

    def int_(self, key: str) -> int:
        v = self._take(key)
        if not isinstance(v, int) or isinstance(v, bool):
            raise DomainError(ErrorCode.VALIDATION, f"{self._ctx}: field {key!r} must be an integer")
        return v

    def opt_int(self, key: str) -> int | None:
        v = self._take(key)
        if v is not None and (not isinstance(v, int) or isinstance(v, bool)):
            raise DomainError(ErrorCode.VALIDATION, f"{self._ctx}: field {key!r} must be an integer or null")
        return v

    def float_(self, key: str) -> float:
        v = self._take(key)
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise DomainError(ErrorCode.VALIDATION, f"{self._ctx}: field {key!r} must be a number")
        return float(v)

    def opt_float(self, key: str) -> float | None:
        v = self._take(key)
        if v is None:
            return None
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise DomainError(ErrorCode.VALIDATION, f"{self._ctx}: field {key!r} must be a number or null")
        return float(v)

    def bool_(self, key: str) -> bool:
        v = self._take(key)
        if not isinstance(v, bool):
            raise DomainError(ErrorCode.VALIDATION, f"{self._ctx}: field {key!r} must be a boolean")
        return v

    def ts(self, key: str) -> datetime:
        raw = self.str_(key)
        try:
            return parse_ts(raw)
        except ValueError:
            raise DomainError(ErrorCode.VALIDATION, f"{self._ctx}: field {key!r} is not a timestamp: {raw!r}") from None

    def opt_ts(self, key: str) -> datetime | None:
        v = self._take(key)
        if v is None:
            return None
        if not isinstance(v, str):
            raise DomainError(ErrorCode.VALIDATION, f"{self._ctx}: field {key!r} must be a timestamp or null")
        try:
            return parse_ts(v)
        except ValueError:
            raise DomainError(ErrorCode.VALIDATION, f"{self._ctx}: field {key!r} is not a timestamp: {v!r}") from None

    def list_(self, key: str) -> list[Any]:
        v = self._take(key)
        if not isinstance(v, list):
            raise DomainError(ErrorCode.VALIDATION, f"{self._ctx}: field {key!r} must be a list")
        return v

    def obj(self, key: str) -> dict[str, Any]:
        v = self._take(key)
        if not isinstance(v, dict):
            raise DomainError(ErrorCode.VALIDATION, f"{self._ctx}: field {key!r} must be an object")
        return v

    def enum(self, key: str, enum_cls: type) -> Any:
        raw = self.str_(key)
        try:
            return enum_cls(raw)
        except ValueError:
            raise DomainError(
                ErrorCode.VALIDATION, f"{self._ctx}: field {key!r} has unknown value {raw!r}"
            ) from None

    def done(self) -> None:
        if self._d:
            extras = ", ".join(sorted(self._d))
            raise DomainError(ErrorCode.VALIDATION, f"{self._ctx}: unknown field(s): {extras}")


# --- component specs ---


def sla_to_dict(sla: SlaSpec) -> dict[str, Any]:
    return {
        "metric_name": sla.metric_name,
        "comparator": sla.comparator.value,
        "threshold": sla.threshold,
        "window": sla.window,
    }


def sla_from_dict(raw: Mapping[str, Any]) -> SlaSpec:
    f = _Fields(raw, "sla")
    sla = SlaSpec(
        metric_name=f.str_("metric_name"),
        comparator=f.enum("comparator", Comparator),
        threshold=f.float_("threshold"),
        window=f.int_("window"),
    )
    f.done()
    return sla


def binding_to_dict(b: TriggerBinding) -> dict[str, Any]:
    return {"phase": b.phase.value, "check_name": b.check_name, "params": dict(b.params)}


def binding_from_dict(raw: Mapping[str, Any]) -> TriggerBinding:
    f = _Fields(raw, "trigger binding")
    binding = TriggerBinding(phase=f.enum("phase", Phase), check_name=f.str_("check_name"), params=f.obj("params"))
    f.done()
    return binding


def spec_to_dict(spec: ComponentSpec) -> dict[str, Any]:
    return {
        "name": spec.name,
        "description": spec.description,
        "owner": spec.owner,
        "tags": list(spec.tags),
        "trigger_bindings": [binding_to_dict(b) for b in spec.trigger_bindings],
        "sla_metrics": [sla_to_dict(s) for s in spec.sla_metrics],
    }


def spec_from_dict(raw: Mapping[str, Any]) -> ComponentSpec:
    f = _Fields(raw, "component spec")
    name = f.str_("name")
    description = f.str_("description")
    owner = f.str_("owner")
    tags = tuple(_str_items(f.list_("tags"), "component tags"))
    bindings = tuple(binding_from_dict(_obj_item(b, "trigger binding")) for b in f.list_("trigger_bindings"))
    slas = tuple(sla_from_dict(_obj_item(s, "sla")) for s in f.list_("sla_metrics"))
    f.done()
    return ComponentSpec(
        name=name, description=description, owner=owner, tags=tags, trigger_bindings=bindings, sla_metrics=slas
    )


def _str_items(items: list[Any], ctx: str) -> list[str]:
    for item in items:
        if not isinstance(item, str):
            raise DomainError(ErrorCode.VALIDATION, f"{ctx}: entries must be strings")
    return items


def _int_items(items: list[Any], ctx: str) -> list[int]:
    for item in items:
        if not isinstance(item, int) or isinstance(item, bool):
            raise DomainError(ErrorCode.VALIDATION, f"{ctx}: entries must be integers")
    return items


def _obj_item(item: Any, ctx: str) -> dict[str, Any]:
    if not isinstance(item, dict):
        raise DomainError(ErrorCode.VALIDATION, f"{ctx}: entries must be objects")
    return item


# --- pointers ---


def pointer_to_dict(pv: PointerVersion) -> dict[str, Any]:
    return {
        "name": pv.name,
        "version": pv.version,
        "producer_run_id": pv.producer_run_id,
        "created_at": format_ts(pv.created_at),
        "kind": pv.kind.value,
        "flagged": pv.flagged,
    }


def pointer_from_dict(raw: Mapping[str, Any]) -> PointerVersion:
    f = _Fields(raw, "pointer version")
    pv = PointerVersion(
        name=f.str_("name"),
        version=f.int_("version"),
        producer_run_id=f.opt_int("producer_run_id"),
        created_at=f.ts("created_at"),
        kind=f.enum("kind", PointerKind),
        flagged=f.bool_("flagged"),
    )
    f.done()
    return pv


def ref_to_dict(ref: PointerRef) -> dict[str, Any]:
    return {"name": ref.name, "version": ref.version}


def ref_from_dict(raw: Mapping[str, Any]) -> PointerRef:
    f = _Fields(raw, "pointer reference")
    ref = PointerRef(name=f.str_("name"), version=f.int_("version"))
    f.done()
    return ref


# --- runs ---


def reason_to_dict(r: StalenessReason) -> dict[str, Any]:
    return {"code": r.code.value, "pointer": r.pointer, "age_days": r.age_days, "detail": r.detail}


def reason_from_dict(raw: Mapping[str, Any]) -> StalenessReason:
    f = _Fields(raw, "staleness reason")
    reason = StalenessReason(
        code=f.enum("code", StaleReasonCode),
        pointer=f.opt_str("pointer"),
        age_days=f.opt_float("age_days"),
        detail=f.str_("detail"),
    )
    f.done()
    return reason


def verdict_to_dict(v: StalenessVerdict) -> dict[str, Any]:
    return {"stale": v.stale, "reasons": [reason_to_dict(r) for r in v.reasons]}


def verdict_from_dict(raw: Mapping[str, Any]) -> StalenessVerdict:
    f = _Fields(raw, "staleness verdict")
    stale = f.bool_("stale")
    reasons = tuple(reason_from_dict(_obj_item(r, "staleness reason")) for r in f.list_("reasons"))
    f.done()
    if stale != bool(reasons):
        raise DomainError(ErrorCode.VALIDATION, "staleness verdict flag disagrees with its reasons")
    return StalenessVerdict(reasons=reasons)


def trigger_result_to_dict(t: TriggerResult) -> dict[str, Any]:
    return {
        "check_name": t.check_name,
        "phase": t.phase.value,
        "status": t.status.value,
        "metric_value": t.metric_value,
        "detail": t.detail,
        "evaluated_at": format_ts(t.evaluated_at) if t.evaluated_at is not None else None,
    }


def trigger_result_from_dict(raw: Mapping[str, Any]) -> TriggerResult:
    f = _Fields(raw, "trigger result")
    result = TriggerResult(
        check_name=f.str_("check_name"),
        phase=f.enum("phase", Phase),
        status=f.enum("status", TriggerStatus),
        metric_value=f.opt_float("metric_value"),
        detail=f.str_("detail"),
        evaluated_at=f.opt_ts("evaluated_at"),
    )
    f.done()
    return result


def sample_to_dict(s: ColumnSample) -> dict[str, Any]:
    return {
        "column": s.column,
        "values": list(s.values),
        "captured_at": format_ts(s.captured_at) if s.captured_at is not None else None,
        "source_run_id": s.source_run_id,
        "source_pointer": s.source_pointer,
    }


def sample_from_dict(raw: Mapping[str, Any]) -> ColumnSample:
    f = _Fields(raw, "column sample")
    column = f.str_("column")
    values_raw = f.list_("values")
    values: list[float | None] = []
    for v in values_raw:
        if v is None:
            values.append(None)
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            values.append(float(v))
        else:
            raise DomainError(ErrorCode.VALIDATION, f"column sample {column!r}: values must be numbers or null")
    sample = ColumnSample(
        column=column,
        values=tuple(values),
        captured_at=f.opt_ts("captured_at"),
        source_run_id=f.opt_int("source_run_id"),
        source_pointer=f.opt_str("source_pointer"),
    )
    f.done()
    return sample


def run_to_dict(run: ComponentRun) -> dict[str, Any]:
    return {
        "run_id": run.run_id,
        "component_name": run.component_name,
        "start_time": format_ts(run.start_time),
        "end_time": format_ts(run.end_time),
        "code_version": run.code_version,
        "notes": run.notes,
        "inputs": [ref_to_dict(r) for r in run.inputs],
        "outputs": [ref_to_dict(r) for r in run.outputs],
        "dependencies": sorted(run.dependencies),
        "stale": verdict_to_dict(run.stale),
        "trigger_results": [trigger_result_to_dict(t) for t in run.trigger_results],
        "samples": [sample_to_dict(s) for s in run.samples],
        "metrics": dict(run.metrics),
    }


def run_from_dict(raw: Mapping[str, Any]) -> ComponentRun:
    f = _Fields(raw, "run")
    run_id = f.int_("run_id")
    component = f.str_("component_name")
    start = f.ts("start_time")
    end = f.ts("end_time")
    code_version = f.str_("code_version")
    notes = f.str_("notes")
    inputs = tuple(ref_from_dict(_obj_item(r, "run inputs")) for r in f.list_("inputs"))
    outputs = tuple(ref_from_dict(_obj_item(r, "run outputs")) for r in f.list_("outputs"))
    deps = frozenset(_int_items(f.list_("dependencies"), "run dependencies"))
    stale = verdict_from_dict(f.obj("stale"))
    triggers = tuple(trigger_result_from_dict(_obj_item(t, "trigger results")) for t in f.list_("trigger_results"))
    samples = tuple(sample_from_dict(_obj_item(s, "run samples")) for s in f.list_("samples"))
    metrics_raw = f.obj("metrics")
    metrics: dict[str, float] = {}
    for k, v in metrics_raw.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise DomainError(ErrorCode.VALIDATION, f"run metric {k!r} must be a number")
        metrics[k] = float(v)
    f.done()
    return ComponentRun(
        run_id=run_id,
        component_name=component,
        start_time=start,
        end_time=end,
        code_version=code_version,
        notes=notes,
        inputs=inputs,
        outputs=outputs,
        dependencies=deps,
        stale=stale,
        trigger_results=triggers,
        samples=samples,
        metrics=metrics,
    )


# --- alerts ---


def alert_to_dict(a: AlertRecord) -> dict[str, Any]:
    return {
        "component": a.component,
        "metric_name": a.metric_name,
        "run_ids": list(a.run_ids),
        "value": a.value,
        "threshold": a.threshold,
        "comparator": a.comparator.value,
        "fired_at": format_ts(a.fired_at),
    }


def alert_from_dict(raw: Mapping[str, Any]) -> AlertRecord:
    f = _Fields(raw, "alert")
    alert = AlertRecord(
        component=f.str_("component"),
        metric_name=f.str_("metric_name"),
        run_ids=tuple(_int_items(f.list_("run_ids"), "alert run_ids")),
        value=f.float_("value"),
        threshold=f.float_("threshold"),
        comparator=f.enum("comparator", Comparator),
        fired_at=f.ts("fired_at"),
    )
    f.done()
    return alert


# --- journal records ---


@dataclass(frozen=True)
class ComponentRecord:
    spec: ComponentSpec


@dataclass(frozen=True)
class RunRecord:
    run: ComponentRun
    minted: tuple[PointerVersion, ...]
    idempotency_key: str | None = None


@dataclass(frozen=True)
class FlagRecord:
    name: str
    version: int
    flagged: bool
    at: datetime


@dataclass(frozen=True)
class TriggerUpdateRecord:
    run_id: int
    result: TriggerResult


@dataclass(frozen=True)
class AlertEventRecord:
    alert: AlertRecord


@dataclass(frozen=True)
class TombstoneRecord:
    name: str
    version: int
    at: datetime


JournalRecord = Union[
    ComponentRecord, RunRecord, FlagRecord, TriggerUpdateRecord, AlertEventRecord, TombstoneRecord
]


def encode_journal_record(rec: JournalRecord) -> str:
    if isinstance(rec, ComponentRecord):
        body: dict[str, Any] = {"type": "component", "spec": spec_to_dict(rec.spec)}
    elif isinstance(rec, RunRecord):
        body = {
            "type": "run",
            "run": run_to_dict(rec.run),
            "minted": [pointer_to_dict(p) for p in rec.minted],
            "idempotency_key": rec.idempotency_key,
        }
    elif isinstance(rec, FlagRecord):
        body = {
            "type": "flag",
            "name": rec.name,
            "version": rec.version,
            "flagged": rec.flagged,
            "at": format_ts(rec.at),
        }
    elif isinstance(rec, TriggerUpdateRecord):
        body = {"type": "trigger_update", "run_id": rec.run_id, "result": trigger_result_to_dict(rec.result)}
    elif isinstance(rec, AlertEventRecord):
        body = {"type": "alert", "alert": alert_to_dict(rec.alert)}
    elif isinstance(rec, TombstoneRecord):
        body = {"type": "tombstone", "name": rec.name, "version": rec.version, "at": format_ts(rec.at)}
    else:
        raise TypeError(f"not a journal record: {rec!r}")
    return canonical_dumps(body)


def parse_journal_line(line: str) -> JournalRecord:
    raw = loads_strict(line)
    kind = raw.get("type")
    if kind == "component":
        f = _Fields(raw, "component record")
        f.str_("type")
        spec = spec_from_dict(f.obj("spec"))
        f.done()
        return ComponentRecord(spec=spec)
    if kind == "run":
        f = _Fields(raw, "run record")
        f.str_("type")
        run = run_from_dict(f.obj("run"))
        minted = tuple(pointer_from_dict(_obj_item(p, "minted pointers")) for p in f.list_("minted"))
        key = f.opt_str("idempotency_key")
        f.done()
        return RunRecord(run=run, minted=minted, idempotency_key=key)
    if kind == "flag":
        f = _Fields(raw, "flag record")
        f.str_("type")
        rec = FlagRecord(name=f.str_("name"), version=f.int_("version"), flagged=f.bool_("flagged"), at=f.ts("at"))
        f.done()
        return rec
    if kind == "trigger_update":
        f = _Fields(raw, "trigger update record")
        f.str_("type")
        rec2 = TriggerUpdateRecord(run_id=f.int_("run_id"), result=trigger_result_from_dict(f.obj("result")))
        f.done()
        return rec2
    if kind == "alert":
        f = _Fields(raw, "alert record")
        f.str_("type")
        rec3 = AlertEventRecord(alert=alert_from_dict(f.obj("alert")))
        f.done()
        return rec3
    if kind == "tombstone":
        f = _Fields(raw, "tombstone record")
        f.str_("type")
        rec4 = TombstoneRecord(name=f.str_("name"), version=f.int_("version"), at=f.ts("at"))
        f.done()
        return rec4
    raise DomainError(ErrorCode.VALIDATION, f"unknown record type {kind!r}")
