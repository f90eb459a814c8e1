"""Durable append-only store of components, runs, pointer versions, and flags.

One journal file of line records is the source of truth; every index is
rebuilt from it on open. A run is committed the moment its record is
fsynced, so after a crash each run is either fully visible or fully
absent. Ingest is serialized under one lock (the commit order defines
run_id); readers take cheap immutable snapshots and never block writers
for longer than a dict copy.
"""

from __future__ import annotations

import os
import threading
from concurrent.futures import Future, ThreadPoolExecutor, wait
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Callable, Collection, Mapping, Sequence

from .checks import DeferredCheck, HistoryWindow, evaluate_sla, run_phase, validate_bindings
from .errors import DomainError, ErrorCode, RunValidationError
from .model import (
    AlertRecord,
    ComponentRun,
    ComponentSpec,
    Phase,
    PointerKind,
    PointerRef,
    PointerVersion,
    StaleReasonCode,
    StalenessReason,
    StalenessVerdict,
    TriggerResult,
    TriggerStatus,
    infer_kind,
    utcnow,
    validate_run_record,
)
from .records import (
    AlertEventRecord,
    ComponentRecord,
    FlagRecord,
    JournalRecord,
    RunRecord,
    TombstoneRecord,
    TriggerUpdateRecord,
    canonical_dumps,
    encode_journal_record,
    loads_strict,
    parse_journal_line,
)

JOURNAL_NAME = "journal.ndjson"
CONFIG_NAME = "config.json"
INDEX_NAME = "indexes.json"

_MICROSECOND = timedelta(microseconds=1)
_SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class StoreConfig:
    """Per-store defaults; persisted as config.json in the data directory."""

    threshold_days: int = 30
    history_window: int = 5
    d_threshold: float = 0.1

    def to_dict(self) -> dict[str, object]:
        return {
            "threshold_days": self.threshold_days,
            "history_window": self.history_window,
            "d_threshold": self.d_threshold,
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, object]) -> "StoreConfig":
        data = dict(raw)
        threshold = data.pop("threshold_days", 30)
        window = data.pop("history_window", 5)
        d_threshold = data.pop("d_threshold", 0.1)
        if data:
            raise DomainError(ErrorCode.VALIDATION, f"config has unknown field(s): {', '.join(sorted(data))}")
        if not isinstance(threshold, int) or isinstance(threshold, bool) or threshold < 0:
            raise DomainError(ErrorCode.VALIDATION, "config threshold_days must be a non-negative integer")
        if not isinstance(window, int) or isinstance(window, bool) or window < 1:
            raise DomainError(ErrorCode.VALIDATION, "config history_window must be a positive integer")
        if isinstance(d_threshold, bool) or not isinstance(d_threshold, (int, float)):
            raise DomainError(ErrorCode.VALIDATION, "config d_threshold must be a number")
        return cls(threshold_days=threshold, history_window=window, d_threshold=float(d_threshold))


def choose_version(
    versions: Sequence[PointerVersion],
    start_time: datetime,
    excluded: Collection[tuple[str, int]] = (),
) -> PointerVersion | None:
    """Latest-producer rule: greatest created_at not after start_time.

    Ties on created_at go to the highest version number, so the result is
    deterministic under coarse clocks.
    """
    best: PointerVersion | None = None
    for pv in versions:
        if pv.created_at > start_time or (pv.name, pv.version) in excluded:
            continue
        if best is None or (pv.created_at, pv.version) > (best.created_at, best.version):
            best = pv
    return best


def staleness_verdict(
    consumed: Sequence[PointerVersion],
    versions_by_name: Mapping[str, Sequence[PointerVersion]],
    excluded: Collection[tuple[str, int]],
    start_time: datetime,
    trigger_results: Sequence[TriggerResult],
    threshold_days: float,
) -> StalenessVerdict:
    """Age, freshness, and before-phase test verdicts for one run.

    Ages anchor to the run's own start time, so a verdict never changes
    as wall-clock time passes.
    """
    reasons: list[StalenessReason] = []
    for pv in consumed:
        age_days = (start_time - pv.created_at).total_seconds() / _SECONDS_PER_DAY
        if age_days > threshold_days:
            reasons.append(
                StalenessReason(
                    code=StaleReasonCode.AGED_DEPENDENCY,
                    pointer=pv.name,
                    age_days=age_days,
                    detail=f"v{pv.version} was {age_days:.1f} days old at run start (limit {threshold_days:g})",
                )
            )
    for pv in consumed:
        newest = choose_version(versions_by_name.get(pv.name, ()), start_time, excluded)
        if newest is not None and newest.version > pv.version:
            reasons.append(
                StalenessReason(
                    code=StaleReasonCode.NOT_FRESHEST,
                    pointer=pv.name,
                    detail=f"consumed v{pv.version} while v{newest.version} existed at run start",
                )
            )
    failed = [t.check_name for t in trigger_results if t.phase is Phase.BEFORE and t.status is TriggerStatus.FAIL]
    if failed:
        reasons.append(
            StalenessReason(code=StaleReasonCode.FAILED_TEST, detail="failed before-run check(s): " + ", ".join(failed))
        )
    return StalenessVerdict(reasons=tuple(reasons))


@dataclass(frozen=True)
class StoreSnapshot:
    """Immutable view of committed state, consistent as of one instant."""

    specs: Mapping[str, ComponentSpec]
    runs: Mapping[int, ComponentRun]
    pointers: Mapping[str, tuple[PointerVersion, ...]]
    runs_by_component: Mapping[str, tuple[int, ...]]
    flags: frozenset[tuple[str, int]]
    deleted: frozenset[tuple[str, int]]
    alerts: tuple[AlertRecord, ...]
    journal_pos: int


@dataclass(frozen=True)
class FsckReport:
    path: str
    records: int
    components: int
    runs: int
    pointer_versions: int
    flagged: int
    alerts: int
    truncated_bytes: int
    divergences: tuple[str, ...]

    @property
    def clean(self) -> bool:
        return not self.divergences and self.truncated_bytes == 0


class Store:
    """A lineage store bound to one data directory."""

    def __init__(
        self,
        directory: str | Path,
        *,
        config: StoreConfig | None = None,
        clock: Callable[[], datetime] | None = None,
        durable: bool = True,
        async_workers: int = 4,
    ):
        self.directory = Path(directory)
        self._clock = clock or utcnow
        self._durable = durable
        self._async_workers = async_workers
        self._lock = threading.RLock()
        self._pool: ThreadPoolExecutor | None = None
        self._pending: set[Future] = set()
        self._closed = False

        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise DomainError(ErrorCode.STORE_IO, f"cannot create store directory: {exc}") from exc

        config_path = self.directory / CONFIG_NAME
        if config is not None:
            self.config = config
            self._write_config(config_path)
        elif config_path.exists():
            try:
                self.config = StoreConfig.from_dict(loads_strict(config_path.read_text("utf-8")))
            except OSError as exc:
                raise DomainError(ErrorCode.STORE_IO, f"cannot read config: {exc}") from exc
        else:
            self.config = StoreConfig()
            self._write_config(config_path)

        self._reset_state()
        self._journal_path = self.directory / JOURNAL_NAME
        self.recovered_bytes = self._replay_journal()
        try:
            self._fh = open(self._journal_path, "ab")
        except OSError as exc:
            raise DomainError(ErrorCode.STORE_IO, f"cannot open journal: {exc}") from exc

    # --- lifecycle ---

    def _write_config(self, path: Path) -> None:
        try:
            path.write_text(canonical_dumps(self.config.to_dict()) + "\n", "utf-8")
        except OSError as exc:
            raise DomainError(ErrorCode.STORE_IO, f"cannot write config: {exc}") from exc

    def _reset_state(self) -> None:
        self._specs: dict[str, ComponentSpec] = {}
        self._runs: dict[int, ComponentRun] = {}
        self._runs_by_component: dict[str, list[int]] = {}
        self._pointers: dict[str, list[PointerVersion]] = {}
        self._flags: set[tuple[str, int]] = set()
        self._deleted: set[tuple[str, int]] = set()
        self._idempotency: dict[str, int] = {}
        self._alerts: list[AlertRecord] = []
        self._streams: dict[tuple[str, str], list[tuple[int, float]]] = {}
        self._next_run_id = 1
        self._journal_pos = 0

    def _replay_journal(self) -> int:
        """Rebuild all indexes from the journal; heal a torn final line."""
        if not self._journal_path.exists():
            return 0
        try:
            data = self._journal_path.read_bytes()
        except OSError as exc:
            raise DomainError(ErrorCode.STORE_IO, f"cannot read journal: {exc}") from exc
        torn = 0
        if data and not data.endswith(b"\n"):
            keep = data.rfind(b"\n") + 1
            torn = len(data) - keep
            data = data[:keep]
            try:
                with open(self._journal_path, "r+b") as fh:
                    fh.truncate(keep)
            except OSError as exc:
                raise DomainError(ErrorCode.STORE_IO, f"cannot truncate torn journal tail: {exc}") from exc
        for line_no, line in enumerate(data.split(b"\n")[:-1], start=1):
            try:
                record = parse_journal_line(line.decode("utf-8"))
                self._apply_record(record)
            except (DomainError, UnicodeDecodeError) as exc:
                message = exc.message if isinstance(exc, DomainError) else str(exc)
                raise DomainError(ErrorCode.STORE_IO, f"journal corrupt at record {line_no}: {message}") from None
        self._journal_pos = len(data)
        return torn

    def close(self) -> None:
        if self._closed:
            return
        self.drain_async()
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None
        with self._lock:
            self._write_index_snapshot()
            self._fh.close()
            self._closed = True

    def __enter__(self) -> "Store":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()

    # --- journal application (replay and import share this path) ---

    def _apply_record(self, record: JournalRecord) -> None:
        if isinstance(record, ComponentRecord):
            self._specs[record.spec.name] = record.spec
            self._runs_by_component.setdefault(record.spec.name, [])
            return
        if isinstance(record, RunRecord):
            run = record.run
            if run.run_id != self._next_run_id:
                raise DomainError(
                    ErrorCode.VALIDATION, f"run id {run.run_id} out of order (expected {self._next_run_id})"
                )
            if run.component_name not in self._specs:
                raise DomainError(ErrorCode.VALIDATION, f"run references unregistered component {run.component_name!r}")
            for pv in record.minted:
                existing = self._pointers.setdefault(pv.name, [])
                if pv.version != len(existing) + 1:
                    raise DomainError(
                        ErrorCode.VALIDATION,
                        f"pointer {pv.name!r} version {pv.version} breaks contiguity (have {len(existing)})",
                    )
                if existing and existing[-1].created_at >= pv.created_at:
                    raise DomainError(
                        ErrorCode.VALIDATION, f"pointer {pv.name!r} version {pv.version} breaks created_at monotonicity"
                    )
                existing.append(pv)
                if pv.flagged:
                    self._flags.add((pv.name, pv.version))
            self._runs[run.run_id] = run
            self._runs_by_component.setdefault(run.component_name, []).append(run.run_id)
            self._next_run_id = run.run_id + 1
            if record.idempotency_key is not None:
                self._idempotency[record.idempotency_key] = run.run_id
            for metric, value in run.metrics.items():
                self._streams.setdefault((run.component_name, metric), []).append((run.run_id, value))
            return
        if isinstance(record, FlagRecord):
            pv = self._lookup_pointer(record.name, record.version)
            if pv is None:
                raise DomainError(ErrorCode.VALIDATION, f"flag references unknown pointer {record.name!r} v{record.version}")
            self._pointers[record.name][record.version - 1] = replace(pv, flagged=record.flagged)
            if record.flagged:
                self._flags.add((record.name, record.version))
            else:
                self._flags.discard((record.name, record.version))
            return
        if isinstance(record, TriggerUpdateRecord):
            run = self._runs.get(record.run_id)
            if run is None:
                raise DomainError(ErrorCode.VALIDATION, f"trigger update references unknown run {record.run_id}")
            results = list(run.trigger_results)
            for idx, existing_result in enumerate(results):
                if (
                    existing_result.check_name == record.result.check_name
                    and existing_result.phase is record.result.phase
                    and existing_result.status is TriggerStatus.PENDING
                ):
                    results[idx] = record.result
                    break
            else:
                raise DomainError(
                    ErrorCode.VALIDATION,
                    f"trigger update for run {record.run_id} matches no pending {record.result.check_name!r} result",
                )
            self._runs[record.run_id] = replace(run, trigger_results=tuple(results))
            return
        if isinstance(record, AlertEventRecord):
            self._alerts.append(record.alert)
            return
        if isinstance(record, TombstoneRecord):
            if self._lookup_pointer(record.name, record.version) is None:
                raise DomainError(
                    ErrorCode.VALIDATION, f"tombstone references unknown pointer {record.name!r} v{record.version}"
                )
            self._deleted.add((record.name, record.version))
            return
        raise DomainError(ErrorCode.VALIDATION, f"unhandled record type {type(record).__name__}")

    def _append_records(self, records: Sequence[JournalRecord]) -> None:
        payload = b"".join(encode_journal_record(r).encode("utf-8") + b"\n" for r in records)
        try:
            self._fh.write(payload)
            self._fh.flush()
            if self._durable:
                os.fsync(self._fh.fileno())
        except OSError as exc:
            raise DomainError(ErrorCode.STORE_IO, f"journal write failed: {exc}") from exc
        self._journal_pos += len(payload)

    # --- registration ---

    def register_component(self, spec: ComponentSpec) -> str:
        problems = [(ErrorCode.INVALID_SPEC, p) for p in spec.validate()]
        problems.extend(validate_bindings(spec))
        if problems:
            raise DomainError(problems[0][0], "; ".join(msg for _, msg in problems))
        with self._lock:
            self._append_records([ComponentRecord(spec=spec)])
            self._specs[spec.name] = spec
            self._runs_by_component.setdefault(spec.name, [])
        return spec.name

    # --- ingest ---

    def log_component_run(self, record: Mapping[str, object]) -> tuple[ComponentRun, bool]:
        """Validate, resolve, check, and durably commit one run.

        Returns (run, created); created is False when an idempotency key
        replays an earlier commit.
        """
        with self._lock:
            received = self._clock()
            normalized = validate_run_record(record, self._specs, received)
            key = normalized.idempotency_key
            if key is not None and key in self._idempotency:
                return self._runs[self._idempotency[key]], False

            spec = self._specs[normalized.component_name]
            samples = {s.column: s for s in normalized.samples}
            history = self._history_window(normalized.component_name)
            before_results, before_deferred = run_phase(
                Phase.BEFORE, spec, samples, history,
                d_threshold_default=self.config.d_threshold, now_fn=self._clock,
            )

            minted: list[PointerVersion] = []
            consumed: list[PointerVersion] = []
            for decl in normalized.inputs:
                versions = self._pointers.get(decl.name, [])
                if decl.pinned_version is not None:
                    if decl.pinned_version > len(versions) or (decl.name, decl.pinned_version) in self._deleted:
                        raise RunValidationError(
                            [(ErrorCode.UNKNOWN_POINTER, f"pinned input {decl.name!r} v{decl.pinned_version} does not exist")]
                        )
                    pv = versions[decl.pinned_version - 1]
                else:
                    found = choose_version(versions, normalized.start_time, self._deleted)
                    pv = found if found is not None else self._mint(
                        decl.name, producer=None, at=normalized.start_time, kind=infer_kind(decl.name), minted=minted
                    )
                consumed.append(pv)
            deduped: list[PointerVersion] = []
            seen_refs: set[tuple[str, int]] = set()
            for pv in consumed:
                if (pv.name, pv.version) not in seen_refs:
                    seen_refs.add((pv.name, pv.version))
                    deduped.append(pv)
            consumed = deduped
            dependencies = frozenset(pv.producer_run_id for pv in consumed if pv.producer_run_id is not None)

            run_id = self._next_run_id
            produced = [
                self._mint(decl.name, producer=run_id, at=normalized.end_time, kind=decl.kind, minted=minted)
                for decl in normalized.outputs
            ]

            after_results, after_deferred = run_phase(
                Phase.AFTER, spec, samples, history,
                d_threshold_default=self.config.d_threshold, now_fn=self._clock,
            )
            trigger_results = tuple(before_results) + tuple(after_results)

            overlay: dict[str, list[PointerVersion]] = {}
            for pv in minted:
                merged = overlay.get(pv.name)
                if merged is None:
                    overlay[pv.name] = merged = list(self._pointers.get(pv.name, []))
                merged.append(pv)
            versions_view: Mapping[str, Sequence[PointerVersion]] = {**self._pointers, **overlay}
            verdict = staleness_verdict(
                consumed, versions_view, self._deleted, normalized.start_time, trigger_results, self.config.threshold_days
            )

            run = ComponentRun(
                run_id=run_id,
                component_name=normalized.component_name,
                start_time=normalized.start_time,
                end_time=normalized.end_time,
                code_version=normalized.code_version,
                notes=normalized.notes,
                inputs=tuple(PointerRef(pv.name, pv.version) for pv in consumed),
                outputs=tuple(PointerRef(pv.name, pv.version) for pv in produced),
                dependencies=dependencies,
                stale=verdict,
                trigger_results=trigger_results,
                samples=tuple(replace(s, source_run_id=run_id) for s in normalized.samples),
                metrics=dict(normalized.metrics),
            )

            alerts: list[AlertRecord] = []
            fired_at = self._clock()
            for sla in spec.sla_metrics:
                if sla.metric_name in run.metrics:
                    stream = list(self._streams.get((spec.name, sla.metric_name), ()))
                    stream.append((run_id, run.metrics[sla.metric_name]))
                    alert = evaluate_sla(sla, stream, spec.name, fired_at)
                    if alert is not None:
                        alerts.append(alert)

            journal_records: list[JournalRecord] = [RunRecord(run=run, minted=tuple(minted), idempotency_key=key)]
            journal_records.extend(AlertEventRecord(alert=a) for a in alerts)
            self._append_records(journal_records)

            for pv in minted:
                self._pointers.setdefault(pv.name, []).append(pv)
            self._runs[run_id] = run
            self._runs_by_component.setdefault(run.component_name, []).append(run_id)
            self._next_run_id = run_id + 1
            if key is not None:
                self._idempotency[key] = run_id
            for metric, value in run.metrics.items():
                self._streams.setdefault((run.component_name, metric), []).append((run_id, value))
            self._alerts.extend(alerts)

            for deferred in before_deferred + after_deferred:
                self._submit_deferred(run_id, deferred)
            return run, True

    def _mint(
        self,
        name: str,
        producer: int | None,
        at: datetime,
        kind: PointerKind,
        minted: list[PointerVersion],
    ) -> PointerVersion:
        # created_at clamps to one microsecond past the previous version so
        # versions stay strictly increasing even under out-of-order clocks.
        versions = self._pointers.get(name, [])
        created = at
        if versions and versions[-1].created_at >= created:
            created = versions[-1].created_at + _MICROSECOND
        pv = PointerVersion(
            name=name,
            version=len(versions) + 1,
            producer_run_id=producer,
            created_at=created,
            kind=kind,
            flagged=False,
        )
        minted.append(pv)
        return pv

    def _history_window(self, component: str) -> HistoryWindow:
        ids = self._runs_by_component.get(component, [])[-self.config.history_window :]
        columns: dict[str, list[float]] = {}
        for run_id in ids:
            for sample in self._runs[run_id].samples:
                columns.setdefault(sample.column, []).extend(sample.numeric_values())
        return HistoryWindow(run_ids=tuple(ids), columns={c: tuple(v) for c, v in columns.items()})

    # --- resolution and staleness (public, recomputable forms) ---

    def resolve_dependencies(
        self, input_names: Sequence[str], start_time: datetime
    ) -> tuple[frozenset[int], tuple[PointerVersion, ...]]:
        """Pick the consumed version for each name per the latest rule.

        Names with no eligible version are omitted; the caller mints
        source pointers for those.
        """
        with self._lock:
            chosen: list[PointerVersion] = []
            for name in input_names:
                pv = choose_version(self._pointers.get(name, ()), start_time, self._deleted)
                if pv is not None:
                    chosen.append(pv)
            deps = frozenset(pv.producer_run_id for pv in chosen if pv.producer_run_id is not None)
            return deps, tuple(chosen)

    def compute_staleness(
        self, run: ComponentRun, now: datetime | None = None, threshold_days: int | None = None
    ) -> StalenessVerdict:
        """Recompute the verdict for a committed run from current indexes.

        Ages anchor to run.start_time, so the verdict does not drift with
        `now`; the parameter is accepted for callers that thread a clock.
        """
        del now
        threshold = self.config.threshold_days if threshold_days is None else threshold_days
        with self._lock:
            consumed = [self._require_pointer(ref.name, ref.version, allow_deleted=True) for ref in run.inputs]
            return staleness_verdict(
                consumed, self._pointers, self._deleted, run.start_time, run.trigger_results, threshold
            )

    # --- flags and tombstones ---

    def set_flag(self, name: str, version: int) -> PointerVersion:
        return self._write_flag(name, version, True)

    def clear_flag(self, name: str, version: int) -> PointerVersion:
        return self._write_flag(name, version, False)

    def _write_flag(self, name: str, version: int, flagged: bool) -> PointerVersion:
        with self._lock:
            pv = self._require_pointer(name, version)
            if pv.flagged == flagged:
                return pv
            self._append_records([FlagRecord(name=name, version=version, flagged=flagged, at=self._clock())])
            updated = replace(pv, flagged=flagged)
            self._pointers[name][version - 1] = updated
            if flagged:
                self._flags.add((name, version))
            else:
                self._flags.discard((name, version))
            return updated

    def tombstone_pointer(self, name: str, version: int) -> None:
        """Mark a pointer version deleted; resolution and queries skip it."""
        with self._lock:
            if (name, version) in self._deleted:
                return
            self._require_pointer(name, version)
            self._append_records([TombstoneRecord(name=name, version=version, at=self._clock())])
            self._deleted.add((name, version))
            self._flags.discard((name, version))

    # --- export / import / fsck ---

    def export_journal(self, path: str | Path) -> int:
        with self._lock:
            try:
                data = self._journal_path.read_bytes() if self._journal_path.exists() else b""
                Path(path).write_bytes(data)
            except OSError as exc:
                raise DomainError(ErrorCode.STORE_IO, f"export failed: {exc}") from exc
            return data.count(b"\n")

    def import_journal(self, path: str | Path) -> int:
        with self._lock:
            if self._journal_pos > 0 or self._specs or self._runs or self._pointers:
                raise DomainError(ErrorCode.NONEMPTY_TARGET, "import target store is not empty")
            try:
                data = Path(path).read_bytes()
            except OSError as exc:
                raise DomainError(ErrorCode.STORE_IO, f"import failed: {exc}") from exc
            if data and not data.endswith(b"\n"):
                raise DomainError(ErrorCode.VALIDATION, "import file ends with a truncated record")
            lines = data.split(b"\n")[:-1]
            try:
                for line_no, line in enumerate(lines, start=1):
                    try:
                        self._apply_record(parse_journal_line(line.decode("utf-8")))
                    except (DomainError, UnicodeDecodeError) as exc:
                        message = exc.message if isinstance(exc, DomainError) else str(exc)
                        raise DomainError(ErrorCode.VALIDATION, f"import record {line_no}: {message}") from None
                self._fh.write(data)
                self._fh.flush()
                if self._durable:
                    os.fsync(self._fh.fileno())
            except OSError as exc:
                self._reset_state()
                try:
                    self._fh.truncate(0)
                except OSError:
                    pass
                raise DomainError(ErrorCode.STORE_IO, f"import failed: {exc}") from exc
            except DomainError:
                self._reset_state()
                raise
            self._journal_pos = len(data)
            return len(lines)

    def _index_snapshot_dict(self) -> dict[str, object]:
        return {
            "journal_pos": self._journal_pos,
            "components": sorted(self._specs),
            "next_run_id": self._next_run_id,
            "runs_by_component": {name: list(ids) for name, ids in sorted(self._runs_by_component.items())},
            "pointer_versions": {name: len(vs) for name, vs in sorted(self._pointers.items())},
            "flagged": sorted([name, version] for name, version in self._flags),
            "deleted": sorted([name, version] for name, version in self._deleted),
            "alert_count": len(self._alerts),
        }

    def _write_index_snapshot(self) -> None:
        try:
            (self.directory / INDEX_NAME).write_text(canonical_dumps(self._index_snapshot_dict()) + "\n", "utf-8")
        except OSError as exc:
            raise DomainError(ErrorCode.STORE_IO, f"cannot write index snapshot: {exc}") from exc

    # --- async trigger finalization ---

    def _submit_deferred(self, run_id: int, deferred: DeferredCheck) -> None:
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self._async_workers, thread_name_prefix="lineatrace-check")
        future = self._pool.submit(self._finalize_deferred, run_id, deferred)
        self._pending.add(future)
        future.add_done_callback(self._pending.discard)

    def _finalize_deferred(self, run_id: int, deferred: DeferredCheck) -> None:
        result: TriggerResult = deferred.compute()
        with self._lock:
            run = self._runs.get(run_id)
            if run is None:
                return
            self._append_records([TriggerUpdateRecord(run_id=run_id, result=result)])
            results = list(run.trigger_results)
            for idx, existing in enumerate(results):
                if (
                    existing.check_name == result.check_name
                    and existing.phase is result.phase
                    and existing.status is TriggerStatus.PENDING
                ):
                    results[idx] = result
                    break
            self._runs[run_id] = replace(run, trigger_results=tuple(results))

    def drain_async(self) -> None:
        """Block until every queued async check has finalized."""
        while True:
            pending = list(self._pending)
            if not pending:
                return
            done, _ = wait(pending)
            for future in done:
                future.result()

    # --- reads ---

    def snapshot(self) -> StoreSnapshot:
        with self._lock:
            return StoreSnapshot(
                specs=dict(self._specs),
                runs=dict(self._runs),
                pointers={name: tuple(vs) for name, vs in self._pointers.items()},
                runs_by_component={name: tuple(ids) for name, ids in self._runs_by_component.items()},
                flags=frozenset(self._flags),
                deleted=frozenset(self._deleted),
                alerts=tuple(self._alerts),
                journal_pos=self._journal_pos,
            )

    def get_spec(self, name: str) -> ComponentSpec:
        with self._lock:
            spec = self._specs.get(name)
            if spec is None:
                raise DomainError(ErrorCode.UNKNOWN_COMPONENT, f"component {name!r} is not registered")
            return spec

    def get_run(self, run_id: int) -> ComponentRun:
        with self._lock:
            run = self._runs.get(run_id)
            if run is None:
                raise DomainError(ErrorCode.UNKNOWN_RUN, f"no run with id {run_id}")
            return run

    def pointer_versions(self, name: str) -> tuple[PointerVersion, ...]:
        with self._lock:
            return tuple(self._pointers.get(name, ()))

    def get_pointer(self, name: str, version: int) -> PointerVersion:
        with self._lock:
            return self._require_pointer(name, version)

    def alerts(self) -> tuple[AlertRecord, ...]:
        with self._lock:
            return tuple(self._alerts)

    @property
    def journal_position(self) -> int:
        with self._lock:
            return self._journal_pos

    def _lookup_pointer(self, name: str, version: int) -> PointerVersion | None:
        versions = self._pointers.get(name)
        if versions is None or not 1 <= version <= len(versions):
            return None
        return versions[version - 1]

    def _require_pointer(self, name: str, version: int, allow_deleted: bool = False) -> PointerVersion:
        pv = self._lookup_pointer(name, version)
        if pv is None or (not allow_deleted and (name, version) in self._deleted):
            raise DomainError(ErrorCode.UNKNOWN_POINTER, f"no pointer {name!r} with version {version}")
        return pv


def fsck(directory: str | Path) -> FsckReport:
    """Re-derive indexes from the journal and reconcile the snapshot file.

    Reports any divergence between the stored index snapshot and the
    journal-derived truth, then rewrites the snapshot from the journal.
    """
    directory = Path(directory)
    snapshot_path = directory / INDEX_NAME
    previous: dict[str, object] | None = None
    if snapshot_path.exists():
        try:
            previous = loads_strict(snapshot_path.read_text("utf-8"))
        except (OSError, DomainError):
            previous = {"unreadable": True}
    store = Store(directory)
    try:
        derived = store._index_snapshot_dict()
        divergences: list[str] = []
        if previous is None:
            divergences.append("no index snapshot on disk")
        else:
            for key in sorted(set(previous) | set(derived)):
                if previous.get(key) != derived.get(key):
                    divergences.append(f"{key}: snapshot {previous.get(key)!r} != journal {derived.get(key)!r}")
        store._write_index_snapshot()
        snap = store.snapshot()
        record_count = 0
        if store._journal_path.exists():
            record_count = store._journal_path.read_bytes().count(b"\n")
        return FsckReport(
            path=str(directory),
            records=record_count,
            components=len(snap.specs),
            runs=len(snap.runs),
            pointer_versions=sum(len(v) for v in snap.pointers.values()),
            flagged=len(snap.flags),
            alerts=len(snap.alerts),
            truncated_bytes=store.recovered_bytes,
            divergences=tuple(divergences),
        )
    finally:
        store.close()
