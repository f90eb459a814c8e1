"""Read-only queries: traces, histories, inspections, staleness, review.

Every query takes one immutable snapshot up front and computes from it,
so results are internally consistent even while ingest continues. The
journal is never touched.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Any, Iterable, Mapping

from .errors import DomainError, ErrorCode
from .model import ComponentRun, ComponentSpec, PointerRef, PointerVersion, StalenessVerdict, TriggerResult, format_ts
from .records import (
    _Fields,
    _obj_item,
    ref_from_dict,
    ref_to_dict,
    trigger_result_from_dict,
    trigger_result_to_dict,
    verdict_from_dict,
    verdict_to_dict,
)
from .store import Store, StoreSnapshot


@dataclass(frozen=True)
class FlaggedRef:
    """A pointer reference carrying its current flag state."""

    name: str
    version: int
    flagged: bool


@dataclass(frozen=True)
class RunSummary:
    """The compact run view used by traces, histories, and listings."""

    run_id: int
    component_name: str
    start_time: datetime
    end_time: datetime
    stale: StalenessVerdict
    trigger_results: tuple[TriggerResult, ...]
    inputs: tuple[PointerRef, ...]
    outputs: tuple[FlaggedRef, ...]


@dataclass(frozen=True)
class TraceResult:
    """A lineage DAG: nodes in topological order, edges producer-to-consumer."""

    root: PointerRef
    nodes: tuple[RunSummary, ...]
    edges: frozenset[tuple[int, int]]
    artifacts: tuple[PointerRef, ...] = ()


@dataclass(frozen=True)
class ReviewEntry:
    run_id: int
    count: int
    component_name: str


@dataclass(frozen=True)
class ReviewReport:
    flagged: tuple[PointerRef, ...]
    ranking: tuple[ReviewEntry, ...]


def _summarize(run: ComponentRun, snap: StoreSnapshot) -> RunSummary:
    outputs = tuple(
        FlaggedRef(name=ref.name, version=ref.version, flagged=(ref.name, ref.version) in snap.flags)
        for ref in run.outputs
    )
    return RunSummary(
        run_id=run.run_id,
        component_name=run.component_name,
        start_time=run.start_time,
        end_time=run.end_time,
        stale=run.stale,
        trigger_results=run.trigger_results,
        inputs=run.inputs,
        outputs=outputs,
    )


def _resolve_pointer(snap: StoreSnapshot, name: str, version: int | None) -> PointerVersion:
    """Resolve a pointer reference; version None means the highest live one."""
    versions = snap.pointers.get(name)
    if not versions:
        raise DomainError(ErrorCode.UNKNOWN_POINTER, f"no pointer named {name!r}")
    if version is None:
        for pv in reversed(versions):
            if (pv.name, pv.version) not in snap.deleted:
                return pv
        raise DomainError(ErrorCode.UNKNOWN_POINTER, f"every version of {name!r} is deleted")
    if not 1 <= version <= len(versions) or (name, version) in snap.deleted:
        raise DomainError(ErrorCode.UNKNOWN_POINTER, f"no pointer {name!r} with version {version}")
    return versions[version - 1]


def _closure_backward(snap: StoreSnapshot, start: int) -> set[int]:
    """Depth-first reflexive closure over stored dependency edges."""
    seen: set[int] = set()
    stack = [start]
    while stack:
        run_id = stack.pop()
        if run_id in seen:
            continue
        seen.add(run_id)
        stack.extend(snap.runs[run_id].dependencies)
    return seen


def _edges_within(snap: StoreSnapshot, node_ids: set[int]) -> frozenset[tuple[int, int]]:
    return frozenset(
        (dep, run_id) for run_id in node_ids for dep in snap.runs[run_id].dependencies if dep in node_ids
    )


def _as_nodes(snap: StoreSnapshot, node_ids: set[int]) -> tuple[RunSummary, ...]:
    # Ascending run_id is a topological order: dependencies always have
    # smaller ids than their dependents.
    return tuple(_summarize(snap.runs[run_id], snap) for run_id in sorted(node_ids))


def trace(store: Store, name: str, version: int | None = None) -> TraceResult:
    """Backward lineage of one pointer version (version None = latest)."""
    snap = store.snapshot()
    pv = _resolve_pointer(snap, name, version)
    if pv.producer_run_id is None:
        raise DomainError(ErrorCode.NO_PRODUCER, f"{pv.name!r} v{pv.version} is source data with no producing run")
    node_ids = _closure_backward(snap, pv.producer_run_id)
    artifacts = sorted(
        {ref for run_id in node_ids for ref in snap.runs[run_id].outputs}, key=lambda r: (r.name, r.version)
    )
    return TraceResult(
        root=PointerRef(pv.name, pv.version),
        nodes=_as_nodes(snap, node_ids),
        edges=_edges_within(snap, node_ids),
        artifacts=tuple(artifacts),
    )


def forward_trace(store: Store, name: str, version: int | None = None) -> TraceResult:
    """Everything derived from one pointer version.

    Nodes are the runs that transitively consumed it, plus its producer
    when one exists (so forward and backward traces stay exact adjoints);
    artifacts are every pointer version those consuming runs produced,
    the set a deletion audit needs.
    """
    snap = store.snapshot()
    pv = _resolve_pointer(snap, name, version)
    consumed_by: dict[tuple[str, int], list[int]] = {}
    for run in snap.runs.values():
        for ref in run.inputs:
            consumed_by.setdefault((ref.name, ref.version), []).append(run.run_id)

    consumers: set[int] = set()
    artifact_refs: set[PointerRef] = set()
    pending: list[tuple[str, int]] = [(pv.name, pv.version)]
    while pending:
        key = pending.pop()
        for run_id in consumed_by.get(key, ()):
            if run_id in consumers:
                continue
            consumers.add(run_id)
            for out in snap.runs[run_id].outputs:
                artifact_refs.add(out)
                pending.append((out.name, out.version))

    node_ids = set(consumers)
    if pv.producer_run_id is not None:
        node_ids.add(pv.producer_run_id)
    return TraceResult(
        root=PointerRef(pv.name, pv.version),
        nodes=_as_nodes(snap, node_ids),
        edges=_edges_within(snap, node_ids),
        artifacts=tuple(sorted(artifact_refs, key=lambda r: (r.name, r.version))),
    )


def _newest_first(runs: Iterable[ComponentRun]) -> list[ComponentRun]:
    return sorted(runs, key=lambda r: (r.start_time, r.run_id), reverse=True)


def history(store: Store, component: str, limit: int = 10) -> tuple[RunSummary, ...]:
    snap = store.snapshot()
    if component not in snap.specs:
        raise DomainError(ErrorCode.UNKNOWN_COMPONENT, f"component {component!r} is not registered")
    runs = [snap.runs[run_id] for run_id in snap.runs_by_component.get(component, ())]
    return tuple(_summarize(r, snap) for r in _newest_first(runs)[: max(limit, 0)])


def inspect(store: Store, run_id: int) -> ComponentRun:
    return store.get_run(run_id)


def recent(store: Store, limit: int = 20) -> tuple[RunSummary, ...]:
    snap = store.snapshot()
    return tuple(_summarize(r, snap) for r in _newest_first(snap.runs.values())[: max(limit, 0)])


def tag_query(store: Store, tag: str) -> tuple[ComponentSpec, ...]:
    snap = store.snapshot()
    return tuple(spec for _, spec in sorted(snap.specs.items()) if tag in spec.tags)


def stale_components(store: Store, now: datetime | None = None) -> tuple[tuple[str, StalenessVerdict], ...]:
    """Components whose most recent run carries a stale verdict.

    Verdicts are anchored to each run's own start time, so `now` only
    exists for callers that thread a clock through.
    """
    del now
    snap = store.snapshot()
    out: list[tuple[str, StalenessVerdict]] = []
    for component in sorted(snap.specs):
        runs = [snap.runs[run_id] for run_id in snap.runs_by_component.get(component, ())]
        if not runs:
            continue
        latest = _newest_first(runs)[0]
        if latest.stale.stale:
            out.append((component, latest.stale))
    return tuple(out)


def review(store: Store) -> ReviewReport:
    """Rank runs by how many flagged pointers' traces contain them."""
    snap = store.snapshot()
    flagged = sorted(snap.flags - snap.deleted)
    counts: dict[int, int] = {}
    for name, version in flagged:
        pv = snap.pointers[name][version - 1]
        if pv.producer_run_id is None:
            continue
        for run_id in _closure_backward(snap, pv.producer_run_id):
            counts[run_id] = counts.get(run_id, 0) + 1
    ranking = tuple(
        ReviewEntry(run_id=run_id, count=count, component_name=snap.runs[run_id].component_name)
        for run_id, count in sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    )
    return ReviewReport(
        flagged=tuple(PointerRef(name, version) for name, version in flagged),
        ranking=ranking,
    )


# --- wire/CLI serialization ---


def summary_to_dict(summary: RunSummary) -> dict[str, Any]:
    return {
        "run_id": summary.run_id,
        "component_name": summary.component_name,
        "start_time": format_ts(summary.start_time),
        "end_time": format_ts(summary.end_time),
        "stale": verdict_to_dict(summary.stale),
        "trigger_results": [trigger_result_to_dict(t) for t in summary.trigger_results],
        "inputs": [ref_to_dict(r) for r in summary.inputs],
        "outputs": [{"name": o.name, "version": o.version, "flagged": o.flagged} for o in summary.outputs],
    }


def trace_to_dict(result: TraceResult) -> dict[str, Any]:
    return {
        "root": ref_to_dict(result.root),
        "nodes": [summary_to_dict(n) for n in result.nodes],
        "edges": [[a, b] for a, b in sorted(result.edges)],
        "artifacts": [ref_to_dict(r) for r in result.artifacts],
    }


def review_to_dict(report: ReviewReport) -> dict[str, Any]:
    return {
        "flagged": [ref_to_dict(r) for r in report.flagged],
        "ranking": [
            {"run_id": e.run_id, "count": e.count, "component_name": e.component_name} for e in report.ranking
        ],
    }


def stale_to_dict(items: Mapping[str, StalenessVerdict] | tuple[tuple[str, StalenessVerdict], ...]) -> list[dict]:
    pairs = items.items() if isinstance(items, Mapping) else items
    return [{"component": name, "stale": verdict_to_dict(verdict)} for name, verdict in pairs]


def summary_from_dict(raw: Mapping[str, Any]) -> RunSummary:
    f = _Fields(raw, "run summary")
    summary = RunSummary(
        run_id=f.int_("run_id"),
        component_name=f.str_("component_name"),
        start_time=f.ts("start_time"),
        end_time=f.ts("end_time"),
        stale=verdict_from_dict(f.obj("stale")),
        trigger_results=tuple(trigger_result_from_dict(_obj_item(t, "trigger results")) for t in f.list_("trigger_results")),
        inputs=tuple(ref_from_dict(_obj_item(r, "summary inputs")) for r in f.list_("inputs")),
        outputs=tuple(_flagged_ref_from_dict(_obj_item(o, "summary outputs")) for o in f.list_("outputs")),
    )
    f.done()
    return summary


def _flagged_ref_from_dict(raw: Mapping[str, Any]) -> FlaggedRef:
    f = _Fields(raw, "flagged pointer")
    ref = FlaggedRef(name=f.str_("name"), version=f.int_("version"), flagged=f.bool_("flagged"))
    f.done()
    return ref


def trace_from_dict(raw: Mapping[str, Any]) -> TraceResult:
    f = _Fields(raw, "trace")
    edges = []
    for pair in f.list_("edges"):
        if not isinstance(pair, list) or len(pair) != 2 or not all(isinstance(v, int) for v in pair):
            raise DomainError(ErrorCode.VALIDATION, f"trace edge must be a [from, to] id pair: {pair!r}")
        edges.append((pair[0], pair[1]))
    result = TraceResult(
        root=ref_from_dict(f.obj("root")),
        nodes=tuple(summary_from_dict(_obj_item(n, "trace nodes")) for n in f.list_("nodes")),
        edges=frozenset(edges),
        artifacts=tuple(ref_from_dict(_obj_item(r, "trace artifacts")) for r in f.list_("artifacts")),
    )
    f.done()
    return result


def review_from_dict(raw: Mapping[str, Any]) -> ReviewReport:
    f = _Fields(raw, "review report")
    ranking = []
    for item in f.list_("ranking"):
        e = _Fields(_obj_item(item, "review ranking"), "review entry")
        ranking.append(ReviewEntry(run_id=e.int_("run_id"), count=e.int_("count"), component_name=e.str_("component_name")))
        e.done()
    report = ReviewReport(
        flagged=tuple(ref_from_dict(_obj_item(r, "review flagged")) for r in f.list_("flagged")),
        ranking=tuple(ranking),
    )
    f.done()
    return report


def stale_from_list(items: Iterable[Mapping[str, Any]]) -> tuple[tuple[str, StalenessVerdict], ...]:
    out = []
    for item in items:
        f = _Fields(_obj_item(item, "stale entries"), "stale entry")
        out.append((f.str_("component"), verdict_from_dict(f.obj("stale"))))
        f.done()
    return tuple(out)
