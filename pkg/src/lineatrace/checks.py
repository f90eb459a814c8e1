"""Statistical checks, the check registry, phase execution, and SLA alerts.

Check evaluation is pure: the same samples, parameters, and history window
always produce the same status, metric, and detail (only evaluated_at
differs). A failing or crashing check never prevents the remaining
bindings from running.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime
from statistics import fmean, quantiles
from typing import Callable, Mapping, Sequence

from .errors import DomainError, ErrorCode
from .model import (
    AlertRecord,
    ColumnSample,
    Comparator,
    ComponentSpec,
    Phase,
    SlaSpec,
    TriggerResult,
    TriggerStatus,
    utcnow,
)

DEFAULT_D_THRESHOLD = 0.1
DEFAULT_HISTORY_WINDOW = 5
DEFAULT_OUTLIER_K = 1.5

# Reserved binding parameter: {"async": true} defers the check past commit.
ASYNC_PARAM = "async"


@dataclass(frozen=True)
class HistoryWindow:
    """Pooled numeric column values from a component's previous runs."""

    run_ids: tuple[int, ...]
    columns: Mapping[str, tuple[float, ...]]

    def pooled(self, column: str) -> tuple[float, ...]:
        return self.columns.get(column, ())


def ks_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    """Exact two-sample Kolmogorov-Smirnov statistic.

    D = sup over x of |F_a(x) - F_b(x)| for right-continuous empirical
    CDFs; the supremum is attained at a sample point, so a single merged
    walk over both sorted samples evaluates every candidate.
    """
    if not a or not b:
        raise DomainError(ErrorCode.EMPTY_SAMPLE, "ks_statistic requires two non-empty samples")
    sa, sb = sorted(a), sorted(b)
    na, nb = len(sa), len(sb)
    i = j = 0
    d = 0.0
    while i < na or j < nb:
        if j >= nb or (i < na and sa[i] <= sb[j]):
            x = sa[i]
        else:
            x = sb[j]
        while i < na and sa[i] == x:
            i += 1
        while j < nb and sb[j] == x:
            j += 1
        gap = abs(i / na - j / nb)
        if gap > d:
            d = gap
    return d


def check_null_fraction(sample: ColumnSample, max_fraction: float = 0.0) -> TriggerResult:
    """FAIL when the missing fraction strictly exceeds max_fraction."""
    missing = sample.missing_count()
    total = len(sample.values)
    if total == 0:
        return TriggerResult(
            check_name="null_fraction",
            phase=Phase.BEFORE,
            status=TriggerStatus.PASS,
            metric_value=0.0,
            detail="empty sample",
        )
    fraction = missing / total
    status = TriggerStatus.FAIL if fraction > max_fraction else TriggerStatus.PASS
    return TriggerResult(
        check_name="null_fraction",
        phase=Phase.BEFORE,
        status=status,
        metric_value=fraction,
        detail=f"{missing} of {total} values missing (limit {max_fraction:g})",
    )


def check_outliers(sample: ColumnSample, k: float = DEFAULT_OUTLIER_K) -> TriggerResult:
    """Tukey-fence outlier check with interpolated quartiles.

    Values sitting exactly on a fence are inside: the rule is strict
    inequality, so a constant column never fails.
    """
    data = sample.numeric_values()
    if len(data) < 4:
        return TriggerResult(
            check_name="outliers",
            phase=Phase.AFTER,
            status=TriggerStatus.PASS,
            metric_value=None,
            detail="insufficient data",
        )
    q1, _, q3 = quantiles(data, n=4, method="inclusive")
    iqr = q3 - q1
    lo = q1 - k * iqr
    hi = q3 + k * iqr
    count = sum(1 for v in data if v < lo or v > hi)
    status = TriggerStatus.FAIL if count else TriggerStatus.PASS
    return TriggerResult(
        check_name="outliers",
        phase=Phase.AFTER,
        status=status,
        metric_value=float(count),
        detail=f"{count} value(s) outside [{lo:g}, {hi:g}] (k={k:g})",
    )


def check_drift(
    sample: ColumnSample, history: HistoryWindow | None, d_threshold: float = DEFAULT_D_THRESHOLD
) -> TriggerResult:
    """Compare the current column against pooled history with the KS statistic."""
    current = sample.numeric_values()
    pooled = history.pooled(sample.column) if history is not None else ()
    if not pooled:
        return TriggerResult(
            check_name="drift",
            phase=Phase.AFTER,
            status=TriggerStatus.PASS,
            metric_value=None,
            detail="no history",
        )
    if not current:
        return TriggerResult(
            check_name="drift",
            phase=Phase.AFTER,
            status=TriggerStatus.PASS,
            metric_value=None,
            detail="no current values",
        )
    d = ks_statistic(current, pooled)
    status = TriggerStatus.FAIL if d > d_threshold else TriggerStatus.PASS
    runs = len(history.run_ids) if history is not None else 0
    return TriggerResult(
        check_name="drift",
        phase=Phase.AFTER,
        status=status,
        metric_value=d,
        detail=f"D={d:.6g} vs threshold {d_threshold:g} ({len(pooled)} pooled values, {runs} runs)",
    )


def check_row_overlap(train_ids: Sequence[str], test_ids: Sequence[str]) -> TriggerResult:
    """FAIL when any identifier appears in both splits."""
    if not train_ids or not test_ids:
        raise DomainError(ErrorCode.EMPTY_SAMPLE, "row overlap requires two non-empty id lists")
    shared = sorted(set(train_ids) & set(test_ids))
    status = TriggerStatus.FAIL if shared else TriggerStatus.PASS
    preview = ", ".join(shared[:5]) + ("..." if len(shared) > 5 else "")
    detail = f"{len(shared)} shared id(s)" + (f": {preview}" if shared else "")
    return TriggerResult(
        check_name="row_overlap",
        phase=Phase.BEFORE,
        status=status,
        metric_value=float(len(shared)),
        detail=detail,
    )


def evaluate_sla(
    spec: SlaSpec,
    stream: Sequence[tuple[int, float]],
    component: str,
    fired_at: datetime,
) -> AlertRecord | None:
    """Mean the most recent `window` values; alert only on violation.

    `stream` is (run_id, value) pairs oldest first, current run included.
    Fewer than `window` observations is warm-up: no alert either way.
    """
    if len(stream) < spec.window:
        return None
    tail = stream[-spec.window :]
    value = fmean(v for _, v in tail)
    if spec.comparator is Comparator.GE:
        violated = value < spec.threshold
    else:
        violated = value > spec.threshold
    if not violated:
        return None
    return AlertRecord(
        component=component,
        metric_name=spec.metric_name,
        run_ids=tuple(run_id for run_id, _ in tail),
        value=value,
        threshold=spec.threshold,
        comparator=spec.comparator,
        fired_at=fired_at,
    )


# --- registry and phase execution ---

_REQUIRED = object()

Samples = Mapping[str, ColumnSample]
CheckFn = Callable[[Samples, Mapping[str, object], "HistoryWindow | None"], TriggerResult]


@dataclass(frozen=True)
class CheckDefinition:
    name: str
    affinity: frozenset[Phase]
    param_schema: Mapping[str, object]
    evaluate: CheckFn


def _need_column(samples: Samples, params: Mapping[str, object], key: str) -> ColumnSample:
    column = params[key]
    sample = samples.get(column)  # type: ignore[arg-type]
    if sample is None:
        raise DomainError(ErrorCode.EMPTY_SAMPLE, f"column {column!r} was not captured by this run")
    return sample


def _eval_null_fraction(samples: Samples, params: Mapping[str, object], history: HistoryWindow | None) -> TriggerResult:
    sample = _need_column(samples, params, "column")
    return check_null_fraction(sample, max_fraction=float(params["max_fraction"]))  # type: ignore[arg-type]


def _eval_outliers(samples: Samples, params: Mapping[str, object], history: HistoryWindow | None) -> TriggerResult:
    sample = _need_column(samples, params, "column")
    return check_outliers(sample, k=float(params["k"]))  # type: ignore[arg-type]


def _eval_drift(samples: Samples, params: Mapping[str, object], history: HistoryWindow | None) -> TriggerResult:
    sample = _need_column(samples, params, "column")
    return check_drift(sample, history, d_threshold=float(params["d_threshold"]))  # type: ignore[arg-type]


def _ids(sample: ColumnSample) -> list[str]:
    # Captured samples are numeric; integral values print without the ".0".
    return [str(int(v)) if v.is_integer() else repr(v) for v in sample.numeric_values()]


def _eval_row_overlap(samples: Samples, params: Mapping[str, object], history: HistoryWindow | None) -> TriggerResult:
    train = _need_column(samples, params, "train_column")
    test = _need_column(samples, params, "test_column")
    return check_row_overlap(_ids(train), _ids(test))


_REGISTRY: dict[str, CheckDefinition] = {
    d.name: d
    for d in (
        CheckDefinition(
            name="null_fraction",
            affinity=frozenset({Phase.BEFORE, Phase.AFTER}),
            param_schema={"column": _REQUIRED, "max_fraction": 0.0},
            evaluate=_eval_null_fraction,
        ),
        CheckDefinition(
            name="outliers",
            affinity=frozenset({Phase.BEFORE, Phase.AFTER}),
            param_schema={"column": _REQUIRED, "k": DEFAULT_OUTLIER_K},
            evaluate=_eval_outliers,
        ),
        CheckDefinition(
            name="drift",
            affinity=frozenset({Phase.AFTER}),
            param_schema={"column": _REQUIRED, "d_threshold": None},
            evaluate=_eval_drift,
        ),
        CheckDefinition(
            name="row_overlap",
            affinity=frozenset({Phase.BEFORE}),
            param_schema={"train_column": _REQUIRED, "test_column": _REQUIRED},
            evaluate=_eval_row_overlap,
        ),
    )
}


def known_checks() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def validate_bindings(spec: ComponentSpec) -> list[tuple[ErrorCode, str]]:
    """Binding problems are caught here, at registration, never at run time."""
    problems: list[tuple[ErrorCode, str]] = []
    for binding in spec.trigger_bindings:
        defn = _REGISTRY.get(binding.check_name)
        if defn is None:
            problems.append((ErrorCode.UNKNOWN_CHECK, f"no check named {binding.check_name!r}"))
            continue
        if binding.phase not in defn.affinity:
            problems.append(
                (ErrorCode.INVALID_SPEC, f"check {defn.name!r} cannot run in phase {binding.phase.value!r}")
            )
        params = dict(binding.params)
        run_async = params.pop(ASYNC_PARAM, False)
        if not isinstance(run_async, bool):
            problems.append((ErrorCode.INVALID_SPEC, f"binding {defn.name!r}: {ASYNC_PARAM!r} must be a boolean"))
        for key in params:
            if key not in defn.param_schema:
                problems.append((ErrorCode.INVALID_SPEC, f"binding {defn.name!r}: unknown parameter {key!r}"))
        for key, default in defn.param_schema.items():
            if default is _REQUIRED and key not in params:
                problems.append((ErrorCode.INVALID_SPEC, f"binding {defn.name!r}: missing parameter {key!r}"))
        problems.extend(_check_param_types(defn.name, params))
    return problems


def _check_param_types(check_name: str, params: Mapping[str, object]) -> list[tuple[ErrorCode, str]]:
    problems = []
    for key, value in params.items():
        if key.endswith("column") and not isinstance(value, str):
            problems.append((ErrorCode.INVALID_SPEC, f"binding {check_name!r}: {key!r} must be a column name"))
        elif key in ("max_fraction", "k", "d_threshold") and value is not None:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                problems.append((ErrorCode.INVALID_SPEC, f"binding {check_name!r}: {key!r} must be a number"))
            elif key == "max_fraction" and not 0.0 <= float(value) <= 1.0:
                problems.append((ErrorCode.INVALID_SPEC, f"binding {check_name!r}: {key!r} must be within [0, 1]"))
    return problems


@dataclass(frozen=True)
class DeferredCheck:
    """An async binding: committed as PENDING, finalized by calling compute."""

    check_name: str
    phase: Phase
    compute: Callable[[], TriggerResult]


def _resolve_params(defn: CheckDefinition, raw: Mapping[str, object], d_threshold_default: float) -> dict[str, object]:
    params = {k: v for k, v in dict(defn.param_schema).items() if v is not _REQUIRED}
    params.update({k: v for k, v in raw.items() if k != ASYNC_PARAM})
    if params.get("d_threshold") is None and "d_threshold" in defn.param_schema:
        params["d_threshold"] = d_threshold_default
    return params


def _safe_evaluate(
    defn: CheckDefinition,
    phase: Phase,
    samples: Samples,
    params: Mapping[str, object],
    history: HistoryWindow | None,
    evaluated_at: datetime,
) -> TriggerResult:
    try:
        result = defn.evaluate(samples, params, history)
    except DomainError as exc:
        result = TriggerResult(
            check_name=defn.name, phase=phase, status=TriggerStatus.ERROR, metric_value=None, detail=exc.message
        )
    except Exception as exc:  # isolation: one broken check never blocks the rest
        result = TriggerResult(
            check_name=defn.name,
            phase=phase,
            status=TriggerStatus.ERROR,
            metric_value=None,
            detail=f"{type(exc).__name__}: {exc}",
        )
    return replace(result, phase=phase, evaluated_at=evaluated_at)


def run_phase(
    phase: Phase,
    spec: ComponentSpec,
    samples: Samples,
    history: HistoryWindow | None,
    *,
    d_threshold_default: float = DEFAULT_D_THRESHOLD,
    now_fn: Callable[[], datetime] = utcnow,
) -> tuple[list[TriggerResult], list[DeferredCheck]]:
    """Run every binding of the given phase in declaration order.

    Returns one result per matching binding; async bindings yield a
    PENDING result plus a DeferredCheck whose compute() produces the
    final result (exception-safe, reentrant).
    """
    results: list[TriggerResult] = []
    deferred: list[DeferredCheck] = []
    for binding in spec.trigger_bindings:
        if binding.phase is not phase:
            continue
        defn = _REGISTRY[binding.check_name]
        params = _resolve_params(defn, binding.params, d_threshold_default)
        run_async = bool(binding.params.get(ASYNC_PARAM, False))
        if run_async:
            results.append(
                TriggerResult(
                    check_name=defn.name,
                    phase=phase,
                    status=TriggerStatus.PENDING,
                    metric_value=None,
                    detail="queued",
                    evaluated_at=now_fn(),
                )
            )
            deferred.append(
                DeferredCheck(
                    check_name=defn.name,
                    phase=phase,
                    compute=lambda d=defn, p=params: _safe_evaluate(d, phase, samples, p, history, now_fn()),
                )
            )
        else:
            results.append(_safe_evaluate(defn, phase, samples, params, history, now_fn()))
    return results, deferred
