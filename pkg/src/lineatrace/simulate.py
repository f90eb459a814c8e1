"""Deterministic pipeline simulator for demos and end-to-end tests.

Builds a round-robin chain of stages (stage0 feeds stage1 feeds ...),
logs `runs` run records with seeded column samples and metrics, and
injects declared faults. The same seed always produces a byte-identical
journal: the store clock is pinned, checks run synchronously, and every
sample value is derived from the seed alone.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from statistics import NormalDist

from .errors import DomainError, ErrorCode
from .model import Comparator, ComponentSpec, Phase, SlaSpec, TriggerBinding
from .store import Store

SIM_BASE = datetime(2026, 3, 1, tzinfo=timezone.utc)
SAMPLE_SIZE = 40
SHIFT_AMOUNT = 12.0
NULL_SPIKE_EXTRA = 20
DROPPED_METRIC = 0.5

_DIST = NormalDist(10.0, 2.0)
# Band centers are spaced >= 0.125 apart, so +/-0.04 jitter can never
# reorder values across runs; stable-vs-history drift D stays under 1/n.
_BANDS = tuple(_DIST.inv_cdf((j + 0.5) / SAMPLE_SIZE) for j in range(SAMPLE_SIZE))
_JITTER = 0.04

FAULT_KINDS = ("drift_shift", "metric_drop", "null_spike", "pin_stale", "stale_age")


@dataclass(frozen=True)
class Fault:
    """One declared anomaly, applied while generating a specific run."""

    kind: str
    run: int
    column: str = "value"
    days: float = 31.0
    version: int = 1


@dataclass(frozen=True)
class SimReport:
    directory: str
    seed: int
    runs: int
    components: int
    faults: tuple[Fault, ...]
    alerts_fired: int
    journal_bytes: int


def parse_fault(text: str) -> Fault:
    """Parse `kind:key=value,key=value` fault declarations.

    Examples: `drift_shift:run=15`, `stale_age:run=12,days=45`,
    `pin_stale:run=8,version=1`.
    """
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    if kind not in FAULT_KINDS:
        raise DomainError(ErrorCode.BAD_REQUEST, f"unknown fault kind {kind!r}; expected one of {', '.join(FAULT_KINDS)}")
    fields: dict[str, object] = {}
    for part in filter(None, (p.strip() for p in rest.split(","))):
        key, sep, value = part.partition("=")
        if not sep:
            raise DomainError(ErrorCode.BAD_REQUEST, f"fault option {part!r} is not key=value")
        key = key.strip()
        if key == "run":
            fields["run"] = _positive_int(value, "run")
        elif key == "version":
            fields["version"] = _positive_int(value, "version")
        elif key == "days":
            try:
                fields["days"] = float(value)
            except ValueError:
                raise DomainError(ErrorCode.BAD_REQUEST, f"fault days must be a number, got {value!r}") from None
        elif key == "column":
            fields["column"] = value.strip()
        else:
            raise DomainError(ErrorCode.BAD_REQUEST, f"unknown fault option {key!r}")
    if "run" not in fields:
        raise DomainError(ErrorCode.BAD_REQUEST, f"fault {kind!r} needs run=N")
    return Fault(kind=kind, **fields)  # type: ignore[arg-type]


def _positive_int(value: str, name: str) -> int:
    try:
        parsed = int(value)
    except ValueError:
        parsed = 0
    if parsed < 1:
        raise DomainError(ErrorCode.BAD_REQUEST, f"fault {name} must be a positive integer, got {value!r}")
    return parsed


def column_sample(seed: int, run_index: int, column: str, *, shifted: bool = False, null_spike: bool = False) -> list:
    """The exact sample run `run_index` submits for `column`.

    Pure function of its arguments, so tests can regenerate any sample
    and compute expected check outcomes independently of the store.
    """
    rng = random.Random(f"{seed}/{run_index}/{column}")
    values: list = [round(center + rng.uniform(-_JITTER, _JITTER), 6) for center in _BANDS]
    if shifted:
        values = [round(v + SHIFT_AMOUNT, 6) for v in values]
    if null_spike:
        # Appended, not substituted: the numeric values stay untouched so a
        # null spike trips only the null check, never the drift check.
        values.extend([None] * NULL_SPIKE_EXTRA)
    return values


def metric_value(seed: int, run_index: int, *, dropped: bool = False) -> float:
    if dropped:
        return DROPPED_METRIC
    rng = random.Random(f"{seed}/{run_index}/accuracy")
    return round(0.93 + 0.04 * rng.random(), 6)


def _stage_spec(index: int, last: bool) -> ComponentSpec:
    bindings = (
        TriggerBinding(phase=Phase.BEFORE, check_name="null_fraction", params={"column": "value", "max_fraction": 0.2}),
        TriggerBinding(phase=Phase.AFTER, check_name="outliers", params={"column": "value"}),
        TriggerBinding(phase=Phase.AFTER, check_name="drift", params={"column": "value"}),
    )
    sla = (SlaSpec(metric_name="accuracy", comparator=Comparator.GE, threshold=0.9, window=3),) if last else ()
    return ComponentSpec(
        name=f"stage{index}",
        description=f"simulated pipeline stage {index}",
        owner="simulator",
        tags=("simulated",),
        trigger_bindings=bindings,
        sla_metrics=sla,
    )


def stage_artifact(index: int) -> str:
    return f"sim/stage{index}.parquet"


def simulate(
    directory,
    seed: int,
    runs: int = 20,
    components: int = 3,
    faults: tuple[Fault, ...] = (),
) -> SimReport:
    """Populate an empty store with a seeded pipeline and return a summary."""
    if runs < 1 or components < 1:
        raise DomainError(ErrorCode.BAD_REQUEST, "simulate needs runs >= 1 and components >= 1")
    for fault in faults:
        if fault.run > runs:
            raise DomainError(ErrorCode.BAD_REQUEST, f"fault targets run {fault.run} but only {runs} runs are simulated")

    store = Store(directory, clock=lambda: SIM_BASE + timedelta(days=400))
    try:
        if store.journal_position > 0:
            raise DomainError(ErrorCode.NONEMPTY_TARGET, "simulate target store is not empty")

        for index in range(components):
            store.register_component(_stage_spec(index, last=index == components - 1))

        by_run: dict[int, list[Fault]] = {}
        for fault in faults:
            by_run.setdefault(fault.run, []).append(fault)

        offset = timedelta()
        for i in range(1, runs + 1):
            active = by_run.get(i, [])
            for fault in active:
                if fault.kind == "stale_age":
                    offset += timedelta(days=fault.days)
            stage = (i - 1) % components
            start = SIM_BASE + timedelta(hours=2 * i) + offset
            end = SIM_BASE + timedelta(hours=2 * i + 1) + offset

            inputs: list[object] = []
            if stage > 0:
                pin = next((f.version for f in active if f.kind == "pin_stale"), None)
                name = stage_artifact(stage - 1)
                inputs.append(name if pin is None else {"name": name, "version": pin})

            shifted = any(f.kind == "drift_shift" for f in active)
            spiked = any(f.kind == "null_spike" for f in active)
            dropped = any(f.kind == "metric_drop" for f in active)
            store.log_component_run(
                {
                    "component": f"stage{stage}",
                    "start_time": start.strftime("%Y-%m-%dT%H:%M:%S.%fZ"),
                    "end_time": end.strftime("%Y-%m-%dT%H:%M:%S.%fZ"),
                    "inputs": inputs,
                    "outputs": [stage_artifact(stage)],
                    "samples": [
                        {
                            "column": "value",
                            "values": column_sample(seed, i, "value", shifted=shifted, null_spike=spiked),
                            "pointer": stage_artifact(stage),
                        }
                    ],
                    "metrics": {"accuracy": metric_value(seed, i, dropped=dropped)},
                    "code_version": f"sim-{seed}",
                }
            )

        return SimReport(
            directory=str(store.directory),
            seed=seed,
            runs=runs,
            components=components,
            faults=tuple(faults),
            alerts_fired=len(store.alerts()),
            journal_bytes=store.journal_position,
        )
    finally:
        store.close()
