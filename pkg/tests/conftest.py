"""Shared fixtures: a clock-pinned store factory and random DAG builders."""

from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone

import pytest

from lineatrace import ComponentSpec
from lineatrace.store import Store

BASE = datetime(2026, 1, 1, tzinfo=timezone.utc)


def dt(hours: float = 0.0, days: float = 0.0) -> datetime:
    return BASE + timedelta(hours=hours, days=days)


def ts(hours: float = 0.0, days: float = 0.0) -> str:
    return dt(hours, days).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def run_payload(component, start, end, inputs=(), outputs=(), **extra):
    body = {
        "component": component,
        "start_time": start if isinstance(start, str) else start.strftime("%Y-%m-%dT%H:%M:%S.%fZ"),
        "end_time": end if isinstance(end, str) else end.strftime("%Y-%m-%dT%H:%M:%S.%fZ"),
        "inputs": list(inputs),
        "outputs": list(outputs),
    }
    body.update(extra)
    return body


@pytest.fixture
def make_store(tmp_path):
    """Store factory with a clock far past every test timestamp (no clamping)."""
    created = []

    def factory(name="store", **kwargs):
        kwargs.setdefault("clock", lambda: BASE + timedelta(days=365))
        store = Store(tmp_path / name, **kwargs)
        created.append(store)
        return store

    yield factory
    for store in created:
        store.close()


@pytest.fixture
def store(make_store):
    return make_store()


def build_random_dag(store: Store, rng: random.Random, max_runs: int = 50, pool_size: int = 18):
    """Ingest a random pipeline; returns the committed runs in order.

    End times increase strictly, so minted created_at values are never
    clamped and the test-side bookkeeping stays exact.
    """
    n_components = rng.randint(1, 5)
    components = [f"stage{i}" for i in range(n_components)]
    for name in components:
        store.register_component(ComponentSpec(name=name))
    pool = [f"data/p{i:03d}.csv" for i in range(pool_size)]
    runs = []
    n_runs = rng.randint(1, max_runs)
    for i in range(n_runs):
        start = dt(hours=2 * i)
        end = dt(hours=2 * i + 1)
        names = rng.sample(pool, k=min(len(pool), rng.randint(1, 5)))
        cut = rng.randint(0, len(names))
        inputs, outputs = names[:cut], names[cut:]
        if not inputs and not outputs:
            outputs = [rng.choice(pool)]
        run, _ = store.log_component_run(
            run_payload(rng.choice(components), start, end, inputs=inputs, outputs=outputs)
        )
        runs.append(run)
    return runs
