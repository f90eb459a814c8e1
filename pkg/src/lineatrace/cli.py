"""Command-line client for the lineage service.

The eight debugging commands (recent, history, inspect, trace, tag,
flag, unflag, review) talk to a running service; `--local DIR` opens
the store directly instead. Store administration (serve, export,
import, fsck, simulate) always works on a local directory.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import httpx

from .errors import DomainError, ErrorCode
from .queries import (
    _resolve_pointer,
    history,
    recent,
    review,
    review_to_dict,
    stale_components,
    stale_to_dict,
    summary_to_dict,
    tag_query,
    trace,
    trace_to_dict,
)
from .records import canonical_dumps, loads_strict, pointer_to_dict, run_to_dict, spec_from_dict, spec_to_dict
from .service import resolve_addr
from .simulate import parse_fault, simulate
from .store import JOURNAL_NAME, Store, fsck as run_fsck


# --- transport: one service endpoint per command, or the library directly ---


class ServiceClient:
    def __init__(self, addr: str):
        self._base = f"http://{addr}"
        self._http = httpx.Client(base_url=self._base, timeout=30.0)

    def close(self) -> None:
        self._http.close()

    def _call(self, method: str, path: str, params: dict | None = None, body: dict | None = None):
        content = canonical_dumps(body) if body is not None else None
        try:
            response = self._http.request(method, path, params=params, content=content)
        except httpx.HTTPError as exc:
            raise DomainError(ErrorCode.UNREACHABLE, f"cannot reach service at {self._base}: {exc}") from exc
        try:
            doc = json.loads(response.text)
        except ValueError as exc:
            raise DomainError(ErrorCode.INTERNAL, f"service returned a non-envelope response: {exc}") from exc
        if doc.get("status") == "ok":
            return doc["payload"]
        error = doc.get("error") or {}
        try:
            code = ErrorCode(error.get("code"))
        except ValueError:
            code = ErrorCode.INTERNAL
        raise DomainError(code, str(error.get("message", "unknown error")))

    def recent(self, limit: int):
        return self._call("GET", "/runs/recent", params={"limit": limit})

    def history(self, name: str, limit: int):
        return self._call("GET", f"/components/{name}/history", params={"limit": limit})

    def inspect(self, run_id: int):
        return self._call("GET", f"/runs/{run_id}")

    def trace(self, name: str, version: int | None):
        params = {"name": name}
        if version is not None:
            params["version"] = version
        return self._call("GET", "/trace", params=params)

    def tag(self, tag: str):
        return self._call("GET", f"/tags/{tag}")

    def flag(self, name: str, version: int | None):
        return self._call("POST", "/flags", body=_flag_body(name, version))

    def unflag(self, name: str, version: int | None):
        return self._call("DELETE", "/flags", body=_flag_body(name, version))

    def review(self):
        return self._call("GET", "/review")

    def stale(self):
        return self._call("GET", "/stale")

    def register(self, doc: dict):
        return self._call("PUT", "/components", body=doc)

    def log(self, doc: dict):
        return self._call("POST", "/runs", body=doc)


def _flag_body(name: str, version: int | None) -> dict:
    body: dict = {"name": name}
    if version is not None:
        body["version"] = version
    return body


class LocalClient:
    """Same payloads as the service, produced without a network hop."""

    def __init__(self, directory: str | Path):
        self._store = Store(directory)

    def close(self) -> None:
        self._store.close()

    def recent(self, limit: int):
        return [summary_to_dict(s) for s in recent(self._store, limit)]

    def history(self, name: str, limit: int):
        return [summary_to_dict(s) for s in history(self._store, name, limit)]

    def inspect(self, run_id: int):
        return run_to_dict(self._store.get_run(run_id))

    def trace(self, name: str, version: int | None):
        return trace_to_dict(trace(self._store, name, version))

    def tag(self, tag: str):
        return [spec_to_dict(s) for s in tag_query(self._store, tag)]

    def flag(self, name: str, version: int | None):
        if version is None:
            version = _resolve_pointer(self._store.snapshot(), name, None).version
        return pointer_to_dict(self._store.set_flag(name, version))

    def unflag(self, name: str, version: int | None):
        if version is None:
            version = _resolve_pointer(self._store.snapshot(), name, None).version
        return pointer_to_dict(self._store.clear_flag(name, version))

    def review(self):
        return review_to_dict(review(self._store))

    def stale(self):
        return stale_to_dict(stale_components(self._store))

    def register(self, doc: dict):
        name = self._store.register_component(spec_from_dict(doc))
        return spec_to_dict(self._store.get_spec(name))

    def log(self, doc: dict):
        run, _ = self._store.log_component_run(doc)
        return run_to_dict(run)


# --- rendering ---


def emit_records(payload) -> None:
    items = payload if isinstance(payload, list) else [payload]
    for item in items:
        click.echo(canonical_dumps(item))


def _table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def _check_cell(trigger_results: list[dict]) -> str:
    bad = [t["check_name"] for t in trigger_results if t["status"] in ("FAIL", "ERROR")]
    pending = [t for t in trigger_results if t["status"] == "PENDING"]
    if bad:
        return "FAIL " + ",".join(bad)
    if pending:
        return "pending"
    return "ok" if trigger_results else "-"


def _refs_cell(refs: list[dict]) -> str:
    parts = []
    for r in refs:
        mark = "!" if r.get("flagged") else ""
        parts.append(f"{r['name']} v{r['version']}{mark}")
    return ", ".join(parts) if parts else "-"


def render_summaries(rows: list[dict]) -> None:
    if not rows:
        click.echo("no runs")
        return
    table_rows = [
        [
            str(r["run_id"]),
            r["component_name"],
            r["start_time"],
            "stale" if r["stale"]["stale"] else "-",
            _check_cell(r["trigger_results"]),
            _refs_cell(r["outputs"]),
        ]
        for r in rows
    ]
    click.echo(_table(["RUN", "COMPONENT", "START", "STALE", "CHECKS", "OUTPUTS"], table_rows))


def render_run(run: dict) -> None:
    click.echo(f"run {run['run_id']}  {run['component_name']}")
    click.echo(f"  start:   {run['start_time']}")
    click.echo(f"  end:     {run['end_time']}")
    if run.get("code_version"):
        click.echo(f"  code:    {run['code_version']}")
    if run.get("notes"):
        click.echo(f"  notes:   {run['notes']}")
    click.echo(f"  inputs:  {_refs_cell(run['inputs'])}")
    click.echo(f"  outputs: {_refs_cell(run['outputs'])}")
    deps = run.get("dependencies", [])
    if deps:
        click.echo(f"  depends: run {', run '.join(str(d) for d in deps)}")
    if run.get("metrics"):
        pairs = ", ".join(f"{k}={v}" for k, v in sorted(run["metrics"].items()))
        click.echo(f"  metrics: {pairs}")
    for t in run["trigger_results"]:
        metric = f" metric={t['metric_value']}" if t["metric_value"] is not None else ""
        click.echo(f"  check:   {t['check_name']} [{t['phase']}] {t['status']}{metric}  {t['detail']}")
    for reason in run["stale"]["reasons"]:
        age = f" ({reason['age_days']:.1f}d)" if reason["age_days"] is not None else ""
        click.echo(f"  stale:   {reason['code']} {reason['pointer']}{age}: {reason['detail']}")


def render_trace(payload: dict) -> None:
    root = payload["root"]
    click.echo(f"{root['name']} v{root['version']}")
    nodes = {n["run_id"]: n for n in payload["nodes"]}
    feeders: dict[int, list[int]] = {}
    for src, dst in payload["edges"]:
        feeders.setdefault(dst, []).append(src)
    root_run = next(
        (
            n["run_id"]
            for n in payload["nodes"]
            if any(o["name"] == root["name"] and o["version"] == root["version"] for o in n["outputs"])
        ),
        None,
    )
    if root_run is None:
        return

    def walk(run_id: int, depth: int) -> None:
        node = nodes[run_id]
        stale = "  [stale]" if node["stale"]["stale"] else ""
        checks = _check_cell(node["trigger_results"])
        suffix = f"  [{checks}]" if checks.startswith("FAIL") else ""
        click.echo("  " * depth + f"run {run_id}  {node['component_name']}  {node['start_time']}{stale}{suffix}")
        for src in sorted(feeders.get(run_id, ())):
            walk(src, depth + 1)

    walk(root_run, 1)


def render_specs(specs: list[dict]) -> None:
    if not specs:
        click.echo("no components")
        return
    rows = [[s["name"], s["owner"] or "-", ",".join(s["tags"]) or "-", s["description"] or "-"] for s in specs]
    click.echo(_table(["COMPONENT", "OWNER", "TAGS", "DESCRIPTION"], rows))


def render_review(payload: dict) -> None:
    if not payload["flagged"]:
        click.echo("no flagged outputs")
        return
    click.echo("flagged: " + ", ".join(f"{r['name']} v{r['version']}" for r in payload["flagged"]))
    rows = [
        [str(i + 1), str(e["run_id"]), e["component_name"], str(e["count"])]
        for i, e in enumerate(payload["ranking"])
    ]
    click.echo(_table(["RANK", "RUN", "COMPONENT", "COUNT"], rows))


# --- command plumbing ---


class CliState:
    def __init__(self, addr: str | None, local: str | None, fmt: str, limit: int | None):
        self.addr = addr
        self.local = local
        self.fmt = fmt
        self.limit = limit

    def client(self):
        if self.local is not None:
            return LocalClient(self.local)
        return ServiceClient(resolve_addr(self.addr))

    def require_local(self) -> str:
        if self.local is None:
            raise click.UsageError("this command works on a local store; pass --local DIR")
        return self.local


def _errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DomainError as exc:
            click.echo(f"error {exc.code.value}: {exc.message}", err=True)
            sys.exit(1)

    return wrapper


def parse_pointer_arg(text: str) -> tuple[str, int | None]:
    """NAME or NAME:VERSION; a non-numeric suffix is part of the name."""
    name, sep, suffix = text.rpartition(":")
    if sep and suffix.isdigit() and int(suffix) > 0:
        return name, int(suffix)
    return text, None


@click.group()
@click.option("--addr", metavar="HOST:PORT", default=None, help="Service address (default: $LINEATRACE_ADDR or 127.0.0.1:8421).")
@click.option("--local", "local_dir", metavar="DIR", default=None, help="Open the store directory directly instead of a service.")
@click.option("--format", "fmt", type=click.Choice(["table", "records"]), default="table", help="Output style.")
@click.option("--limit", type=int, default=None, help="Row cap for listing commands.")
@click.pass_context
def main(ctx: click.Context, addr: str | None, local_dir: str | None, fmt: str, limit: int | None) -> None:
    """Inspect and debug ML pipeline lineage."""
    ctx.obj = CliState(addr, local_dir, fmt, limit)


def _run_query(state: CliState, call, render) -> None:
    client = state.client()
    try:
        payload = call(client)
    finally:
        client.close()
    if state.fmt == "records":
        emit_records(payload)
    else:
        render(payload)


@main.command("recent")
@click.pass_obj
@_errors
def recent_cmd(state: CliState) -> None:
    """List the newest runs across all components."""
    limit = state.limit if state.limit is not None else 20
    _run_query(state, lambda c: c.recent(limit), render_summaries)


@main.command("history")
@click.argument("name")
@click.argument("n", required=False, type=int)
@click.pass_obj
@_errors
def history_cmd(state: CliState, name: str, n: int | None) -> None:
    """Show the latest runs of one component, newest first."""
    limit = n if n is not None else (state.limit if state.limit is not None else 10)
    _run_query(state, lambda c: c.history(name, limit), render_summaries)


@main.command("inspect")
@click.argument("run_id", type=int)
@click.pass_obj
@_errors
def inspect_cmd(state: CliState, run_id: int) -> None:
    """Show one run in full: io, checks, staleness, metrics."""
    _run_query(state, lambda c: c.inspect(run_id), render_run)


@main.command("trace")
@click.argument("pointer")
@click.pass_obj
@_errors
def trace_cmd(state: CliState, pointer: str) -> None:
    """Walk an artifact's producing runs back to its sources (NAME[:VERSION])."""
    name, version = parse_pointer_arg(pointer)
    _run_query(state, lambda c: c.trace(name, version), render_trace)


@main.command("tag")
@click.argument("tag")
@click.pass_obj
@_errors
def tag_cmd(state: CliState, tag: str) -> None:
    """List components carrying a tag."""
    _run_query(state, lambda c: c.tag(tag), render_specs)


@main.command("flag")
@click.argument("pointer")
@click.pass_obj
@_errors
def flag_cmd(state: CliState, pointer: str) -> None:
    """Mark an output version as suspect (NAME[:VERSION], default latest)."""
    name, version = parse_pointer_arg(pointer)
    _run_query(state, lambda c: c.flag(name, version), lambda p: click.echo(f"flagged {p['name']} v{p['version']}"))


@main.command("unflag")
@click.argument("pointer")
@click.pass_obj
@_errors
def unflag_cmd(state: CliState, pointer: str) -> None:
    """Clear a suspect mark (NAME[:VERSION], default latest)."""
    name, version = parse_pointer_arg(pointer)
    _run_query(state, lambda c: c.unflag(name, version), lambda p: click.echo(f"unflagged {p['name']} v{p['version']}"))


@main.command("review")
@click.pass_obj
@_errors
def review_cmd(state: CliState) -> None:
    """Rank runs by how many flagged outputs their work feeds."""
    _run_query(state, lambda c: c.review(), render_review)


@main.command("stale")
@click.pass_obj
@_errors
def stale_cmd(state: CliState) -> None:
    """List components whose latest run has a stale verdict."""

    def render(payload: list[dict]) -> None:
        if not payload:
            click.echo("no stale components")
            return
        rows = []
        for entry in payload:
            reasons = "; ".join(f"{r['code']}: {r['detail']}" for r in entry["stale"]["reasons"])
            rows.append([entry["component"], reasons])
        click.echo(_table(["COMPONENT", "REASONS"], rows))

    _run_query(state, lambda c: c.stale(), render)


def _read_doc(path: str) -> dict:
    text = sys.stdin.read() if path == "-" else Path(path).read_text("utf-8")
    return loads_strict(text)


@main.command("register")
@click.argument("file", metavar="SPEC_FILE")
@click.pass_obj
@_errors
def register_cmd(state: CliState, file: str) -> None:
    """Create or replace a component from a spec document ('-' for stdin)."""
    doc = _read_doc(file)
    _run_query(state, lambda c: c.register(doc), lambda p: click.echo(f"registered {p['name']}"))


@main.command("log")
@click.argument("file", metavar="RUN_FILE")
@click.pass_obj
@_errors
def log_cmd(state: CliState, file: str) -> None:
    """Submit one run record from a document ('-' for stdin)."""
    doc = _read_doc(file)
    _run_query(state, lambda c: c.log(doc), lambda p: click.echo(f"run {p['run_id']} logged for {p['component_name']}"))


# --- local store administration ---


@main.command("serve")
@click.option("--listen", metavar="HOST:PORT", default=None, help="Bind address (default: $LINEATRACE_ADDR or 127.0.0.1:8421).")
@click.option("--ui", "ui_dir", metavar="DIR", default=None, help="Static UI bundle to serve under /ui/.")
@click.pass_obj
@_errors
def serve_cmd(state: CliState, listen: str | None, ui_dir: str | None) -> None:
    """Run the HTTP service over the --local store."""
    from .service import serve

    directory = state.require_local()
    store = Store(directory)
    try:
        serve(store, listen=listen, ui_dir=ui_dir)
    finally:
        store.close()


@main.command("export")
@click.argument("dest", required=False, default="-")
@click.pass_obj
@_errors
def export_cmd(state: CliState, dest: str) -> None:
    """Write the journal to DEST ('-' for stdout); the file is a full backup."""
    directory = state.require_local()
    store = Store(directory)
    try:
        if dest == "-":
            journal = Path(directory) / JOURNAL_NAME
            sys.stdout.buffer.write(journal.read_bytes() if journal.exists() else b"")
            sys.stdout.buffer.flush()
        else:
            count = store.export_journal(dest)
            click.echo(f"exported {count} records to {dest}")
    finally:
        store.close()


@main.command("import")
@click.argument("src")
@click.pass_obj
@_errors
def import_cmd(state: CliState, src: str) -> None:
    """Load an exported journal into an empty --local store."""
    directory = state.require_local()
    store = Store(directory)
    try:
        count = store.import_journal(src)
    finally:
        store.close()
    click.echo(f"imported {count} records")


@main.command("fsck")
@click.pass_obj
@_errors
def fsck_cmd(state: CliState) -> None:
    """Verify the --local store and heal its index snapshot."""
    directory = state.require_local()
    report = run_fsck(directory)
    click.echo(f"journal:    {report.path}")
    click.echo(f"records:    {report.records}")
    click.echo(f"components: {report.components}  runs: {report.runs}  pointers: {report.pointer_versions}")
    click.echo(f"flagged:    {report.flagged}  alerts: {report.alerts}")
    if report.truncated_bytes:
        click.echo(f"truncated:  {report.truncated_bytes} bytes of torn tail discarded")
    for divergence in report.divergences:
        click.echo(f"divergence: {divergence}")
    click.echo("clean" if report.clean else "healed (re-run to confirm a clean state)")
    if not report.clean:
        sys.exit(1)


@main.command("simulate")
@click.option("--seed", type=int, required=True)
@click.option("--runs", type=int, default=20, show_default=True)
@click.option("--components", type=int, default=3, show_default=True)
@click.option("--fault", "faults", multiple=True, metavar="KIND:K=V,...", help="e.g. drift_shift:run=15 or stale_age:run=12,days=45")
@click.pass_obj
@_errors
def simulate_cmd(state: CliState, seed: int, runs: int, components: int, faults: tuple[str, ...]) -> None:
    """Fill the empty --local store with a deterministic demo pipeline."""
    directory = state.require_local()
    plan = tuple(parse_fault(f) for f in faults)
    report = simulate(directory, seed=seed, runs=runs, components=components, faults=plan)
    click.echo(
        f"simulated {report.runs} runs over {report.components} components "
        f"(seed {report.seed}, {len(report.faults)} faults, {report.alerts_fired} alerts)"
    )


if __name__ == "__main__":
    main()
