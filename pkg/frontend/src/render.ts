import { layeredLayout } from "./layout.js";
import type {
  OutputRef,
  ReviewReport,
  RunRecord,
  RunSummary,
  TraceResult,
  TriggerResult,
} from "./wire.js";

/** Called with the pointer and its CURRENT flagged state; the handler
 * owns the optimistic mark and the server reconciliation. */
export type FlagToggle = (name: string, version: number, flagged: boolean, chip: HTMLElement) => void;

export const CARD_W = 200;
export const CARD_H = 84;
export const COL_GAP = 60;
export const ROW_GAP = 26;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) {
    node.className = cls;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function link(href: string, text: string, cls = ""): HTMLAnchorElement {
  const a = el("a", cls, text);
  a.href = href;
  return a;
}

export function runLink(runId: number): HTMLAnchorElement {
  return link(`#/run/${runId}`, `run ${runId}`, "run-link");
}

function componentLink(name: string): HTMLAnchorElement {
  return link(`#/history/${encodeURIComponent(name)}`, name, "component-link");
}

function pointerLabel(name: string, version: number): string {
  return `${name} v${version}`;
}

export function badges(stale: RunSummary["stale"], results: TriggerResult[]): HTMLElement {
  const box = el("span", "badges");
  if (stale.stale) {
    const b = el("span", "badge stale", "stale");
    b.title = stale.reasons.map((r) => r.detail || r.code).join("; ");
    box.appendChild(b);
  }
  for (const t of results) {
    if (t.status === "FAIL") {
      const b = el("span", "badge fail", `FAIL ${t.check_name}`);
      b.title = t.detail;
      box.appendChild(b);
    } else if (t.status === "ERROR") {
      const b = el("span", "badge error", `ERROR ${t.check_name}`);
      b.title = t.detail;
      box.appendChild(b);
    }
  }
  return box;
}

/** An artifact chip: name links to its trace, the flag button toggles. */
export function outputChip(ref: OutputRef, onToggle: FlagToggle): HTMLElement {
  const chip = el("span", ref.flagged ? "chip flagged" : "chip");
  chip.dataset.pointer = `${ref.name}:${ref.version}`;
  chip.dataset.flagged = String(ref.flagged);
  chip.appendChild(link(`#/trace/${encodeURIComponent(ref.name)}:${ref.version}`, pointerLabel(ref.name, ref.version)));
  const button = el("button", "flag-toggle", "⚑");
  button.type = "button";
  button.title = ref.flagged ? "unflag this output" : "flag this output for review";
  button.addEventListener("click", () => {
    onToggle(ref.name, ref.version, chip.dataset.flagged === "true", chip);
  });
  chip.appendChild(button);
  return chip;
}

export function runsTable(rows: RunSummary[], onToggle: FlagToggle): HTMLElement {
  if (!rows.length) {
    return el("p", "empty", "no runs");
  }
  const table = el("table", "runs");
  const head = el("tr");
  for (const title of ["run", "component", "start", "status", "outputs"]) {
    head.appendChild(el("th", "", title));
  }
  table.appendChild(head);
  for (const row of rows) {
    const tr = el("tr");
    tr.dataset.run = String(row.run_id);
    tr.appendChild(el("td")).appendChild(runLink(row.run_id));
    tr.appendChild(el("td")).appendChild(componentLink(row.component_name));
    tr.appendChild(el("td", "mono", row.start_time));
    tr.appendChild(el("td")).appendChild(badges(row.stale, row.trigger_results));
    const out = tr.appendChild(el("td", "outputs"));
    for (const ref of row.outputs) {
      out.appendChild(outputChip(ref, onToggle));
    }
    table.appendChild(tr);
  }
  return table;
}

export function traceView(trace: TraceResult, onToggle: FlagToggle): HTMLElement {
  const box = el("div", "trace");
  const head = el("h2", "", `trace of ${pointerLabel(trace.root.name, trace.root.version)}`);
  box.appendChild(head);

  const placed = layeredLayout(
    trace.nodes.map((n) => n.run_id),
    trace.edges,
  );
  const pos = new Map(placed.map((p) => [p.id, p]));
  const x = (layer: number) => layer * (CARD_W + COL_GAP);
  const y = (row: number) => row * (CARD_H + ROW_GAP);
  const maxLayer = Math.max(0, ...placed.map((p) => p.layer));
  const maxRow = Math.max(0, ...placed.map((p) => p.row));

  const canvas = el("div", "trace-canvas");
  canvas.style.width = `${x(maxLayer) + CARD_W}px`;
  canvas.style.height = `${y(maxRow) + CARD_H}px`;

  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("class", "trace-edges");
  svg.setAttribute("width", String(x(maxLayer) + CARD_W));
  svg.setAttribute("height", String(y(maxRow) + CARD_H));
  for (const [producer, consumer] of trace.edges) {
    const from = pos.get(producer);
    const to = pos.get(consumer);
    if (!from || !to) {
      continue;
    }
    const line = document.createElementNS("http://www.w3.org/2000/svg", "line");
    line.setAttribute("x1", String(x(from.layer) + CARD_W));
    line.setAttribute("y1", String(y(from.row) + CARD_H / 2));
    line.setAttribute("x2", String(x(to.layer)));
    line.setAttribute("y2", String(y(to.row) + CARD_H / 2));
    line.setAttribute("class", "edge");
    svg.appendChild(line);
  }
  canvas.appendChild(svg);

  const byId = new Map(trace.nodes.map((n) => [n.run_id, n]));
  for (const p of placed) {
    const node = byId.get(p.id);
    if (!node) {
      continue;
    }
    const card = el("div", "trace-card");
    card.dataset.run = String(p.id);
    card.dataset.layer = String(p.layer);
    card.dataset.row = String(p.row);
    card.style.left = `${x(p.layer)}px`;
    card.style.top = `${y(p.row)}px`;
    const title = el("div", "card-title");
    title.appendChild(runLink(node.run_id));
    title.appendChild(componentLink(node.component_name));
    card.appendChild(title);
    card.appendChild(badges(node.stale, node.trigger_results));
    const outs = el("div", "card-outputs");
    for (const ref of node.outputs) {
      outs.appendChild(outputChip(ref, onToggle));
    }
    card.appendChild(outs);
    canvas.appendChild(card);
  }
  box.appendChild(canvas);
  return box;
}

export function reviewView(report: ReviewReport, onToggle: FlagToggle): HTMLElement {
  const box = el("div", "review");
  box.appendChild(el("h2", "", "review"));
  if (!report.flagged.length) {
    box.appendChild(el("p", "empty", "no flagged outputs"));
    return box;
  }
  const flagged = box.appendChild(el("div", "flagged-list"));
  flagged.appendChild(el("h3", "", "flagged outputs"));
  for (const ref of report.flagged) {
    flagged.appendChild(outputChip({ ...ref, flagged: true }, onToggle));
  }

  box.appendChild(el("h3", "", "common upstream runs"));
  const table = el("table", "ranking");
  const head = el("tr");
  for (const title of ["rank", "run", "component", "count"]) {
    head.appendChild(el("th", "", title));
  }
  table.appendChild(head);
  report.ranking.forEach((entry, i) => {
    const tr = el("tr");
    tr.dataset.run = String(entry.run_id);
    tr.appendChild(el("td", "", String(i + 1)));
    tr.appendChild(el("td")).appendChild(runLink(entry.run_id));
    tr.appendChild(el("td")).appendChild(componentLink(entry.component_name));
    tr.appendChild(el("td", "", String(entry.count)));
    table.appendChild(tr);
  });
  box.appendChild(table);
  return box;
}

export function inspectView(run: RunRecord, flaggedKeys: Set<string>, onToggle: FlagToggle): HTMLElement {
  const box = el("div", "inspect");
  const head = el("h2");
  head.appendChild(el("span", "", `run ${run.run_id} `));
  head.appendChild(componentLink(run.component_name));
  box.appendChild(head);

  const meta = box.appendChild(el("dl", "meta"));
  const field = (label: string, value: string) => {
    meta.appendChild(el("dt", "", label));
    meta.appendChild(el("dd", "mono", value));
  };
  field("start", run.start_time);
  field("end", run.end_time);
  if (run.code_version) {
    field("code", run.code_version);
  }
  if (run.notes) {
    field("notes", run.notes);
  }
  for (const [name, value] of Object.entries(run.metrics)) {
    field(name, String(value));
  }
  if (run.dependencies.length) {
    meta.appendChild(el("dt", "", "depends on"));
    const dd = meta.appendChild(el("dd"));
    for (const dep of run.dependencies) {
      dd.appendChild(runLink(dep));
      dd.appendChild(document.createTextNode(" "));
    }
  }

  const io = box.appendChild(el("div", "io"));
  const section = (label: string, refs: RunRecord["inputs"]) => {
    io.appendChild(el("h3", "", label));
    const list = io.appendChild(el("div", "chips"));
    for (const ref of refs) {
      const flagged = flaggedKeys.has(`${ref.name}:${ref.version}`);
      list.appendChild(outputChip({ ...ref, flagged }, onToggle));
    }
    if (!refs.length) {
      list.appendChild(el("span", "empty", "none"));
    }
  };
  section("inputs", run.inputs);
  section("outputs", run.outputs);

  if (run.trigger_results.length) {
    box.appendChild(el("h3", "", "checks"));
    const list = box.appendChild(el("ul", "checks"));
    for (const t of run.trigger_results) {
      const metric = t.metric_value === null ? "" : ` metric=${t.metric_value}`;
      const li = el("li", `check ${t.status.toLowerCase()}`, `[${t.phase}] ${t.status} ${t.check_name}${metric}  ${t.detail}`);
      list.appendChild(li);
    }
  }
  if (run.stale.stale) {
    box.appendChild(el("h3", "", "staleness"));
    const list = box.appendChild(el("ul", "stale-reasons"));
    for (const reason of run.stale.reasons) {
      const age = reason.age_days === null ? "" : ` (${reason.age_days.toFixed(1)} days)`;
      list.appendChild(el("li", "", `${reason.code} ${reason.pointer ?? ""}${age}  ${reason.detail}`));
    }
  }
  return box;
}

export function heading(text: string): HTMLElement {
  return el("h2", "", text);
}

export function errorBanner(code: string, message: string, onRetry: () => void): HTMLElement {
  const banner = el("div", "banner error");
  const label = code === "UNREACHABLE" ? "connection error" : "error";
  banner.appendChild(el("strong", "", `${label} ${code}`));
  banner.appendChild(el("span", "", ` ${message} `));
  const retry = el("button", "retry", "retry");
  retry.type = "button";
  retry.addEventListener("click", onRetry);
  banner.appendChild(retry);
  return banner;
}
