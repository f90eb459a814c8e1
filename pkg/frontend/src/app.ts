import { Api, ApiError } from "./api.js";
import {
  errorBanner,
  heading,
  inspectView,
  reviewView,
  runsTable,
  traceView,
} from "./render.js";

export type Route =
  | { kind: "recent" }
  | { kind: "review" }
  | { kind: "history"; component: string }
  | { kind: "trace"; name: string; version?: number }
  | { kind: "run"; runId: number };

/** `NAME` or `NAME:VERSION`; a trailing `:N` with N >= 1 is a version. */
export function parsePointer(text: string): { name: string; version?: number } {
  const cut = text.lastIndexOf(":");
  if (cut > 0) {
    const suffix = text.slice(cut + 1);
    if (/^[0-9]+$/.test(suffix) && Number(suffix) > 0) {
      return { name: text.slice(0, cut), version: Number(suffix) };
    }
  }
  return { name: text };
}

export function parseRoute(hash: string): Route {
  const parts = (hash.startsWith("#/") ? hash.slice(2) : hash).split("/");
  const head = parts[0] ?? "";
  const rest = parts.slice(1).map(decodeURIComponent).join("/");
  if (head === "review") {
    return { kind: "review" };
  }
  if (head === "history" && rest) {
    return { kind: "history", component: rest };
  }
  if (head === "trace" && rest) {
    return { kind: "trace", ...parsePointer(rest) };
  }
  if (head === "run" && /^[0-9]+$/.test(rest)) {
    return { kind: "run", runId: Number(rest) };
  }
  return { kind: "recent" };
}

export class App {
  private seq = 0;
  private currentHash = "#/recent";
  private route: Route = { kind: "recent" };
  private readonly pending = new Set<string>();
  private readonly view: HTMLElement;
  /** Resolves when the most recently started load or toggle settles;
   * tests await it instead of polling the DOM. */
  settled: Promise<void> = Promise.resolve();

  constructor(
    root: HTMLElement,
    private readonly api: Api,
  ) {
    root.textContent = "";
    root.appendChild(this.buildNav());
    this.view = document.createElement("main");
    this.view.className = "view";
    root.appendChild(this.view);
  }

  start(): void {
    window.addEventListener("hashchange", () => {
      this.settled = this.show(location.hash);
    });
    this.settled = this.show(location.hash);
  }

  private buildNav(): HTMLElement {
    const nav = document.createElement("nav");
    const brand = document.createElement("span");
    brand.className = "brand";
    brand.textContent = "lineatrace";
    nav.appendChild(brand);
    for (const [label, hash] of [
      ["recent", "#/recent"],
      ["review", "#/review"],
    ] as const) {
      const a = document.createElement("a");
      a.href = hash;
      a.textContent = label;
      nav.appendChild(a);
    }
    const form = document.createElement("form");
    form.className = "jump";
    const input = document.createElement("input");
    input.placeholder = "trace a pointer (name or name:version)";
    form.appendChild(input);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const value = input.value.trim();
      if (value) {
        location.hash = `#/trace/${encodeURIComponent(value).replace(/%3A/gi, ":")}`;
      }
    });
    nav.appendChild(form);
    return nav;
  }

  /** Load and render one view. Stale responses lose: only the latest
   * navigation is allowed to touch the DOM. */
  async show(hash: string): Promise<void> {
    const route = parseRoute(hash || "#/recent");
    const token = ++this.seq;
    this.currentHash = hash || "#/recent";
    this.route = route;
    try {
      const body = await this.build(route);
      if (token !== this.seq) {
        return;
      }
      this.view.textContent = "";
      this.view.appendChild(body);
    } catch (exc) {
      if (token !== this.seq) {
        return;
      }
      const err = exc instanceof ApiError ? exc : new ApiError("INTERNAL", String(exc));
      this.view.textContent = "";
      this.view.appendChild(
        errorBanner(err.code, err.message, () => {
          this.settled = this.show(this.currentHash);
        }),
      );
    }
  }

  private async build(route: Route): Promise<HTMLElement> {
    const toggle = this.toggleFlag;
    switch (route.kind) {
      case "recent": {
        const rows = await this.api.recent();
        const box = document.createElement("div");
        box.appendChild(heading("recent runs"));
        box.appendChild(runsTable(rows, toggle));
        return box;
      }
      case "history": {
        const rows = await this.api.history(route.component);
        const box = document.createElement("div");
        box.appendChild(heading(`history of ${route.component}`));
        box.appendChild(runsTable(rows, toggle));
        return box;
      }
      case "trace": {
        const result = await this.api.trace(route.name, route.version);
        return traceView(result, toggle);
      }
      case "review": {
        const report = await this.api.review();
        return reviewView(report, toggle);
      }
      case "run": {
        // run records carry no flag state, so membership in the review
        // listing decides how the output chips render
        const [run, report] = await Promise.all([this.api.run(route.runId), this.api.review()]);
        const flaggedKeys = new Set(report.flagged.map((ref) => `${ref.name}:${ref.version}`));
        return inspectView(run, flaggedKeys, toggle);
      }
    }
  }

  /** Optimistic flag toggle. Repeat clicks while the request is in
   * flight are dropped, so a double-click still yields one flag. */
  private toggleFlag = (name: string, version: number, flagged: boolean, chip: HTMLElement): void => {
    const key = `${name}:${version}`;
    if (this.pending.has(key)) {
      return;
    }
    this.pending.add(key);
    chip.classList.toggle("flagged", !flagged);
    chip.dataset.flagged = String(!flagged);
    this.settled = (async () => {
      try {
        const pv = flagged ? await this.api.unflag(name, version) : await this.api.flag(name, version);
        chip.classList.toggle("flagged", pv.flagged);
        chip.dataset.flagged = String(pv.flagged);
      } catch (exc) {
        chip.classList.toggle("flagged", flagged);
        chip.dataset.flagged = String(flagged);
        const err = exc instanceof ApiError ? exc : new ApiError("INTERNAL", String(exc));
        this.showActionError(err);
      } finally {
        this.pending.delete(key);
      }
      if (this.route.kind === "review") {
        await this.show(this.currentHash);
      }
    })();
  };

  private showActionError(err: ApiError): void {
    this.view.querySelector(".banner")?.remove();
    this.view.prepend(
      errorBanner(err.code, err.message, () => {
        this.settled = this.show(this.currentHash);
      }),
    );
  }
}
