import type { PointerVersion, ReviewReport, RunRecord, RunSummary, TraceResult } from "./wire.js";

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

interface JsonResponse {
  json(): Promise<unknown>;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<JsonResponse>;

interface Envelope {
  status?: unknown;
  payload?: unknown;
  error?: { code?: unknown; message?: unknown };
}

/** Thin envelope-aware client; the error code travels on the exception. */
export class Api {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly base = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((url, init) => globalThis.fetch(url, init));
  }

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    let res: JsonResponse;
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    try {
      res = await this.fetchFn(this.base + path, init);
    } catch (exc) {
      throw new ApiError("UNREACHABLE", `cannot reach the service: ${String(exc)}`);
    }
    let doc: Envelope;
    try {
      doc = (await res.json()) as Envelope;
    } catch {
      throw new ApiError("INTERNAL", "response body is not JSON");
    }
    if (doc && doc.status === "ok") {
      return doc.payload as T;
    }
    if (doc && doc.status === "error" && doc.error) {
      throw new ApiError(String(doc.error.code), String(doc.error.message));
    }
    throw new ApiError("INTERNAL", "malformed response envelope");
  }

  recent(limit = 50): Promise<RunSummary[]> {
    return this.call("GET", `/runs/recent?limit=${limit}`);
  }

  run(runId: number): Promise<RunRecord> {
    return this.call("GET", `/runs/${runId}`);
  }

  history(component: string, limit = 20): Promise<RunSummary[]> {
    return this.call("GET", `/components/${encodeURIComponent(component)}/history?limit=${limit}`);
  }

  trace(name: string, version?: number): Promise<TraceResult> {
    const suffix = version === undefined ? "" : `&version=${version}`;
    return this.call("GET", `/trace?name=${encodeURIComponent(name)}${suffix}`);
  }

  review(): Promise<ReviewReport> {
    return this.call("GET", "/review");
  }

  flag(name: string, version: number): Promise<PointerVersion> {
    return this.call("POST", "/flags", { name, version });
  }

  unflag(name: string, version: number): Promise<PointerVersion> {
    return this.call("DELETE", "/flags", { name, version });
  }
}
