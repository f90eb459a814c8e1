// Mirrors docs/wire.md. The UI never computes these shapes itself; every
// field on screen comes straight out of one endpoint response.

export interface PointerRef {
  name: string;
  version: number;
}

export interface OutputRef extends PointerRef {
  flagged: boolean;
}

export interface StaleReason {
  code: string;
  pointer: string | null;
  age_days: number | null;
  detail: string;
}

export interface StaleVerdict {
  stale: boolean;
  reasons: StaleReason[];
}

export interface TriggerResult {
  check_name: string;
  phase: string;
  status: string;
  metric_value: number | null;
  detail: string;
  evaluated_at: string;
}

export interface RunSummary {
  run_id: number;
  component_name: string;
  start_time: string;
  end_time: string;
  stale: StaleVerdict;
  trigger_results: TriggerResult[];
  inputs: PointerRef[];
  outputs: OutputRef[];
}

export interface SampleRecord {
  column: string;
  values: (number | null)[];
  captured_at?: string;
  source_run_id?: number;
  source_pointer?: string | null;
}

export interface RunRecord {
  run_id: number;
  component_name: string;
  start_time: string;
  end_time: string;
  inputs: PointerRef[];
  outputs: PointerRef[];
  dependencies: number[];
  samples: SampleRecord[];
  metrics: Record<string, number>;
  notes: string;
  code_version: string;
  trigger_results: TriggerResult[];
  stale: StaleVerdict;
}

export interface TraceResult {
  root: PointerRef;
  nodes: RunSummary[];
  edges: [number, number][];
  artifacts: PointerRef[];
}

export interface ReviewEntry {
  run_id: number;
  component_name: string;
  count: number;
}

export interface ReviewReport {
  flagged: PointerRef[];
  ranking: ReviewEntry[];
}

export interface PointerVersion extends PointerRef {
  producer_run_id: number | null;
  created_at: string;
  kind: string;
  flagged: boolean;
}
