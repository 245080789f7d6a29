/** Payload shapes of the analysis service's JSON API. */

export interface ColumnInfo {
  name: string;
  role: "annotation" | "prediction" | "metadata" | "derived";
  value_kind: "binary" | "score" | "numeric" | "categorical" | "text";
  annotator: string | null;
  subtype: string | null;
}

export interface LoadResponse {
  session_id: string;
  revision: number;
  fingerprint: string;
  n_rows: number;
  level: string;
  active_gt_column: string | null;
  threshold: number;
  subtypes: string[];
  columns: ColumnInfo[];
}

export interface QueryResponse {
  revision: number;
  count: number;
  provenance: string;
  canonical: string;
}

export interface MetricReport {
  gt_column: string;
  pred_column: string;
  threshold: number;
  tp: number;
  tn: number;
  fp: number;
  fn: number;
  support_positive: number;
  n_evaluated: number;
  accuracy: number;
  precision: number;
  recall: number;
  f1: number;
  accuracy_pct: string;
  precision_pct: string;
  recall_pct: string;
  f1_pct: string;
}

export interface MetricsResponse extends MetricReport {
  revision: number;
  scope: string;
}

export interface OverlapRow {
  k: number;
  cases: number;
  model_true: number;
  model_false: number;
  overlap: number;
  overlap_pct: string;
}

export interface ScatterPoint {
  index: number;
  key: string;
  value: number | string | null;
}

export interface WidgetEnvelope {
  revision: number;
  widget: string;
  scope: string;
}

export interface ScatterPayload extends WidgetEnvelope {
  series: Record<string, ScatterPoint[]>;
}

export interface PearsonPayload extends WidgetEnvelope {
  pearson: number;
  n_pairs: number;
}

export interface OverlapPayload extends WidgetEnvelope {
  rows: OverlapRow[];
}

export interface BoundingBox {
  subtype: string;
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface ImageDescriptor {
  scan_id: string;
  revision: number;
  layers: {
    raw?: string;
    boxes?: BoundingBox[];
    heatmap?: string;
  };
}

export interface SessionDocument {
  version: number;
  fingerprint: string;
  active_gt_column: string | null;
  threshold: number;
  tie_policy: string;
  named_queries: Record<string, string>;
  selection: { keys: string[]; provenance: string };
  revision: number;
}

export interface ErrorBody {
  code: string;
  message: string;
  detail: unknown;
}

export type CombineMode = "replace" | "intersect";

/** A selection gesture raised by a widget (linked brushing). */
export interface BrushGesture {
  source: string;
  keys: string[];
  combine: CombineMode;
  /** Revision of the payload the gesture was drawn from; stale gestures
   *  (older than the session revision) are discarded with a refresh. */
  revision: number;
}
