/** Client-side session state: revision tracking, the serialized gesture
 *  queue, and the one-refresh-per-gesture orchestration that keeps every
 *  widget on the same revision. */

import { ApiClient, ApiError } from "./api.js";
import type { BrushGesture, ColumnInfo, CombineMode, LoadResponse } from "./types.js";

export interface WidgetHandle {
  readonly id: string;
  lastRevision: number;
  refresh(revision: number): Promise<void>;
}

export type StoreListener = (store: SessionStore) => void;

export class SessionStore {
  sessionId = "";
  revision = -1;
  selectionCount = 0;
  selectionProvenance = "";
  nRows = 0;
  columns: ColumnInfo[] = [];
  subtypes: string[] = [];
  activeGtColumn: string | null = null;
  threshold = 0.5;
  /** Message surfaced when a stale gesture is discarded. */
  staleNotice: string | null = null;

  private widgets: WidgetHandle[] = [];
  private queue: Promise<unknown> = Promise.resolve();
  private listeners: StoreListener[] = [];

  constructor(readonly api: ApiClient) {}

  register(widget: WidgetHandle): void {
    this.widgets.push(widget);
  }

  onChange(listener: StoreListener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this);
  }

  /** All gestures run strictly one after another, keyed by the revision
   *  they observed; a failing gesture never blocks the next one. */
  private enqueue<T>(task: () => Promise<T>): Promise<T> {
    const next = this.queue.then(task, task);
    this.queue = next.catch(() => undefined);
    return next;
  }

  async load(body: {
    manifest_path?: string;
    manifest?: unknown;
    overlay_manifest?: string;
  }): Promise<LoadResponse> {
    return this.enqueue(async () => {
      const response = await this.api.load(body);
      this.sessionId = response.session_id;
      this.revision = response.revision;
      this.nRows = response.n_rows;
      this.selectionCount = response.n_rows;
      this.selectionProvenance = "all";
      this.columns = response.columns;
      this.subtypes = response.subtypes;
      this.activeGtColumn = response.active_gt_column;
      this.threshold = response.threshold;
      await this.refreshAll();
      return response;
    });
  }

  /** One settled gesture refreshes every widget exactly once. */
  private async refreshAll(): Promise<void> {
    await Promise.all(this.widgets.map((w) => w.refresh(this.revision)));
    this.notify();
  }

  /** True when every widget displays a payload stamped with the session
   *  revision it advertises. */
  isCoherent(): boolean {
    return this.widgets.every((w) => w.lastRevision === this.revision);
  }

  submitQuery(text: string, combine: CombineMode = "replace"): Promise<void> {
    return this.enqueue(async () => {
      const response = await this.api.runQuery(this.sessionId, { query: text, combine });
      this.revision = response.revision;
      this.selectionCount = response.count;
      this.selectionProvenance = response.provenance;
      this.staleNotice = null;
      await this.refreshAll();
    });
  }

  brush(gesture: BrushGesture): Promise<void> {
    return this.enqueue(async () => {
      if (gesture.combine === "intersect" && gesture.keys.length === 0) {
        throw new Error("intersect gestures require a non-empty key set");
      }
      if (gesture.revision !== this.revision) {
        // Stale: the selection moved under the widget. Discard, resync.
        this.staleNotice = `selection changed while brushing in ${gesture.source}; view refreshed`;
        await this.refreshAll();
        return;
      }
      const response = await this.api.runQuery(this.sessionId, {
        keys: gesture.keys,
        gesture: `${gesture.source}-brush`,
        combine: gesture.combine,
      });
      this.revision = response.revision;
      this.selectionCount = response.count;
      this.selectionProvenance = response.provenance;
      this.staleNotice = null;
      await this.refreshAll();
    });
  }

  setGroundTruth(column: string): Promise<void> {
    return this.enqueue(async () => {
      const response = await this.api.setGroundTruth(this.sessionId, column);
      this.revision = response.revision;
      this.activeGtColumn = column;
      await this.refreshAll();
    });
  }

  /** Poll the server; if its revision moved past ours (another client or
   *  tab), resync every widget once. */
  poll(): Promise<void> {
    return this.enqueue(async () => {
      const state = await this.api.saveState(this.sessionId);
      if (state.revision !== this.revision) {
        this.revision = state.revision;
        this.selectionCount = state.selection.keys.length;
        this.selectionProvenance = state.selection.provenance;
        this.activeGtColumn = state.active_gt_column;
        await this.refreshAll();
      }
    });
  }

  /** Columns eligible as ground truth: binary-valued by kind. */
  groundTruthCandidates(): ColumnInfo[] {
    return this.columns.filter((c) => c.value_kind === "binary");
  }

  predictionCandidates(): ColumnInfo[] {
    return this.columns.filter((c) => c.role === "prediction");
  }

  numericCandidates(): ColumnInfo[] {
    return this.columns.filter(
      (c) => c.value_kind === "numeric" || c.value_kind === "score" || c.value_kind === "binary",
    );
  }

  static isQuerySyntaxError(error: unknown): error is ApiError {
    return error instanceof ApiError && error.body.code === "query_syntax";
  }
}
