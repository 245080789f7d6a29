/** Typed client for the documented service routes — the only place the
 *  UI talks to the network. Every request is recorded so tests can assert
 *  the single-refresh invariant by counting. */

import type {
  CombineMode,
  ErrorBody,
  ImageDescriptor,
  LoadResponse,
  MetricsResponse,
  QueryResponse,
  SessionDocument,
  WidgetEnvelope,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ErrorBody,
  ) {
    super(body.message);
  }
}

export interface QueryRequest {
  query?: string;
  keys?: string[];
  gesture?: string;
  combine?: CombineMode;
  name?: string;
}

export class ApiClient {
  /** "METHOD path" per issued request, in order. */
  readonly requestLog: string[] = [];

  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    this.requestLog.push(`${method} ${path.split("?")[0]}`);
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      let parsed: ErrorBody;
      try {
        parsed = (await response.json()) as ErrorBody;
      } catch {
        parsed = { code: "http_error", message: `HTTP ${response.status}`, detail: null };
      }
      throw new ApiError(response.status, parsed);
    }
    return (await response.json()) as T;
  }

  load(body: {
    manifest_path?: string;
    manifest?: unknown;
    overlay_manifest?: string;
    threshold?: number;
  }): Promise<LoadResponse> {
    return this.request("POST", "/load", body);
  }

  setGroundTruth(sessionId: string, column: string): Promise<{ revision: number }> {
    return this.request("POST", `/session/${sessionId}/gt`, { column });
  }

  runQuery(sessionId: string, body: QueryRequest): Promise<QueryResponse> {
    return this.request("POST", `/session/${sessionId}/query`, body);
  }

  metrics(
    sessionId: string,
    predColumn: string,
    scope: "all" | "selection",
  ): Promise<MetricsResponse> {
    const params = new URLSearchParams({ pred_column: predColumn, scope });
    return this.request("GET", `/session/${sessionId}/metrics?${params}`);
  }

  widget<T extends WidgetEnvelope>(
    sessionId: string,
    name: string,
    params: Record<string, string>,
  ): Promise<T> {
    const search = new URLSearchParams(params);
    return this.request("GET", `/session/${sessionId}/widget/${name}?${search}`);
  }

  imageDescriptor(
    sessionId: string,
    scanId: string,
    layers: string[],
  ): Promise<ImageDescriptor> {
    const params = new URLSearchParams({ layers: layers.join(",") });
    return this.request("GET", `/session/${sessionId}/image/${scanId}?${params}`);
  }

  saveState(sessionId: string): Promise<SessionDocument> {
    return this.request("GET", `/session/${sessionId}/state`);
  }

  restoreState(sessionId: string, document: SessionDocument): Promise<{ session_id: string }> {
    return this.request("POST", `/session/${sessionId}/state`, document);
  }

  /** Absolute URL for binary layers (img src). */
  absolute(path: string): string {
    return this.baseUrl + path;
  }
}
