/** Textual query box: submits filter queries; parser diagnostics render
 *  inline at the reported byte offset without touching other widgets. */

import { ApiClient, ApiError } from "../api.js";
import { SessionStore } from "../session.js";
import { Widget, el } from "./base.js";

interface QueryBoxPayload {
  revision: number;
  count: number;
  provenance: string;
}

export class QueryBox extends Widget<QueryBoxPayload> {
  readonly input: HTMLInputElement;
  readonly submitButton: HTMLButtonElement;
  readonly errorLine: HTMLElement;
  readonly countLabel: HTMLElement;

  constructor(store: SessionStore, api: ApiClient) {
    super("query-box", store, api);
    this.input = document.createElement("input");
    this.input.type = "text";
    this.input.className = "query-input";
    this.input.placeholder = 'e.g. agree_count_any == 1';
    this.submitButton = document.createElement("button");
    this.submitButton.textContent = "filter";
    this.submitButton.addEventListener("click", () => void this.submit());
    this.input.addEventListener("keydown", (event) => {
      if (event.key === "Enter") void this.submit();
    });
    this.errorLine = el("pre", "query-error");
    this.countLabel = el("span", "selection-count");
    const row = el("div", "query-row");
    row.append(this.input, this.submitButton, this.countLabel);
    this.element.append(row, this.errorLine);
  }

  async submit(): Promise<void> {
    this.errorLine.textContent = "";
    try {
      await this.store.submitQuery(this.input.value);
    } catch (error) {
      if (SessionStore.isQuerySyntaxError(error)) {
        this.showDiagnostic(error);
        return;
      }
      if (error instanceof ApiError) {
        this.errorLine.textContent = error.body.message;
        return;
      }
      throw error;
    }
  }

  /** Inline caret under the offending byte offset. */
  private showDiagnostic(error: ApiError): void {
    const detail = error.body.detail as { offset?: number } | null;
    const offset = detail?.offset ?? 0;
    this.errorLine.textContent = `${this.input.value}\n${" ".repeat(offset)}^ ${error.body.message}`;
  }

  protected async fetchPayload(): Promise<QueryBoxPayload> {
    // Selection summary comes from store state; no extra request.
    return {
      revision: this.store.revision,
      count: this.store.selectionCount,
      provenance: this.store.selectionProvenance,
    };
  }

  protected render(payload: QueryBoxPayload): void {
    this.countLabel.textContent = `${payload.count} of ${this.store.nRows} selected`;
    this.countLabel.dataset.count = String(payload.count);
  }
}
