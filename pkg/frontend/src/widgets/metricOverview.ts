/** Metric overview card: switchable ground-truth and prediction columns.
 *  Every number on the card comes from the service verbatim; switching
 *  ground truth is a server mutation (all widgets resync), switching the
 *  prediction column re-renders only this card. */

import { ApiClient } from "../api.js";
import { SessionStore } from "../session.js";
import type { MetricsResponse } from "../types.js";
import { Widget, el, option } from "./base.js";

export class MetricOverview extends Widget<MetricsResponse> {
  readonly gtSelect: HTMLSelectElement;
  readonly predSelect: HTMLSelectElement;
  readonly scopeSelect: HTMLSelectElement;
  readonly card: HTMLElement;
  readonly toast: HTMLElement;

  constructor(store: SessionStore, api: ApiClient) {
    super("metric-overview", store, api);
    this.gtSelect = document.createElement("select");
    this.gtSelect.className = "gt-select";
    this.predSelect = document.createElement("select");
    this.predSelect.className = "pred-select";
    this.scopeSelect = document.createElement("select");
    this.scopeSelect.className = "scope-select";
    this.scopeSelect.append(option("all"), option("selection"));
    this.card = el("div", "metric-card");
    this.toast = el("div", "toast");

    this.gtSelect.addEventListener("change", () => void this.switchGroundTruth());
    this.predSelect.addEventListener("change", () => void this.refreshSelf());
    this.scopeSelect.addEventListener("change", () => void this.refreshSelf());

    const controls = el("div", "metric-controls");
    controls.append(
      el("label", undefined, "ground truth"), this.gtSelect,
      el("label", undefined, "prediction"), this.predSelect,
      el("label", undefined, "scope"), this.scopeSelect,
    );
    this.element.append(controls, this.card, this.toast);
  }

  private syncOptions(): void {
    const gtNames = this.store.groundTruthCandidates().map((c) => c.name);
    if (gtNames.join("\n") !== Array.from(this.gtSelect.options).map((o) => o.value).join("\n")) {
      this.gtSelect.replaceChildren(...gtNames.map((name) => option(name)));
    }
    if (this.store.activeGtColumn) this.gtSelect.value = this.store.activeGtColumn;
    const predNames = this.store.predictionCandidates().map((c) => c.name);
    if (predNames.join("\n") !== Array.from(this.predSelect.options).map((o) => o.value).join("\n")) {
      this.predSelect.replaceChildren(...predNames.map((name) => option(name)));
      if (predNames.length) this.predSelect.value = predNames[0];
    }
  }

  async switchGroundTruth(): Promise<void> {
    this.toast.textContent = "";
    try {
      await this.store.setGroundTruth(this.gtSelect.value);
    } catch (error) {
      // Server rejected the column (e.g. not binary-valued): surface and revert.
      this.toast.textContent =
        error instanceof Error ? `${this.gtSelect.value}: ${error.message}` : String(error);
      if (this.store.activeGtColumn) this.gtSelect.value = this.store.activeGtColumn;
    }
  }

  setPrediction(column: string): Promise<void> {
    this.syncOptions();
    this.predSelect.value = column;
    return this.refreshSelf();
  }

  protected fetchPayload(): Promise<MetricsResponse> {
    this.syncOptions();
    return this.api.metrics(
      this.store.sessionId,
      this.predSelect.value,
      this.scopeSelect.value as "all" | "selection",
    );
  }

  protected render(payload: MetricsResponse): void {
    const rows: [string, string][] = [
      ["accuracy", payload.accuracy_pct],
      ["precision", payload.precision_pct],
      ["recall", payload.recall_pct],
      ["f1", payload.f1_pct],
      ["occasions", String(payload.support_positive)],
      ["evaluated", String(payload.n_evaluated)],
      ["tp / fn", `${payload.tp} / ${payload.fn}`],
      ["fp / tn", `${payload.fp} / ${payload.tn}`],
    ];
    const list = el("dl", "metric-list");
    for (const [label, value] of rows) {
      list.append(el("dt", undefined, label));
      const dd = el("dd", `metric-${label.replace(/[ /]+/g, "-")}`, value);
      dd.dataset.metric = label;
      list.append(dd);
    }
    const heading = el(
      "div",
      "metric-heading",
      `${payload.gt_column} vs ${payload.pred_column} @ ${payload.threshold}`,
    );
    this.card.replaceChildren(heading, list);
  }

  metricText(name: string): string | null {
    const node = this.card.querySelector(`dd[data-metric="${name}"]`);
    return node?.textContent ?? null;
  }
}
