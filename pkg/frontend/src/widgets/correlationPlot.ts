/** Correlation plot: Pearson r between two chosen columns (served by the
 *  pearson widget endpoint) plus the paired points for visual context. */

import { ApiClient, ApiError } from "../api.js";
import { SessionStore } from "../session.js";
import type { PearsonPayload, ScatterPayload, ScatterPoint } from "../types.js";
import { Widget, el, option } from "./base.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const SIZE = 180;
const PAD = 14;

interface CorrelationView {
  revision: number;
  pearson: number | null;
  nPairs: number;
  degenerate: string | null;
  pairs: Array<{ key: string; x: number; y: number }>;
}

export class CorrelationPlot extends Widget<CorrelationView> {
  readonly xSelect: HTMLSelectElement;
  readonly ySelect: HTMLSelectElement;
  readonly valueLabel: HTMLElement;

  constructor(store: SessionStore, api: ApiClient) {
    super("correlation-plot", store, api);
    this.xSelect = document.createElement("select");
    this.xSelect.className = "corr-x";
    this.ySelect = document.createElement("select");
    this.ySelect.className = "corr-y";
    this.xSelect.addEventListener("change", () => void this.refreshSelf());
    this.ySelect.addEventListener("change", () => void this.refreshSelf());
    this.valueLabel = el("div", "corr-value");
    const controls = el("div", "corr-controls");
    controls.append(el("label", undefined, "x"), this.xSelect, el("label", undefined, "y"), this.ySelect);
    this.element.append(controls, this.valueLabel);
  }

  private syncOptions(): void {
    const names = this.store.numericCandidates().map((c) => c.name);
    for (const select of [this.xSelect, this.ySelect]) {
      const current = Array.from(select.options).map((o) => o.value);
      if (names.join("\n") !== current.join("\n")) {
        const keep = select.value;
        select.replaceChildren(...names.map((name) => option(name)));
        select.value = names.includes(keep) ? keep : names[0] ?? "";
      }
    }
  }

  setColumns(x: string, y: string): Promise<void> {
    this.syncOptions();
    this.xSelect.value = x;
    this.ySelect.value = y;
    return this.refreshSelf();
  }

  pearsonValue(): number | null {
    const raw = this.valueLabel.dataset.pearson;
    return raw === undefined || raw === "" ? null : Number(raw);
  }

  protected async fetchPayload(): Promise<CorrelationView> {
    this.syncOptions();
    const x = this.xSelect.value;
    const y = this.ySelect.value;
    let pearson: number | null = null;
    let nPairs = 0;
    let degenerate: string | null = null;
    try {
      const payload = await this.api.widget<PearsonPayload>(this.store.sessionId, "pearson", {
        x_column: x,
        y_column: y,
        scope: "all",
      });
      pearson = payload.pearson;
      nPairs = payload.n_pairs;
    } catch (error) {
      if (error instanceof ApiError && error.body.code === "degenerate_input") {
        degenerate = error.body.message;
      } else {
        throw error;
      }
    }
    const series = await this.api.widget<ScatterPayload>(this.store.sessionId, "scatter", {
      columns: `${x},${y}`,
      scope: "all",
    });
    const byKey = new Map<string, ScatterPoint>();
    for (const point of series.series[x] ?? []) byKey.set(point.key, point);
    const pairs: CorrelationView["pairs"] = [];
    for (const point of series.series[y] ?? []) {
      const other = byKey.get(point.key);
      if (other && typeof other.value === "number" && typeof point.value === "number") {
        pairs.push({ key: point.key, x: other.value, y: point.value });
      }
    }
    return { revision: series.revision, pearson, nPairs, degenerate, pairs };
  }

  protected render(view: CorrelationView): void {
    if (view.degenerate !== null) {
      this.valueLabel.textContent = `r undefined: ${view.degenerate}`;
      this.valueLabel.dataset.pearson = "";
    } else {
      this.valueLabel.textContent = `r = ${view.pearson?.toFixed(4)} (n=${view.nPairs})`;
      this.valueLabel.dataset.pearson = String(view.pearson);
    }
    const svg = document.createElementNS(SVG_NS, "svg");
    svg.setAttribute("viewBox", `0 0 ${SIZE} ${SIZE}`);
    svg.setAttribute("width", String(SIZE));
    svg.setAttribute("height", String(SIZE));
    const xs = view.pairs.map((p) => p.x);
    const ys = view.pairs.map((p) => p.y);
    const xMax = Math.max(1e-9, ...xs);
    const yMax = Math.max(1e-9, ...ys);
    for (const pair of view.pairs) {
      const circle = document.createElementNS(SVG_NS, "circle");
      circle.setAttribute("cx", (PAD + (pair.x / xMax) * (SIZE - 2 * PAD)).toFixed(1));
      circle.setAttribute("cy", (SIZE - PAD - (pair.y / yMax) * (SIZE - 2 * PAD)).toFixed(1));
      circle.setAttribute("r", "2");
      circle.dataset.key = pair.key;
      svg.append(circle);
    }
    const oldSvg = this.element.querySelector("svg");
    if (oldSvg) oldSvg.replaceWith(svg);
    else this.element.append(svg);
  }
}
