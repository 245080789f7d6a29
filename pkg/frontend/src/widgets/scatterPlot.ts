/** Scatter plot of one column over the current selection (row index on
 *  x, value on y). Binary columns get deterministic display jitter so
 *  overlapping 0/1 points separate; the underlying data is untouched.
 *  Dragging a rectangle (or calling brushKeys) raises a linked-brushing
 *  gesture stamped with the payload's revision. */

import { ApiClient } from "../api.js";
import { SessionStore } from "../session.js";
import type { CombineMode, ScatterPayload, ScatterPoint } from "../types.js";
import { Widget, el, option } from "./base.js";

const WIDTH = 420;
const HEIGHT = 160;
const PAD = 16;
const SVG_NS = "http://www.w3.org/2000/svg";

/** Small deterministic hash -> [0, 1) for display jitter. */
function jitter01(key: string): number {
  let h = 2166136261;
  for (let i = 0; i < key.length; i++) {
    h ^= key.charCodeAt(i);
    h = Math.imul(h, 16777619);
  }
  return ((h >>> 0) % 1000) / 1000;
}

export class ScatterPlot extends Widget<ScatterPayload> {
  readonly columnSelect: HTMLSelectElement;
  readonly combineSelect: HTMLSelectElement;
  private points: ScatterPoint[] = [];
  private svg: SVGSVGElement | null = null;
  private dragStart: { x: number; y: number } | null = null;

  constructor(store: SessionStore, api: ApiClient) {
    super("scatter-plot", store, api);
    this.columnSelect = document.createElement("select");
    this.columnSelect.className = "scatter-column";
    this.columnSelect.addEventListener("change", () => void this.refreshSelf());
    this.combineSelect = document.createElement("select");
    this.combineSelect.className = "scatter-combine";
    this.combineSelect.append(option("replace"), option("intersect"));
    const controls = el("div", "scatter-controls");
    controls.append(el("label", undefined, "column"), this.columnSelect, this.combineSelect);
    this.element.append(controls);
  }

  private syncOptions(): void {
    const names = this.store.numericCandidates().map((c) => c.name);
    const current = Array.from(this.columnSelect.options).map((o) => o.value);
    if (names.join("\n") !== current.join("\n")) {
      const keep = this.columnSelect.value;
      this.columnSelect.replaceChildren(...names.map((name) => option(name)));
      this.columnSelect.value = names.includes(keep) ? keep : names[0] ?? "";
    }
  }

  setColumn(name: string): Promise<void> {
    this.syncOptions();
    this.columnSelect.value = name;
    return this.refreshSelf();
  }

  /** Keys of the currently plotted points, in payload order. */
  plottedKeys(): string[] {
    return this.points.map((p) => p.key);
  }

  /** Programmatic brushing entry, also used by the drag handler. */
  brushKeys(keys: string[], combine?: CombineMode): Promise<void> {
    return this.store.brush({
      source: this.id,
      keys,
      combine: combine ?? (this.combineSelect.value as CombineMode),
      revision: this.lastRevision,
    });
  }

  protected fetchPayload(): Promise<ScatterPayload> {
    this.syncOptions();
    const column = this.columnSelect.value;
    return this.api.widget<ScatterPayload>(this.store.sessionId, "scatter", {
      columns: column || "",
      scope: "selection",
    });
  }

  private pointPosition(point: ScatterPoint, isBinary: boolean): { cx: number; cy: number } {
    const n = Math.max(this.store.nRows - 1, 1);
    const cx = PAD + (point.index / n) * (WIDTH - 2 * PAD);
    let value = typeof point.value === "number" ? point.value : 0;
    let displayed = value;
    if (isBinary) displayed = value + (jitter01(point.key) - 0.5) * 0.3;
    const max = isBinary ? 1.15 : Math.max(1, ...this.points.map((p) => (typeof p.value === "number" ? p.value : 0)));
    const min = isBinary ? -0.15 : 0;
    const cy = HEIGHT - PAD - ((displayed - min) / (max - min || 1)) * (HEIGHT - 2 * PAD);
    return { cx, cy };
  }

  protected render(payload: ScatterPayload): void {
    const column = this.columnSelect.value;
    this.points = (payload.series[column] ?? []).filter((p) => p.value !== null);
    const schema = this.store.columns.find((c) => c.name === column);
    const isBinary = schema?.value_kind === "binary";

    const svg = document.createElementNS(SVG_NS, "svg");
    svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
    svg.setAttribute("width", String(WIDTH));
    svg.setAttribute("height", String(HEIGHT));
    for (const point of this.points) {
      const { cx, cy } = this.pointPosition(point, Boolean(isBinary));
      const circle = document.createElementNS(SVG_NS, "circle");
      circle.setAttribute("cx", cx.toFixed(1));
      circle.setAttribute("cy", cy.toFixed(1));
      circle.setAttribute("r", "2.5");
      circle.dataset.key = point.key;
      circle.dataset.value = String(point.value);
      svg.append(circle);
    }
    svg.addEventListener("mousedown", (event) => {
      this.dragStart = { x: event.offsetX, y: event.offsetY };
    });
    svg.addEventListener("mouseup", (event) => {
      if (!this.dragStart) return;
      const x0 = Math.min(this.dragStart.x, event.offsetX);
      const x1 = Math.max(this.dragStart.x, event.offsetX);
      const y0 = Math.min(this.dragStart.y, event.offsetY);
      const y1 = Math.max(this.dragStart.y, event.offsetY);
      this.dragStart = null;
      const picked = this.points.filter((point) => {
        const { cx, cy } = this.pointPosition(point, Boolean(isBinary));
        return cx >= x0 && cx <= x1 && cy >= y0 && cy <= y1;
      });
      if (picked.length) void this.brushKeys(picked.map((p) => p.key));
    });

    const old = this.svg;
    this.svg = svg;
    if (old) old.replaceWith(svg);
    else this.element.append(svg);
  }
}
