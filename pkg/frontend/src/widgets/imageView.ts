/** Image view: raw scan with client-drawn bounding boxes and an optional
 *  heatmap layer, plus the prediction scores of the shown row. Box
 *  geometry arrives as data and renders as SVG rects so layers toggle
 *  without re-fetching pixels. A 409 for a missing layer disables its
 *  toggle instead of erroring. */

import { ApiClient, ApiError } from "../api.js";
import { SessionStore } from "../session.js";
import type { ImageDescriptor, ScatterPoint } from "../types.js";
import { Widget, el } from "./base.js";

const SVG_NS = "http://www.w3.org/2000/svg";

const BOX_COLORS: Record<string, string> = {
  any: "#888888",
  epidural: "#d62728",
  intraparenchymal: "#1f77b4",
  intraventricular: "#2ca02c",
  subarachnoid: "#9467bd",
  subdural: "#ff7f0e",
};

interface ImageViewState {
  revision: number;
  descriptor: ImageDescriptor | null;
  heatmapAvailable: boolean;
  notFound: boolean;
}

export class ImageView extends Widget<ImageViewState> {
  scanId: string | null = null;
  rowValues: Record<string, ScatterPoint["value"]> = {};
  readonly boxToggle: HTMLInputElement;
  readonly heatmapToggle: HTMLInputElement;
  readonly stage: HTMLElement;
  readonly scorePanel: HTMLElement;

  constructor(store: SessionStore, api: ApiClient) {
    super("image-view", store, api);
    this.boxToggle = this.makeToggle("boxes", true);
    this.heatmapToggle = this.makeToggle("heatmap", false);
    this.stage = el("div", "image-stage");
    this.scorePanel = el("dl", "score-panel");
    this.element.append(this.stage, this.scorePanel);
  }

  private makeToggle(layer: string, checked: boolean): HTMLInputElement {
    const input = document.createElement("input");
    input.type = "checkbox";
    input.checked = checked;
    input.dataset.layer = layer;
    input.addEventListener("change", () => void this.refreshSelf());
    const label = el("label", `toggle-${layer}`, layer);
    label.prepend(input);
    this.element.append(label);
    return input;
  }

  /** Show one scan; row values (prediction scores etc.) come from the
   *  caller's already-fetched table row, so this costs one descriptor
   *  request only. */
  show(scanId: string, rowValues: Record<string, ScatterPoint["value"]> = {}): Promise<void> {
    this.scanId = scanId;
    this.rowValues = rowValues;
    return this.refreshSelf();
  }

  /** Toggle a layer and re-render (awaitable, unlike the checkbox event). */
  setLayer(layer: "boxes" | "heatmap", on: boolean): Promise<void> {
    const toggle = layer === "boxes" ? this.boxToggle : this.heatmapToggle;
    toggle.checked = on;
    return this.refreshSelf();
  }

  protected async fetchPayload(): Promise<ImageViewState> {
    if (!this.scanId) {
      return { revision: this.store.revision, descriptor: null, heatmapAvailable: true, notFound: false };
    }
    const layers = ["raw", "boxes"];
    if (this.heatmapToggle.checked) layers.push("heatmap");
    try {
      const descriptor = await this.api.imageDescriptor(this.store.sessionId, this.scanId, layers);
      return { revision: descriptor.revision, descriptor, heatmapAvailable: true, notFound: false };
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        // Heatmap absent for this scan: retry without it, disable the toggle.
        const descriptor = await this.api.imageDescriptor(this.store.sessionId, this.scanId, ["raw", "boxes"]);
        return { revision: descriptor.revision, descriptor, heatmapAvailable: false, notFound: false };
      }
      if (error instanceof ApiError && error.status === 404) {
        return { revision: this.store.revision, descriptor: null, heatmapAvailable: true, notFound: true };
      }
      throw error;
    }
  }

  protected render(state: ImageViewState): void {
    this.heatmapToggle.disabled = !state.heatmapAvailable;
    if (!state.heatmapAvailable) this.heatmapToggle.checked = false;
    if (state.notFound) {
      this.stage.replaceChildren(el("div", "placeholder", `scan ${this.scanId} not found`));
      this.scorePanel.replaceChildren();
      return;
    }
    if (!state.descriptor) {
      this.stage.replaceChildren(el("div", "placeholder", "select a row to view its scan"));
      this.scorePanel.replaceChildren();
      return;
    }
    const nodes: Element[] = [];
    if (state.descriptor.layers.raw) {
      const img = document.createElement("img");
      img.className = "layer-raw";
      img.src = this.api.absolute(state.descriptor.layers.raw);
      img.alt = `scan ${state.descriptor.scan_id}`;
      nodes.push(img);
    }
    if (this.heatmapToggle.checked && state.descriptor.layers.heatmap) {
      const img = document.createElement("img");
      img.className = "layer-heatmap";
      img.src = this.api.absolute(state.descriptor.layers.heatmap);
      img.alt = "model attention heatmap";
      nodes.push(img);
    }
    if (this.boxToggle.checked && state.descriptor.layers.boxes?.length) {
      const svg = document.createElementNS(SVG_NS, "svg");
      svg.setAttribute("class", "layer-boxes");
      for (const box of state.descriptor.layers.boxes) {
        const rect = document.createElementNS(SVG_NS, "rect");
        rect.setAttribute("x", String(box.x));
        rect.setAttribute("y", String(box.y));
        rect.setAttribute("width", String(box.width));
        rect.setAttribute("height", String(box.height));
        rect.setAttribute("fill", "none");
        rect.setAttribute("stroke", BOX_COLORS[box.subtype] ?? "#cccccc");
        rect.dataset.subtype = box.subtype;
        svg.append(rect);
      }
      nodes.push(svg);
    }
    this.stage.replaceChildren(...nodes);

    this.scorePanel.replaceChildren();
    for (const [column, value] of Object.entries(this.rowValues)) {
      if (!column.startsWith("pred_") || value === null) continue;
      this.scorePanel.append(el("dt", undefined, column));
      const dd = el("dd", undefined, typeof value === "number" ? value.toFixed(3) : String(value));
      dd.dataset.column = column;
      this.scorePanel.append(dd);
    }
  }
}
