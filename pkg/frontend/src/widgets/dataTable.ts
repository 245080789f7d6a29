/** Metadata table over the current selection. Row data comes from the
 *  scatter-series widget endpoint (values per column, selection order);
 *  clicking a row opens it in the image view. */

import { ApiClient } from "../api.js";
import { SessionStore } from "../session.js";
import type { ScatterPayload, ScatterPoint } from "../types.js";
import { Widget, el } from "./base.js";

export class DataTable extends Widget<ScatterPayload> {
  columns: string[];
  maxRows = 200;
  onRowClick: ((key: string, values: Record<string, ScatterPoint["value"]>) => void) | null = null;

  constructor(store: SessionStore, api: ApiClient, columns: string[]) {
    super("data-table", store, api);
    this.columns = columns;
  }

  rowCount(): number {
    return this.element.querySelectorAll("tbody tr").length;
  }

  protected fetchPayload(): Promise<ScatterPayload> {
    return this.api.widget<ScatterPayload>(this.store.sessionId, "scatter", {
      columns: this.columns.join(","),
      scope: "selection",
    });
  }

  protected render(payload: ScatterPayload): void {
    const table = document.createElement("table");
    const head = el("tr");
    head.append(el("th", undefined, "scan"));
    for (const column of this.columns) head.append(el("th", undefined, column));
    const thead = el("thead");
    thead.append(head);

    const tbody = el("tbody");
    const first = payload.series[this.columns[0]] ?? [];
    first.slice(0, this.maxRows).forEach((point, rowIndex) => {
      const row = document.createElement("tr");
      row.dataset.key = point.key;
      row.append(el("td", "key-cell", point.key));
      const values: Record<string, ScatterPoint["value"]> = {};
      for (const column of this.columns) {
        const cell = payload.series[column][rowIndex];
        values[column] = cell.value;
        row.append(el("td", undefined, cell.value === null ? "·" : String(cell.value)));
      }
      row.addEventListener("click", () => this.onRowClick?.(point.key, values));
      tbody.append(row);
    });

    const caption = el(
      "div",
      "table-caption",
      `${first.length} rows in selection${first.length > this.maxRows ? ` (showing ${this.maxRows})` : ""}`,
    );
    table.append(thead, tbody);
    this.element.replaceChildren(caption, table);
  }
}
