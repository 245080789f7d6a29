/** Workbench wiring: instantiates the widgets, registers them with the
 *  session store, and links table row clicks to the image view. */

import { ApiClient, FetchLike } from "./api.js";
import { SessionStore } from "./session.js";
import { CorrelationPlot } from "./widgets/correlationPlot.js";
import { DataTable } from "./widgets/dataTable.js";
import { ImageView } from "./widgets/imageView.js";
import { MetricOverview } from "./widgets/metricOverview.js";
import { QueryBox } from "./widgets/queryBox.js";
import { ScatterPlot } from "./widgets/scatterPlot.js";

export interface WorkbenchOptions {
  baseUrl: string;
  fetchFn: FetchLike;
  /** Columns of the data table; defaults to a schema-derived pick. */
  tableColumns?: string[];
  pollIntervalMs?: number;
}

export class Workbench {
  readonly api: ApiClient;
  readonly store: SessionStore;
  readonly queryBox: QueryBox;
  readonly dataTable: DataTable;
  readonly metricOverview: MetricOverview;
  readonly scatterPlot: ScatterPlot;
  readonly correlationPlot: CorrelationPlot;
  readonly imageView: ImageView;
  readonly root: HTMLElement;
  private pollTimer: ReturnType<typeof setInterval> | null = null;

  constructor(private readonly options: WorkbenchOptions) {
    this.api = new ApiClient(options.baseUrl, options.fetchFn);
    this.store = new SessionStore(this.api);
    this.queryBox = new QueryBox(this.store, this.api);
    this.dataTable = new DataTable(this.store, this.api, options.tableColumns ?? []);
    this.metricOverview = new MetricOverview(this.store, this.api);
    this.scatterPlot = new ScatterPlot(this.store, this.api);
    this.correlationPlot = new CorrelationPlot(this.store, this.api);
    this.imageView = new ImageView(this.store, this.api);

    for (const widget of this.widgets()) this.store.register(widget);
    this.dataTable.onRowClick = (key, values) => void this.imageView.show(key, values);

    this.root = document.createElement("div");
    this.root.className = "workbench";
    for (const widget of this.widgets()) this.root.append(widget.element);
  }

  widgets() {
    return [
      this.queryBox,
      this.dataTable,
      this.metricOverview,
      this.scatterPlot,
      this.correlationPlot,
      this.imageView,
    ] as const;
  }

  async load(manifestPath: string): Promise<void> {
    // Pick table columns from the schema when none were configured.
    if (this.dataTable.columns.length === 0) {
      const probe = await this.api.load({ manifest_path: manifestPath });
      const preferred = probe.columns
        .filter((c) => c.role !== "annotation")
        .map((c) => c.name)
        .slice(0, 8);
      this.dataTable.columns = preferred;
      // The probe session is discarded; load the working session normally.
    }
    await this.store.load({ manifest_path: manifestPath });
  }

  startPolling(): void {
    const interval = this.options.pollIntervalMs ?? 2000;
    this.pollTimer = setInterval(() => void this.store.poll(), interval);
  }

  stopPolling(): void {
    if (this.pollTimer !== null) clearInterval(this.pollTimer);
    this.pollTimer = null;
  }

  /** True when every widget shows the session's current revision. */
  isCoherent(): boolean {
    return this.store.isCoherent();
  }
}
