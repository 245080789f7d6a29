/** Session-store invariants: one refresh per widget per gesture, strict
 *  revision monotonicity, stale-brush discard, serialized gesture queue,
 *  and error isolation. */

import { beforeEach, describe, expect, it } from "vitest";
import { Workbench } from "../src/app.js";
import { FakeService } from "./fakeService.js";

let fake: FakeService;
let wb: Workbench;

beforeEach(async () => {
  fake = new FakeService();
  wb = new Workbench({
    baseUrl: "http://fake",
    fetchFn: fake.fetch,
    tableColumns: ["agree_count_any", "pred_any", "epidural"],
  });
  await wb.load("fake://walkthrough");
});

function renderCounts(): Record<string, number> {
  return Object.fromEntries(wb.widgets().map((w) => [w.id, w.renderCount]));
}

describe("single-refresh invariant", () => {
  it("one gesture renders each widget exactly once", async () => {
    const before = renderCounts();
    const requestsBefore = wb.api.requestLog.length;
    await wb.store.submitQuery("agree_count_any == 3");
    const after = renderCounts();
    for (const id of Object.keys(before)) {
      expect(after[id] - before[id], id).toBe(1);
    }
    const issued = wb.api.requestLog.slice(requestsBefore);
    // 1 mutation + table scatter + metrics + scatter + correlation (pearson
    // + pairs); the image view is empty and issues nothing.
    expect(issued.filter((r) => r.startsWith("POST"))).toHaveLength(1);
    expect(issued).toHaveLength(6);
  });

  it("a prediction-column switch re-renders only the metric overview", async () => {
    const before = renderCounts();
    await wb.metricOverview.setPrediction("pred_subdural");
    const after = renderCounts();
    expect(after["metric-overview"] - before["metric-overview"]).toBe(1);
    for (const id of Object.keys(before)) {
      if (id !== "metric-overview") expect(after[id]).toBe(before[id]);
    }
  });
});

describe("revision discipline", () => {
  it("mutations advance the revision by exactly one", async () => {
    expect(wb.store.revision).toBe(0);
    await wb.store.submitQuery("agree_count_any == 3");
    expect(wb.store.revision).toBe(1);
    await wb.store.setGroundTruth("rad4_any");
    expect(wb.store.revision).toBe(2);
    await wb.store.submitQuery("");
    expect(wb.store.revision).toBe(3);
    expect(wb.isCoherent()).toBe(true);
  });

  it("reads never advance the revision", async () => {
    await wb.metricOverview.setPrediction("pred_any");
    await wb.correlationPlot.setColumns("agree_count_any", "pred_any");
    await wb.store.poll();
    expect(wb.store.revision).toBe(0);
  });

  it("poll resyncs after an out-of-band mutation", async () => {
    // Another client mutates the same session directly.
    await fake.fetch(`http://fake/session/${wb.store.sessionId}/query`, {
      method: "POST",
      body: JSON.stringify({ query: "agree_count_any == 2" }),
    });
    const before = renderCounts();
    await wb.store.poll();
    expect(wb.store.revision).toBe(1);
    expect(wb.store.selectionCount).toBe(28);
    expect(wb.isCoherent()).toBe(true);
    const after = renderCounts();
    expect(after["data-table"] - before["data-table"]).toBe(1);
  });
});

describe("brush gestures", () => {
  it("stale gestures are discarded with a refresh and no mutation", async () => {
    await wb.scatterPlot.setColumn("pred_any");
    const keys = wb.scatterPlot.plottedKeys().slice(0, 5);
    await wb.store.submitQuery("agree_count_any >= 0"); // advances revision
    const requestsBefore = wb.api.requestLog.length;
    const before = renderCounts();
    await wb.store.brush({ source: "scatter-plot", keys, combine: "replace", revision: 0 });
    expect(wb.store.staleNotice).toContain("refreshed");
    expect(wb.store.revision).toBe(1); // unchanged: no mutation happened
    const issued = wb.api.requestLog.slice(requestsBefore);
    expect(issued.filter((r) => r.startsWith("POST"))).toHaveLength(0);
    const after = renderCounts();
    for (const id of Object.keys(before)) {
      expect(after[id] - before[id], id).toBe(1); // resynced once
    }
    expect(wb.isCoherent()).toBe(true);
  });

  it("intersect gestures require a non-empty key set", async () => {
    await expect(
      wb.store.brush({ source: "scatter-plot", keys: [], combine: "intersect", revision: 0 }),
    ).rejects.toThrow(/non-empty/);
  });

  it("an intersect brush with a disjoint set empties every widget", async () => {
    await wb.store.submitQuery("agree_count_any == 3");
    await wb.store.brush({
      source: "scatter-plot",
      keys: ["scan0001"], // a k=4 scan, disjoint from the k=3 selection
      combine: "intersect",
      revision: wb.store.revision,
    });
    expect(wb.store.selectionCount).toBe(0);
    expect(wb.dataTable.rowCount()).toBe(0);
    expect(wb.scatterPlot.plottedKeys()).toHaveLength(0);
  });
});

describe("gesture queue", () => {
  it("serializes concurrent gestures in order", async () => {
    const first = wb.store.submitQuery("agree_count_any == 3");
    const second = wb.store.submitQuery("agree_count_any == 1");
    await Promise.all([first, second]);
    expect(wb.store.revision).toBe(2);
    expect(wb.store.selectionCount).toBe(25);
    expect(wb.queryBox.countLabel.dataset.count).toBe("25");
  });

  it("a failing gesture does not block the next one", async () => {
    wb.queryBox.input.value = "and and";
    await wb.queryBox.submit(); // server rejects; error rendered inline
    expect(wb.queryBox.errorLine.textContent).toContain("^");
    expect(wb.store.revision).toBe(0);
    await wb.store.submitQuery("agree_count_any == 1");
    expect(wb.store.selectionCount).toBe(25);
  });
});

describe("query box diagnostics", () => {
  it("renders the caret at the reported byte offset", async () => {
    wb.queryBox.input.value = "agree_count_any ==";
    await wb.queryBox.submit();
    const text = wb.queryBox.errorLine.textContent ?? "";
    expect(text).toContain("^");
    expect(wb.store.revision).toBe(0); // widgets untouched
  });

  it("unknown columns surface without breaking the session", async () => {
    wb.queryBox.input.value = "nope == 1";
    await wb.queryBox.submit();
    expect(wb.queryBox.errorLine.textContent).toContain("unknown column");
    await wb.store.submitQuery("agree_count_any == 4");
    expect(wb.store.selectionCount).toBe(161);
  });
});
