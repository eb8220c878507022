import { beforeEach, describe, expect, it, vi } from "vitest";

import {
  CHART_WIDTH,
  SeriesChart,
  chartXFromClient,
  indexForX,
  xForIndex,
} from "../src/chart.js";
import type { DetectionRecord } from "../src/types.js";

function detection(overrides: Partial<DetectionRecord> = {}): DetectionRecord {
  return {
    detection_id: "s~80~abc",
    series_id: "s",
    index: 80,
    run_fingerprint: "abc",
    created_at: "t0",
    status: "pending",
    modified_index: null,
    annotator: null,
    decided_at: null,
    previously_removed: false,
    ...overrides,
  };
}

describe("coordinate mapping", () => {
  it("round-trips indices through x positions", () => {
    const n = 161;
    for (const i of [0, 1, 42, 80, 159, 160]) {
      expect(indexForX(xForIndex(i, n), n)).toBe(i);
    }
  });

  it("snaps to integers and clamps to the series range", () => {
    const n = 100;
    expect(indexForX(-(10 ** 6), n)).toBe(0);
    expect(indexForX(10 ** 6, n)).toBe(n - 1);
    const x = (xForIndex(10, n) + xForIndex(11, n)) / 2 + 0.01;
    expect([10, 11]).toContain(indexForX(x, n));
  });

  it("treats clientX as chart coordinates when the rect has no size", () => {
    const rect = { left: 0, width: 0 } as DOMRect;
    expect(chartXFromClient(123, rect)).toBe(123);
    const scaled = { left: 100, width: CHART_WIDTH / 2 } as DOMRect;
    expect(chartXFromClient(100 + 10, scaled)).toBeCloseTo(20);
  });
});

describe("SeriesChart", () => {
  let host: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = "";
    host = document.createElement("div");
    document.body.appendChild(host);
  });

  const values = Array.from({ length: 161 }, (_, i) => (i < 80 ? 0 : 5));

  it("renders one marker per detection with status classes", () => {
    new SeriesChart(
      host,
      values,
      { breakpoints: [0, 80], levels: [0, 5], stddevs: [0, 0] },
      [detection(), detection({ detection_id: "s~120~abc", index: 120, status: "confirmed" })],
      { onDragCommit: () => {} },
    );
    const markers = host.querySelectorAll(".marker");
    expect(markers.length).toBe(2);
    expect(host.querySelector(".marker-pending")).toBeTruthy();
    expect(host.querySelector(".marker-confirmed")).toBeTruthy();
    expect(host.querySelector(".step-line")).toBeTruthy();
  });

  it("places modified markers at the modified index", () => {
    new SeriesChart(
      host,
      values,
      null,
      [detection({ status: "modified", modified_index: 99 })],
      { onDragCommit: () => {} },
    );
    const marker = host.querySelector(".marker")!;
    expect(marker.getAttribute("data-index")).toBe("99");
  });

  it("drag commits the snapped integer index", () => {
    const onDragCommit = vi.fn();
    new SeriesChart(host, values, null, [detection()], { onDragCommit });
    const grab = host.querySelector(".marker-grab")!;
    grab.dispatchEvent(new MouseEvent("mousedown", { bubbles: true, clientX: xForIndex(80, 161) }));
    document.dispatchEvent(
      new MouseEvent("mousemove", { bubbles: true, clientX: xForIndex(83, 161) }),
    );
    document.dispatchEvent(new MouseEvent("mouseup", { bubbles: true }));
    expect(onDragCommit).toHaveBeenCalledWith("s~80~abc", 83);
  });

  it("a mousedown without movement commits nothing", () => {
    const onDragCommit = vi.fn();
    new SeriesChart(host, values, null, [detection()], { onDragCommit });
    const grab = host.querySelector(".marker-grab")!;
    grab.dispatchEvent(new MouseEvent("mousedown", { bubbles: true, clientX: 100 }));
    document.dispatchEvent(new MouseEvent("mouseup", { bubbles: true }));
    expect(onDragCommit).not.toHaveBeenCalled();
  });

  it("breaks the value line at missing points", () => {
    const gappy: (number | null)[] = [0, 1, null, 3, 4];
    new SeriesChart(host, gappy, null, [], { onDragCommit: () => {} });
    const d = host.querySelector(".value-line")!.getAttribute("d")!;
    expect((d.match(/M/g) ?? []).length).toBe(2); // two pen-down strokes
  });
});
