// @vitest-environment node
/**
 * End-to-end: a real service process, a simulated DOM, the actual client.
 *
 * The dataset is two deterministic series: a 5-level step the default config
 * finds, and a 1-level step it also finds but a reviewer rejects.  That pair
 * makes the first re-tune genuinely improve on the defaults (accepted) and a
 * budget-1 re-tune genuinely fail to beat the incumbent (retained), so both
 * panel outcomes are exercised against the real server.
 */
import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, mkdirSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { Window } from "happy-dom";
import { afterAll, beforeAll, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { xForIndex } from "../src/chart.js";
import type { App } from "../src/main.js";
import type { DetectionRecord } from "../src/types.js";

const PORT = 18100 + (process.pid % 1800);
const BASE = `http://127.0.0.1:${PORT}`;
const N = 160;

function seriesValues(delta: number): number[] {
  const values = [];
  for (let i = 0; i < N; i++) {
    values.push((i < 80 ? 0 : delta) + 0.35 * Math.sin(i * 0.7) + 0.21 * Math.cos(i * 2.3));
  }
  return values;
}

function writeDataset(dir: string): void {
  mkdirSync(dir, { recursive: true });
  const series = [
    { id: "big-step", delta: 5.0 },
    { id: "small-step", delta: 1.0 },
  ];
  for (const { id, delta } of series) {
    writeFileSync(
      join(dir, `${id}.json`),
      JSON.stringify({
        id,
        name: id,
        values: seriesValues(delta),
        meta: {},
        annotations: [],
      }),
    );
  }
  writeFileSync(
    join(dir, "manifest.json"),
    JSON.stringify({ name: "e2e", series_files: series.map((s) => `${s.id}.json`) }),
  );
}

let child: ChildProcess | null = null;
let workDir = "";
let app: App;
let api: ApiClient;
let dom: Window;

function page(): HTMLElement {
  return dom.document.querySelector(".page") as unknown as HTMLElement;
}

async function waitFor<T>(fn: () => T | Promise<T>, what: string, ms = 30000): Promise<T> {
  const deadline = Date.now() + ms;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const value = await fn();
      if (value) return value;
    } catch (err) {
      lastError = err;
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error(`timed out waiting for ${what}: ${lastError ?? "condition false"}`);
}

async function serverDetections(seriesId: string): Promise<DetectionRecord[]> {
  return api.listDetections(seriesId);
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "bipec-e2e-"));
  writeDataset(join(workDir, "data"));

  child = spawn(
    "python3",
    [
      "-m",
      "bipec.cli",
      "serve",
      "--data",
      join(workDir, "data"),
      "--store",
      join(workDir, "store"),
      "--host",
      "127.0.0.1",
      "--port",
      String(PORT),
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  let stderr = "";
  child.stderr?.on("data", (chunk) => (stderr += String(chunk)));

  await waitFor(
    async () => (await fetch(`${BASE}/api/series`)).ok,
    `service on :${PORT} (stderr: ${stderr.slice(0, 400)})`,
    60000,
  );

  dom = new Window({ url: `${BASE}/ui/` });
  const g = globalThis as Record<string, unknown>;
  g.document = dom.document;
  g.window = dom.window;
  g.location = dom.window.location;
  g.localStorage = dom.window.localStorage;
  g.MouseEvent = dom.window.MouseEvent;
  g.Node = dom.window.Node;
  (dom.window as unknown as Record<string, unknown>).BIPEC_NO_AUTOBOOT = true;

  api = new ApiClient(BASE, undefined, (input, init) => fetch(input, init));
  const { createApp } = await import("../src/main.js");
  const root = dom.document.createElement("div");
  dom.document.body.appendChild(root);
  app = createApp(root as unknown as HTMLElement, api);
}, 120000);

afterAll(() => {
  child?.kill("SIGKILL");
  if (workDir) rmSync(workDir, { recursive: true, force: true });
});

describe.sequential("review client against a live service", () => {
  it("lists the seeded series", async () => {
    await app.navigate("");
    const rows = page().querySelectorAll(".series-row");
    expect(rows.length).toBe(2);
    expect(page().textContent).toContain("big-step");
    expect(page().textContent).toContain("small-step");
  });

  it("runs detection from the detail page and renders every detection", async () => {
    await app.navigate("#/series/big-step");
    (page().querySelector(".run-detect") as HTMLButtonElement).click();
    await waitFor(
      () => page().querySelectorAll(".detection-row").length > 0,
      "detection rows after detect",
    );
    const server = await serverDetections("big-step");
    expect(server.length).toBeGreaterThan(0);
    expect(page().querySelectorAll(".detection-row").length).toBe(server.length);
    expect(page().querySelectorAll(".marker").length).toBe(server.length);
    expect(page().querySelector(".marker-pending")).toBeTruthy();
    // detection markers carry the detected index
    expect(page().querySelector(".marker")!.getAttribute("data-index")).toBe("80");
  });

  it("shows pending counts on the list page", async () => {
    await api.runDetection("small-step"); // seed the second series via raw API
    await app.navigate("");
    const badges = [...page().querySelectorAll(".badge")].map((b) => b.textContent);
    expect(badges).toContain("1");
  });

  it("confirm round-trips and restyles the marker", async () => {
    await app.navigate("#/series/big-step");
    (page().querySelector(".verdict-confirm") as HTMLButtonElement).click();
    await waitFor(() => page().querySelector(".chip-confirmed"), "confirmed chip");
    expect(page().querySelector(".marker-confirmed")).toBeTruthy();
    const server = await serverDetections("big-step");
    expect(server[0].status).toBe("confirmed");
    expect(server[0].annotator).toBe("reviewer");
  });

  it("drag-modify snaps to an integer index and round-trips", async () => {
    await app.navigate("#/series/big-step");
    const grab = page().querySelector(".marker-grab")!;
    grab.dispatchEvent(
      new MouseEvent("mousedown", { bubbles: true, clientX: xForIndex(80, N) }),
    );
    dom.document.dispatchEvent(
      new MouseEvent("mousemove", {
        bubbles: true,
        clientX: (xForIndex(83, N) + xForIndex(84, N)) / 2 - 0.6, // snaps to 83
      }),
    );
    dom.document.dispatchEvent(new MouseEvent("mouseup", { bubbles: true }));

    const save = await waitFor(
      () => page().querySelector(".save-move") as HTMLButtonElement,
      "save bar after drag",
    );
    expect(save.textContent).toContain("83");
    save.click();
    await waitFor(() => page().querySelector(".chip-modified"), "modified chip");
    const server = await serverDetections("big-step");
    expect(server[0].status).toBe("modified");
    expect(server[0].modified_index).toBe(83);
    expect(page().querySelector(".marker")!.getAttribute("data-index")).toBe("83");
  });

  it("remove round-trips on the second series", async () => {
    await app.navigate("#/series/small-step");
    (page().querySelector(".verdict-remove") as HTMLButtonElement).click();
    await waitFor(() => page().querySelector(".chip-removed"), "removed chip");
    const server = await serverDetections("small-step");
    expect(server[0].status).toBe("removed");
  });

  it("renders server truth after out-of-band mutations", async () => {
    // Mutate behind the UI's back, then re-render: the page must show the
    // server's state, not anything it cached.
    const [det] = await serverDetections("small-step");
    const resp = await fetch(`${BASE}/api/detections/${det.detection_id}/verdict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ status: "confirmed", annotator: "out-of-band" }),
    });
    expect(resp.ok).toBe(true);
    await app.navigate("#/series/small-step");
    expect(page().querySelector(".chip-confirmed")).toBeTruthy();

    // put it back to removed through the UI for the retune scenario
    (page().querySelector(".verdict-remove") as HTMLButtonElement).click();
    await waitFor(() => page().querySelector(".chip-removed"), "removed again");
  });

  it("failed mutations toast and revert", async () => {
    await app.navigate("#/series/big-step");
    const grab = page().querySelector(".marker-grab")!;
    grab.dispatchEvent(
      new MouseEvent("mousedown", { bubbles: true, clientX: xForIndex(83, N) }),
    );
    dom.document.dispatchEvent(
      new MouseEvent("mousemove", { bubbles: true, clientX: xForIndex(0, N) }),
    );
    dom.document.dispatchEvent(new MouseEvent("mouseup", { bubbles: true }));
    const save = await waitFor(
      () => page().querySelector(".save-move") as HTMLButtonElement,
      "save bar",
    );
    // index 0 is outside the valid modify range [1, n-1]; the save control
    // must refuse to submit it
    expect(save.hasAttribute("disabled")).toBe(true);
    (page().querySelector(".cancel-move") as HTMLButtonElement).click();
    await waitFor(
      () => page().querySelector(".marker")!.getAttribute("data-index") === "83",
      "marker reverted to server index",
    );
  });

  it("retune panel: accepted then retained, reflecting server outcomes", async () => {
    await app.navigate("#/retune");
    expect(page().querySelector(".label-stats")!.textContent).toContain("2 series");

    const budget = page().querySelector(".budget-input") as HTMLInputElement;
    const seed = page().querySelector(".seed-input") as HTMLInputElement;
    budget.value = "12";
    seed.value = "3";
    (page().querySelector(".retune-button") as HTMLButtonElement).click();
    await waitFor(() => page().querySelector(".attempt-accepted"), "accepted attempt", 90000);
    expect(page().querySelector('[data-version="2"]')).toBeTruthy();

    const versions = await api.configVersions();
    expect(versions.at(-1)!.version).toBe(2);
    expect(versions.at(-1)!.source).toBe("retune");

    const budget2 = page().querySelector(".budget-input") as HTMLInputElement;
    const seed2 = page().querySelector(".seed-input") as HTMLInputElement;
    budget2.value = "1";
    seed2.value = "0";
    (page().querySelector(".retune-button") as HTMLButtonElement).click();
    await waitFor(() => page().querySelector(".attempt-retained"), "retained attempt", 90000);
    const after = await api.configVersions();
    expect(after.at(-1)!.version).toBe(2); // incumbent kept
    const rows = page().querySelectorAll(".version-row");
    expect(rows.length).toBe(2);
  });
});
