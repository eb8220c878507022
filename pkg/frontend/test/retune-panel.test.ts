import { beforeEach, describe, expect, it, vi } from "vitest";

import type { ApiClient } from "../src/api.js";
import type { RetuneOutcome } from "../src/types.js";
import { RetunePanel } from "../src/views/retune-panel.js";

function stubApi(overrides: Partial<Record<keyof ApiClient, unknown>> = {}): ApiClient {
  return {
    exportLabels: vi.fn(async () => ({
      name: "verified-labels",
      series: [
        {
          id: "a",
          name: "a",
          values: [],
          meta: {},
          annotations: [{ annotator: "verified", indices: [80] }],
        },
      ],
    })),
    configVersions: vi.fn(async () => [
      { version: 1, source: "manual", activated_at: "t0", config: {} },
    ]),
    retune: vi.fn(),
    ...overrides,
  } as unknown as ApiClient;
}

function outcome(kind: "accepted" | "retained", version: number): RetuneOutcome {
  return {
    outcome: kind,
    version: { version, source: "retune", activated_at: "t1", config: {} },
    candidate: { f1: kind === "accepted" ? 1.0 : 0.5, precision: 1.0 },
    incumbent: { f1: 0.5, precision: 0.5 },
    label_series_count: 1,
  };
}

describe("RetunePanel", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = "";
    root = document.createElement("div");
    document.body.appendChild(root);
  });

  it("disables the button with an explanation when nothing is decided", async () => {
    const api = stubApi({
      exportLabels: vi.fn(async () => ({ name: "verified-labels", series: [] })),
    });
    await new RetunePanel(root, api).load();
    const button = root.querySelector<HTMLButtonElement>(".retune-button")!;
    expect(button.hasAttribute("disabled")).toBe(true);
    expect(root.querySelector(".retune-disabled-reason")?.textContent).toContain(
      "decided verdicts",
    );
  });

  it("shows an accepted attempt and the new version", async () => {
    const api = stubApi({
      retune: vi.fn(async () => outcome("accepted", 2)),
      configVersions: vi
        .fn()
        .mockResolvedValueOnce([
          { version: 1, source: "manual", activated_at: "t0", config: {} },
        ])
        .mockResolvedValue([
          { version: 1, source: "manual", activated_at: "t0", config: {} },
          { version: 2, source: "retune", activated_at: "t1", config: {} },
        ]),
    });
    const panel = new RetunePanel(root, api);
    await panel.load();
    root.querySelector<HTMLButtonElement>(".retune-button")!.click();
    await vi.waitFor(() => {
      expect(root.querySelector(".attempt-accepted")).toBeTruthy();
    });
    expect(root.querySelector(".attempt-outcome")!.textContent).toBe("accepted");
    expect(root.querySelector('[data-version="2"]')).toBeTruthy();
  });

  it("marks a retained attempt and keeps the version history unchanged", async () => {
    const api = stubApi({ retune: vi.fn(async () => outcome("retained", 1)) });
    const panel = new RetunePanel(root, api);
    await panel.load();
    root.querySelector<HTMLButtonElement>(".retune-button")!.click();
    await vi.waitFor(() => {
      expect(root.querySelector(".attempt-retained")).toBeTruthy();
    });
    expect(root.querySelector(".attempt-outcome")!.textContent).toBe("retained");
    const versions = root.querySelectorAll(".version-row");
    expect(versions.length).toBe(1);
  });

  it("surfaces server errors as a toast", async () => {
    const api = stubApi({
      retune: vi.fn(async () => {
        throw new Error("PreconditionError: no decided labels");
      }),
    });
    const panel = new RetunePanel(root, api);
    await panel.load();
    root.querySelector<HTMLButtonElement>(".retune-button")!.click();
    await vi.waitFor(() => {
      expect(document.querySelector(".toast-error")).toBeTruthy();
    });
  });
});
