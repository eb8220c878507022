import type { ApiClient } from "../api.js";
import type { ConfigVersion, RetuneOutcome } from "../types.js";
import { clear, el, toast } from "../ui.js";

interface Attempt {
  outcome: RetuneOutcome;
  at: string;
}

/** Re-tuning page: decided-label counts, the retune action, and the
 * accepted/retained history.  Attempts live in the session; versions come
 * from the server. */
export class RetunePanel {
  private attempts: Attempt[] = [];
  private tuning = false;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
  ) {}

  async load(): Promise<void> {
    let labelCount = 0;
    let labelPoints = 0;
    let versions: ConfigVersion[] = [];
    try {
      const [labels, vers] = await Promise.all([
        this.api.exportLabels(),
        this.api.configVersions(),
      ]);
      labelCount = labels.series.length;
      labelPoints = labels.series.reduce(
        (acc, s) => acc + s.annotations.reduce((a, b) => a + b.indices.length, 0),
        0,
      );
      versions = vers;
    } catch (err) {
      toast(String(err), "error");
    }
    this.render(labelCount, labelPoints, versions);
  }

  private render(labelCount: number, labelPoints: number, versions: ConfigVersion[]): void {
    clear(this.root);
    this.root.appendChild(el("h2", {}, "Parameter re-tuning"));
    this.root.appendChild(
      el(
        "p",
        { class: "label-stats" },
        `${labelCount} series with decided labels (${labelPoints} verified change points)`,
      ),
    );

    const budget = el("input", {
      class: "budget-input",
      type: "number",
      value: "20",
      min: "1",
    }) as HTMLInputElement;
    const seed = el("input", {
      class: "seed-input",
      type: "number",
      value: "0",
    }) as HTMLInputElement;
    const button = el("button", { class: "retune-button", type: "button" }, "Retune");
    const status = el("span", { class: "retune-status" }, this.tuning ? "tuning…" : "");
    if (labelCount === 0 || this.tuning) {
      button.setAttribute("disabled", "");
    }
    if (labelCount === 0) {
      this.root.appendChild(
        el(
          "p",
          { class: "retune-disabled-reason" },
          "Retuning needs at least one series with decided verdicts; adjudicate some detections first.",
        ),
      );
    }
    button.addEventListener("click", () =>
      void this.runRetune(Number(budget.value), Number(seed.value)),
    );
    this.root.appendChild(
      el(
        "div",
        { class: "retune-controls" },
        el("label", {}, "budget ", budget),
        el("label", {}, " seed ", seed),
        " ",
        button,
        " ",
        status,
      ),
    );

    const attempts = el("table", { class: "attempts-table" });
    attempts.appendChild(
      el(
        "tr",
        {},
        el("th", {}, "at"),
        el("th", {}, "outcome"),
        el("th", {}, "candidate f1"),
        el("th", {}, "incumbent f1"),
        el("th", {}, "active version"),
      ),
    );
    for (const attempt of this.attempts) {
      attempts.appendChild(
        el(
          "tr",
          { class: `attempt-row attempt-${attempt.outcome.outcome}` },
          el("td", {}, attempt.at),
          el("td", { class: "attempt-outcome" }, attempt.outcome.outcome),
          el("td", {}, attempt.outcome.candidate.f1.toFixed(4)),
          el("td", {}, attempt.outcome.incumbent.f1.toFixed(4)),
          el("td", {}, `v${attempt.outcome.version.version}`),
        ),
      );
    }
    this.root.appendChild(el("h3", {}, "Attempts this session"));
    this.root.appendChild(attempts);

    const table = el("table", { class: "versions-table" });
    table.appendChild(
      el(
        "tr",
        {},
        el("th", {}, "version"),
        el("th", {}, "source"),
        el("th", {}, "activated"),
      ),
    );
    for (const version of [...versions].reverse()) {
      table.appendChild(
        el(
          "tr",
          { class: "version-row", "data-version": String(version.version) },
          el("td", {}, `v${version.version}`),
          el("td", {}, version.source),
          el("td", {}, version.activated_at),
        ),
      );
    }
    this.root.appendChild(el("h3", {}, "Config versions"));
    this.root.appendChild(table);
  }

  private async runRetune(budget: number, seed: number): Promise<void> {
    if (this.tuning) return;
    this.tuning = true;
    const status = this.root.querySelector<HTMLElement>(".retune-status");
    if (status) status.textContent = "tuning…";
    const button = this.root.querySelector<HTMLElement>(".retune-button");
    button?.setAttribute("disabled", "");
    try {
      const outcome = await this.api.retune(budget, seed);
      this.attempts.push({ outcome, at: new Date().toISOString() });
      toast(
        outcome.outcome === "accepted"
          ? `accepted: installed v${outcome.version.version}`
          : "retained: search did not beat the incumbent",
      );
    } catch (err) {
      toast(String(err), "error");
    } finally {
      this.tuning = false;
      await this.load();
    }
  }
}
