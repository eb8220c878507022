import { ApiClient } from "../api.js";
import { SeriesChart } from "../chart.js";
import type { DetectionRecord, SeriesDetail } from "../types.js";
import { effectiveIndex } from "../types.js";
import { annotatorName, clear, el, setAnnotatorName, statusChip, toast } from "../ui.js";

interface PendingMove {
  detectionId: string;
  index: number;
}

/** Detail page: chart with draggable markers plus per-detection verdicts.
 *
 * The server stays authoritative: every mutation is followed by a full
 * refetch and re-render, and a failed mutation re-renders from server state,
 * which reverts any optimistic marker position.
 */
export class SeriesDetailView {
  private busy = false;
  private pendingMove: PendingMove | null = null;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private seriesId: string,
  ) {}

  async load(): Promise<void> {
    let detail: SeriesDetail;
    try {
      detail = await this.api.seriesDetail(this.seriesId);
    } catch (err) {
      clear(this.root);
      toast(String(err), "error");
      this.root.appendChild(el("p", { class: "empty-state" }, "failed to load series"));
      return;
    }
    this.render(detail);
  }

  private render(detail: SeriesDetail): void {
    clear(this.root);
    this.root.appendChild(
      el(
        "div",
        { class: "page-header" },
        el("h2", {}, detail.name),
        el(
          "span",
          { class: "config-banner" },
          `active config v${detail.active_version}`,
        ),
      ),
    );

    const detectBtn = el(
      "button",
      { class: "run-detect", type: "button" },
      detail.detections.length ? "Re-run detection" : "Run detection",
    );
    detectBtn.addEventListener("click", () =>
      this.mutate(() => this.api.runDetection(this.seriesId)),
    );
    const annotator = el("input", {
      class: "annotator-input",
      value: annotatorName(),
      "aria-label": "annotator",
    }) as HTMLInputElement;
    annotator.addEventListener("change", () => setAnnotatorName(annotator.value));
    this.root.appendChild(
      el("div", { class: "toolbar" }, detectBtn, el("label", {}, "annotator: ", annotator)),
    );

    const chartHost = el("div", { class: "chart-host" });
    this.root.appendChild(chartHost);
    new SeriesChart(
      chartHost,
      detail.values,
      detail.detection?.step ?? null,
      detail.detections,
      {
        onDragCommit: (detectionId, index) => this.proposeMove(detail, detectionId, index),
      },
    );

    this.root.appendChild(el("div", { class: "save-bar-host" }));

    const table = el("table", { class: "detections-table" });
    table.appendChild(
      el(
        "tr",
        {},
        el("th", {}, "index"),
        el("th", {}, "status"),
        el("th", {}, "annotator"),
        el("th", {}, "actions"),
      ),
    );
    for (const det of detail.detections) {
      table.appendChild(this.detectionRow(det));
    }
    this.root.appendChild(table);
    if (detail.detections.length === 0) {
      this.root.appendChild(
        el("p", { class: "empty-state" }, "No detections recorded for this series yet."),
      );
    }
  }

  private detectionRow(det: DetectionRecord): HTMLElement {
    const confirm = el("button", { class: "verdict-confirm", type: "button" }, "Confirm");
    confirm.addEventListener("click", () =>
      this.mutate(() =>
        this.api.submitVerdict(det.detection_id, "confirmed", annotatorName()),
      ),
    );
    const remove = el("button", { class: "verdict-remove", type: "button" }, "Remove");
    remove.addEventListener("click", () =>
      this.mutate(() =>
        this.api.submitVerdict(det.detection_id, "removed", annotatorName()),
      ),
    );
    const later = el("button", { class: "verdict-later", type: "button" }, "Later");
    later.addEventListener("click", () => toast("kept pending for further review"));
    if (det.status !== "pending") later.setAttribute("disabled", "");

    const cells = el(
      "tr",
      { class: "detection-row", "data-detection-id": det.detection_id },
      el("td", { class: "det-index" }, String(effectiveIndex(det))),
      el("td", { class: "det-status" }, statusChip(det.status)),
      el("td", {}, det.annotator ?? "—"),
      el("td", { class: "det-actions" }, confirm, " ", remove, " ", later),
    );
    if (det.previously_removed) {
      cells.appendChild(
        el("td", { class: "previously-removed" }, "previously removed here"),
      );
    }
    return cells;
  }

  /** Drag landed: offer to save the move as a 'modified' verdict. */
  private proposeMove(detail: SeriesDetail, detectionId: string, index: number): void {
    this.pendingMove = { detectionId, index };
    const host = this.root.querySelector<HTMLElement>(".save-bar-host");
    if (!host) return;
    clear(host);
    const save = el("button", { class: "save-move", type: "button" }, `Save move to ${index}`);
    const valid = index >= 1 && index <= detail.values.length - 1;
    if (!valid) save.setAttribute("disabled", "");
    save.addEventListener("click", () => {
      const move = this.pendingMove;
      if (!move) return;
      void this.mutate(() =>
        this.api.submitVerdict(move.detectionId, "modified", annotatorName(), move.index),
      );
    });
    const cancel = el("button", { class: "cancel-move", type: "button" }, "Cancel");
    cancel.addEventListener("click", () => {
      this.pendingMove = null;
      void this.load(); // rerender from server truth, reverting the marker
    });
    host.appendChild(
      el(
        "div",
        { class: "save-bar" },
        `Move detection to index ${index}? `,
        save,
        " ",
        cancel,
      ),
    );
  }

  /** One mutation in flight at a time; always refetch afterwards. */
  private async mutate(action: () => Promise<unknown>): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    this.root.setAttribute("data-busy", "1");
    for (const btn of this.root.querySelectorAll("button")) {
      btn.setAttribute("disabled", "");
    }
    try {
      await action();
      this.pendingMove = null;
    } catch (err) {
      toast(String(err), "error");
    } finally {
      this.busy = false;
      this.root.removeAttribute("data-busy");
      await this.load();
    }
  }
}
