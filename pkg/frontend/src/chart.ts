import type { DetectionRecord, StepFunctionDoc } from "./types.js";
import { effectiveIndex } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export const CHART_WIDTH = 860;
export const CHART_HEIGHT = 300;
const PAD_X = 36;
const PAD_Y = 16;

export interface ChartHandlers {
  /** Fired when a marker drag ends on a new integer index. */
  onDragCommit: (detectionId: string, index: number) => void;
}

function svgEl<K extends string>(tag: K, attrs: Record<string, string>): SVGElement {
  const el = document.createElementNS(SVG_NS, tag) as SVGElement;
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
  return el;
}

export function xForIndex(i: number, n: number): number {
  if (n <= 1) return PAD_X;
  return PAD_X + (i / (n - 1)) * (CHART_WIDTH - 2 * PAD_X);
}

export function indexForX(x: number, n: number): number {
  if (n <= 1) return 0;
  const raw = ((x - PAD_X) / (CHART_WIDTH - 2 * PAD_X)) * (n - 1);
  return Math.max(0, Math.min(n - 1, Math.round(raw)));
}

/** Map a mouse clientX into chart coordinates; with a zero-width rect (as in
 * DOM simulators) clientX is taken as already being in chart coordinates. */
export function chartXFromClient(clientX: number, rect: DOMRect): number {
  const scale = rect.width > 0 ? CHART_WIDTH / rect.width : 1;
  return (clientX - rect.left) * scale;
}

function valueRange(values: (number | null)[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v === null) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!isFinite(lo)) return [0, 1];
  if (lo === hi) return [lo - 1, hi + 1];
  const margin = (hi - lo) * 0.08;
  return [lo - margin, hi + margin];
}

export class SeriesChart {
  readonly svg: SVGElement;
  private n: number;
  private yOf: (v: number) => number;
  private dragging: { detectionId: string; line: SVGElement; label: SVGElement } | null =
    null;
  private dragIndex: number | null = null;

  constructor(
    container: HTMLElement,
    private values: (number | null)[],
    step: StepFunctionDoc | null,
    detections: DetectionRecord[],
    private handlers: ChartHandlers,
  ) {
    this.n = values.length;
    const [lo, hi] = valueRange(values);
    this.yOf = (v) =>
      CHART_HEIGHT - PAD_Y - ((v - lo) / (hi - lo)) * (CHART_HEIGHT - 2 * PAD_Y);

    this.svg = svgEl("svg", {
      viewBox: `0 0 ${CHART_WIDTH} ${CHART_HEIGHT}`,
      class: "series-chart",
      role: "img",
    });
    this.drawValues();
    if (step) this.drawStep(step);
    for (const det of detections) this.drawMarker(det);
    container.appendChild(this.svg);
  }

  private drawValues(): void {
    let d = "";
    let pen = false;
    for (let i = 0; i < this.n; i++) {
      const v = this.values[i];
      if (v === null) {
        pen = false;
        continue;
      }
      d += `${pen ? "L" : "M"}${xForIndex(i, this.n).toFixed(2)},${this.yOf(v).toFixed(2)}`;
      pen = true;
    }
    this.svg.appendChild(svgEl("path", { d, class: "value-line", fill: "none" }));
  }

  private drawStep(step: StepFunctionDoc): void {
    let d = "";
    const bounds = [...step.breakpoints, this.n];
    for (let s = 0; s < step.levels.length; s++) {
      const y = this.yOf(step.levels[s]).toFixed(2);
      const x0 = xForIndex(bounds[s], this.n).toFixed(2);
      const x1 = xForIndex(Math.max(bounds[s + 1] - 1, bounds[s]), this.n).toFixed(2);
      d += `M${x0},${y}L${x1},${y}`;
    }
    this.svg.appendChild(svgEl("path", { d, class: "step-line", fill: "none" }));
  }

  private drawMarker(det: DetectionRecord): void {
    const idx = effectiveIndex(det);
    const x = xForIndex(idx, this.n).toFixed(2);
    const line = svgEl("line", {
      x1: x,
      x2: x,
      y1: String(PAD_Y),
      y2: String(CHART_HEIGHT - PAD_Y),
      class: `marker marker-${det.status}`,
      "data-detection-id": det.detection_id,
      "data-index": String(idx),
    });
    const label = svgEl("text", {
      x: x,
      y: String(PAD_Y - 4),
      class: "marker-label",
      "text-anchor": "middle",
      "data-detection-id": det.detection_id,
    });
    label.textContent = String(idx);
    // A wide transparent grab line so the 1px marker is draggable.
    const grab = svgEl("line", {
      x1: x,
      x2: x,
      y1: String(PAD_Y),
      y2: String(CHART_HEIGHT - PAD_Y),
      class: "marker-grab",
      "data-detection-id": det.detection_id,
    });
    grab.addEventListener("mousedown", (event) =>
      this.startDrag(event as MouseEvent, det.detection_id, line, label),
    );
    this.svg.appendChild(line);
    this.svg.appendChild(label);
    this.svg.appendChild(grab);
  }

  private startDrag(
    event: MouseEvent,
    detectionId: string,
    line: SVGElement,
    label: SVGElement,
  ): void {
    event.preventDefault();
    this.dragging = { detectionId, line, label };
    this.dragIndex = null;
    const onMove = (ev: Event) => this.moveDrag(ev as MouseEvent);
    const onUp = () => {
      document.removeEventListener("mousemove", onMove);
      document.removeEventListener("mouseup", onUp);
      this.endDrag();
    };
    document.addEventListener("mousemove", onMove);
    document.addEventListener("mouseup", onUp);
  }

  private moveDrag(event: MouseEvent): void {
    if (!this.dragging) return;
    const rect = this.svg.getBoundingClientRect();
    const x = chartXFromClient(event.clientX, rect);
    const idx = indexForX(x, this.n); // snapped to an integer index
    this.dragIndex = idx;
    const xs = xForIndex(idx, this.n).toFixed(2);
    this.dragging.line.setAttribute("x1", xs);
    this.dragging.line.setAttribute("x2", xs);
    this.dragging.line.classList.add("marker-dragging");
    this.dragging.line.setAttribute("data-index", String(idx));
    this.dragging.label.setAttribute("x", xs);
    this.dragging.label.textContent = String(idx);
  }

  private endDrag(): void {
    if (!this.dragging) return;
    const { detectionId } = this.dragging;
    const idx = this.dragIndex;
    this.dragging.line.classList.remove("marker-dragging");
    this.dragging = null;
    this.dragIndex = null;
    if (idx !== null) this.handlers.onDragCommit(detectionId, idx);
  }
}
