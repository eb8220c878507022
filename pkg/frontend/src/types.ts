/** Payload shapes of the feedback-service JSON API. */

export type VerdictStatus = "pending" | "confirmed" | "removed" | "modified";

export interface SeriesSummary {
  id: string;
  name: string;
  length: number;
  pending_count: number;
}

export interface DetectionRecord {
  detection_id: string;
  series_id: string;
  index: number;
  run_fingerprint: string;
  created_at: string;
  status: VerdictStatus;
  modified_index: number | null;
  annotator: string | null;
  decided_at: string | null;
  previously_removed: boolean;
}

export interface StepFunctionDoc {
  breakpoints: number[];
  levels: number[];
  stddevs: number[];
}

export interface DetectionResultDoc {
  series_id: string;
  method: string;
  final: number[];
  step: StepFunctionDoc;
  config_fingerprint: string;
}

export interface AnnotationBlock {
  annotator: string;
  indices: number[];
}

export interface SeriesDetail {
  id: string;
  name: string;
  values: (number | null)[];
  meta: Record<string, string>;
  annotations: AnnotationBlock[];
  active_version: number;
  detection: DetectionResultDoc | null;
  detections: DetectionRecord[];
}

export interface ConfigVersion {
  version: number;
  source: "manual" | "retune";
  activated_at: string;
  config: unknown;
}

export interface Scores {
  f1: number;
  precision: number;
}

export interface RetuneOutcome {
  outcome: "accepted" | "retained";
  version: ConfigVersion;
  candidate: Scores;
  incumbent: Scores;
  label_series_count: number;
}

export interface LabelExport {
  name: string;
  series: {
    id: string;
    name: string;
    values: (number | null)[];
    meta: Record<string, string>;
    annotations: AnnotationBlock[];
  }[];
}

/** The index a detection currently points at (modified wins over original). */
export function effectiveIndex(d: DetectionRecord): number {
  return d.status === "modified" && d.modified_index !== null
    ? d.modified_index
    : d.index;
}
