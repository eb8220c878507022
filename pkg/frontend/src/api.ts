import type {
  ConfigVersion,
  DetectionRecord,
  DetectionResultDoc,
  LabelExport,
  RetuneOutcome,
  SeriesDetail,
  SeriesSummary,
  VerdictStatus,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public errorKind: string,
    public detail: string,
  ) {
    super(`${errorKind}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client; the server is the single source of truth, so every
 * mutation returns the updated record and callers refetch after writes. */
export class ApiClient {
  constructor(
    private baseUrl = "",
    private token?: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const headers: Record<string, string> = {
      ...(init?.headers as Record<string, string> | undefined),
    };
    if (init?.body) headers["Content-Type"] = "application/json";
    if (this.token) headers["X-Api-Token"] = this.token;
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, { ...init, headers });
    } catch (err) {
      throw new ApiError(0, "network", String(err));
    }
    if (!response.ok) {
      let kind = `http ${response.status}`;
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { error?: string; detail?: string };
        if (body.error) kind = body.error;
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ApiError(response.status, kind, detail);
    }
    return (await response.json()) as T;
  }

  listSeries(): Promise<SeriesSummary[]> {
    return this.request("/api/series");
  }

  seriesDetail(id: string): Promise<SeriesDetail> {
    return this.request(`/api/series/${encodeURIComponent(id)}`);
  }

  runDetection(id: string): Promise<{ detections: DetectionRecord[]; result: DetectionResultDoc }> {
    return this.request(`/api/series/${encodeURIComponent(id)}/detect`, { method: "POST" });
  }

  listDetections(seriesId?: string, status?: VerdictStatus): Promise<DetectionRecord[]> {
    const params = new URLSearchParams();
    if (seriesId) params.set("series", seriesId);
    if (status) params.set("status", status);
    const qs = params.toString();
    return this.request(`/api/detections${qs ? "?" + qs : ""}`);
  }

  submitVerdict(
    detectionId: string,
    status: VerdictStatus,
    annotator: string,
    modifiedIndex?: number,
  ): Promise<DetectionRecord> {
    return this.request(`/api/detections/${encodeURIComponent(detectionId)}/verdict`, {
      method: "POST",
      body: JSON.stringify({
        status,
        annotator,
        modified_index: modifiedIndex ?? null,
      }),
    });
  }

  exportLabels(): Promise<LabelExport> {
    return this.request("/api/labels/export");
  }

  retune(budget: number, seed: number): Promise<RetuneOutcome> {
    return this.request("/api/retune", {
      method: "POST",
      body: JSON.stringify({ budget, seed }),
    });
  }

  configVersions(): Promise<ConfigVersion[]> {
    return this.request("/api/config/versions");
  }
}
