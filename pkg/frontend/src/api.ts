/**
 * Typed client for the undertext service. Every pixel shown in the UI comes
 * from these endpoints; the client never computes image math locally.
 */

export interface BandInfo {
  band_id: string;
  file: string;
  wavelength_nm: number | null;
  illumination: string | null;
  filter_code: string | null;
}

export interface SessionInfo {
  session_id: string;
  width: number;
  height: number;
  bands: BandInfo[];
}

export interface LabelPolygon {
  class: number;
  points: [number, number][];
}

export interface LabelDocument {
  classes?: Record<string, string>;
  polygons: LabelPolygon[];
}

export interface LabelCounts {
  counts: Record<string, number>;
}

export interface JobStatus {
  job_id: string;
  status: "queued" | "running" | "done" | "failed";
  error?: string;
  result_id?: string;
}

export interface ThresholdParams {
  t1: number;
  t2: number;
  alpha: number;
}

export interface ScoreReport {
  metric: string;
  note: string;
  result: string;
  per_channel: number[];
  best: number;
  best_channel: number;
  pixel_counts: Record<string, number>;
}

export interface EnhanceRequest {
  method: string;
  params?: Record<string, unknown>;
  q?: number;
  seed?: number;
  caps?: Record<string, number>;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function toError(response: Response): Promise<ServiceError> {
  let code = "http_error";
  let message = response.statusText;
  try {
    const body = (await response.json()) as { code?: string; message?: string };
    if (body.code) code = body.code;
    if (body.message) message = body.message;
  } catch {
    // non-JSON error body: keep the status text
  }
  return new ServiceError(response.status, code, message);
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.base + path, init);
    if (!response.ok) throw await toError(response);
    return (await response.json()) as T;
  }

  private async binary(path: string, init?: RequestInit): Promise<ArrayBuffer> {
    const response = await this.fetchImpl(this.base + path, init);
    if (!response.ok) throw await toError(response);
    return response.arrayBuffer();
  }

  openSession(manifestPath: string): Promise<SessionInfo> {
    return this.json("/api/session", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ manifest_path: manifestPath }),
    });
  }

  bandPreview(index: number, maxPx = 1_000_000): Promise<ArrayBuffer> {
    return this.binary(`/api/band/${index}/preview?max_px=${maxPx}`);
  }

  putLabels(doc: LabelDocument): Promise<LabelCounts> {
    return this.json("/api/labels", {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(doc),
    });
  }

  getLabels(): Promise<LabelDocument & LabelCounts> {
    return this.json("/api/labels");
  }

  enhance(request: EnhanceRequest): Promise<{ job_id: string }> {
    return this.json("/api/enhance", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
  }

  jobStatus(jobId: string): Promise<JobStatus> {
    return this.json(`/api/job/${jobId}`);
  }

  resultPng(resultId: string): Promise<ArrayBuffer> {
    return this.binary(`/api/result/${resultId}.png`);
  }

  thresholdPreview(
    source: number | string,
    params: ThresholdParams,
    maxPx = 1_000_000,
  ): Promise<ArrayBuffer> {
    return this.binary("/api/threshold", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ source, ...params, max_px: maxPx }),
    });
  }

  suggestThresholds(source: number | string): Promise<ThresholdParams> {
    return this.json(`/api/suggest_thresholds?source=${encodeURIComponent(String(source))}`);
  }

  score(resultId: string, classes: [number, number] = [1, 2]): Promise<ScoreReport> {
    return this.json(`/api/score?result=${encodeURIComponent(resultId)}&classes=${classes.join(",")}`);
  }
}
