import type {
  CaseDoc,
  ClassificationResponse,
  ClassificationSubmission,
  GoldDoc,
  RadarDoc,
  RatingResponse,
  RatingSubmission,
  RunBundle,
  RunCard,
  TranscriptDoc,
} from "./types";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Raised for any HTTP reply outside 2xx; carries the server's detail. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`api error ${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (typeof body?.detail === "string") detail = body.detail;
        else if (body?.detail !== undefined) detail = JSON.stringify(body.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  listRuns(): Promise<{ runs: RunCard[] }> {
    return this.request("/runs");
  }

  getRun(runId: string): Promise<RunBundle> {
    return this.request(`/runs/${encodeURIComponent(runId)}`);
  }

  getTranscript(runId: string): Promise<TranscriptDoc> {
    return this.request(`/runs/${encodeURIComponent(runId)}/transcript`);
  }

  getCase(caseId: string): Promise<CaseDoc> {
    return this.request(`/cases/${encodeURIComponent(caseId)}`);
  }

  getGold(caseId: string): Promise<GoldDoc> {
    return this.request(`/cases/${encodeURIComponent(caseId)}/gold`);
  }

  postClassifications(
    runId: string,
    submission: ClassificationSubmission,
  ): Promise<ClassificationResponse> {
    return this.post(`/runs/${encodeURIComponent(runId)}/classifications`, submission);
  }

  postRatings(runId: string, submission: RatingSubmission): Promise<RatingResponse> {
    return this.post(`/runs/${encodeURIComponent(runId)}/ratings`, submission);
  }

  getRadar(): Promise<RadarDoc> {
    return this.request("/report/radar");
  }
}
