/** Typed client for the review service. The endpoint URL is the single
 * piece of configuration; everything else comes from the server. */

import type {
  Dashboard,
  Disagreement,
  ExplainDoc,
  LabelSubmission,
  ProjectInfo,
  ReviewItem,
  RoundRecord,
  Verdict,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(public baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let res: Response;
    try {
      res = await fetch(this.baseUrl + "/api/v1" + path, {
        headers: { Accept: "application/json", ...(init?.headers ?? {}) },
        ...init,
      });
    } catch (err) {
      throw new ApiError(0, `network failure: ${String(err)}`);
    }
    if (!res.ok) {
      let detail = `HTTP ${res.status}`;
      try {
        const body = await res.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  project(): Promise<ProjectInfo> {
    return this.request<ProjectInfo>("/project");
  }

  round(iteration: number): Promise<RoundRecord> {
    return this.request<RoundRecord>(`/rounds/${iteration}`);
  }

  queue(iteration: number, reviewer: string): Promise<ReviewItem[]> {
    return this.request<ReviewItem[]>(
      `/rounds/${iteration}/queue?reviewer=${encodeURIComponent(reviewer)}`,
    );
  }

  submitLabel(label: LabelSubmission): Promise<unknown> {
    return this.request("/labels", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(label),
    });
  }

  disagreements(iteration: number): Promise<Disagreement[]> {
    return this.request<Disagreement[]>(`/rounds/${iteration}/disagreements`);
  }

  adjudicate(complaintId: string, verdict: Verdict): Promise<unknown> {
    return this.request("/adjudications", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ complaint_id: complaintId, verdict }),
    });
  }

  dashboard(): Promise<Dashboard> {
    return this.request<Dashboard>("/dashboard");
  }

  explain(iteration: number): Promise<ExplainDoc> {
    return this.request<ExplainDoc>(`/rounds/${iteration}/explain`);
  }

  selectClusters(clusters: number[]): Promise<unknown> {
    return this.request("/rounds/next-selection", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ clusters }),
    });
  }
}
