import type { AnswerDoc, ProofDoc, RecordEntry, VerificationReport } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

/**
 * Thin typed client over the /v1 endpoints. The console performs no
 * computation of its own; every displayed fact comes from these calls.
 */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return response;
  }

  async listRecords(): Promise<RecordEntry[]> {
    return (await this.request("/v1/records")).json();
  }

  async timeline(recordId: string): Promise<string> {
    return (await this.request(`/v1/records/${encodeURIComponent(recordId)}/timeline`)).text();
  }

  async verify(recordId: string): Promise<VerificationReport> {
    return (
      await this.request(`/v1/records/${encodeURIComponent(recordId)}/verify`, {
        method: "POST",
      })
    ).json();
  }

  async ask(recordId: string, question: string, k?: number): Promise<AnswerDoc> {
    return (
      await this.request(`/v1/records/${encodeURIComponent(recordId)}/ask`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(k === undefined ? { question } : { question, k }),
      })
    ).json();
  }

  async proof(digest: string): Promise<ProofDoc> {
    return (await this.request(`/v1/ledger/proof/${digest}`)).json();
  }
}
