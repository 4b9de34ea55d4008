import type { ClaimsPayload, EvidenceQuote, Label, SearchResponse, SessionInfo, SummaryListEntry } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    public detail: string,
    public payload: Record<string, unknown> = {},
  ) {
    super(`${code}: ${detail}`);
  }
}

export interface AnnotationBody {
  label: Label;
  reason: string | null;
  evidence: EvidenceQuote[];
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin JSON client for the annotation service; the annotator identity
 * rides on every request as the X-Annotator header. */
export class ApiClient {
  constructor(
    private annotator: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
    private base = "",
  ) {}

  private async request<T>(method: string, path: string, body?: unknown, headers?: Record<string, string>): Promise<T> {
    const response = await this.fetchImpl(this.base + path, {
      method,
      headers: {
        "X-Annotator": this.annotator,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
        ...headers,
      },
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!response.ok) {
      let payload: Record<string, unknown> = {};
      try {
        payload = (await response.json()) as Record<string, unknown>;
      } catch {
        // non-JSON error body; keep the status
      }
      throw new ApiError(
        response.status,
        String(payload.error ?? response.status),
        String(payload.detail ?? ""),
        payload,
      );
    }
    return (await response.json()) as T;
  }

  async bookText(bookId: string): Promise<string> {
    const response = await this.fetchImpl(`${this.base}/books/${bookId}/text`, {
      headers: { "X-Annotator": this.annotator },
    });
    if (!response.ok) {
      throw new ApiError(response.status, "book_text_unavailable", await response.text());
    }
    return await response.text();
  }

  summaries(bookId: string): Promise<{ book_id: string; title: string; summaries: SummaryListEntry[] }> {
    return this.request("GET", `/books/${bookId}/summaries`);
  }

  claims(summaryId: string): Promise<ClaimsPayload> {
    return this.request("GET", `/summaries/${summaryId}/claims`);
  }

  search(bookId: string, q: string): Promise<SearchResponse> {
    return this.request("GET", `/books/${bookId}/search?q=${encodeURIComponent(q)}`);
  }

  saveAnnotation(claimId: string, body: AnnotationBody, ifMatchVersion?: number): Promise<{ version: number }> {
    const headers = ifMatchVersion !== undefined ? { "If-Match": String(ifMatchVersion) } : undefined;
    return this.request("PUT", `/claims/${claimId}/annotation`, body, headers);
  }

  saveComment(summaryId: string, text: string): Promise<{ version: number }> {
    return this.request("PUT", `/summaries/${summaryId}/comment`, { text });
  }

  sessionState(summaryId: string): Promise<SessionInfo> {
    return this.request("GET", `/sessions/${summaryId}`);
  }

  completeSession(summaryId: string): Promise<{ complete: boolean }> {
    return this.request("POST", `/sessions/${summaryId}/complete`);
  }

  reopenSession(summaryId: string): Promise<{ complete: boolean }> {
    return this.request("POST", `/sessions/${summaryId}/reopen`);
  }
}
