export type Label = "Faithful" | "Unfaithful" | "PartialSupport" | "CantVerify";

export const LABELS: Label[] = ["Faithful", "Unfaithful", "PartialSupport", "CantVerify"];

export interface EvidenceQuote {
  text: string;
  byte_start: number | null;
  byte_end: number | null;
}

export interface Annotation {
  label: Label;
  reason: string | null;
  evidence: EvidenceQuote[];
  version?: number;
}

export interface ClaimRow {
  claim_id: string;
  index: number;
  text: string;
  annotation: Annotation | null;
}

export interface SessionInfo {
  progress: Record<string, "saved" | "unvisited">;
  has_comment: boolean;
  complete: boolean;
}

export interface ClaimsPayload {
  summary_id: string;
  book_id: string;
  model: string;
  claims: ClaimRow[];
  session: SessionInfo | null;
}

export interface SummaryListEntry {
  id: string;
  model: string;
  refused: boolean;
}

export interface SearchHit {
  byte_start: number;
  byte_end: number;
  snippet: string;
}

export interface SearchResponse {
  hits: SearchHit[];
  truncated: boolean;
}
