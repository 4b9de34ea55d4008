import type { Annotation, ClaimRow, ClaimsPayload, EvidenceQuote, Label } from "./types.js";

export type ClaimStatus = "unvisited" | "saved";

export interface Draft {
  label: Label | null;
  reason: string;
  evidence: EvidenceQuote[];
  unsynced: boolean;
}

export interface CompletionCheck {
  ok: boolean;
  missingClaims: string[];
  missingComment: boolean;
}

function draftFromAnnotation(annotation: Annotation | null): Draft {
  if (!annotation) {
    return { label: null, reason: "", evidence: [], unsynced: false };
  }
  return {
    label: annotation.label,
    reason: annotation.reason ?? "",
    evidence: annotation.evidence.map((q) => ({ ...q })),
    unsynced: false,
  };
}

/** Client-side view of one summary's annotation session. A claim only
 * ever becomes "saved" through markSaved, which callers invoke strictly
 * after a 2xx from the service. */
export class WorkspaceState {
  summaryId: string;
  bookId: string;
  model: string;
  claims: ClaimRow[];
  complete: boolean;
  hasComment: boolean;
  private statuses = new Map<string, ClaimStatus>();
  private versions = new Map<string, number>();
  private saved = new Map<string, Annotation>();

  constructor(payload: ClaimsPayload) {
    this.summaryId = payload.summary_id;
    this.bookId = payload.book_id;
    this.model = payload.model;
    this.claims = [...payload.claims].sort((a, b) => a.index - b.index);
    this.complete = payload.session?.complete ?? false;
    this.hasComment = payload.session?.has_comment ?? false;
    for (const claim of this.claims) {
      if (claim.annotation) {
        this.statuses.set(claim.claim_id, "saved");
        this.saved.set(claim.claim_id, claim.annotation);
        this.versions.set(claim.claim_id, claim.annotation.version ?? 0);
      } else {
        this.statuses.set(claim.claim_id, "unvisited");
      }
    }
  }

  status(claimId: string): ClaimStatus {
    return this.statuses.get(claimId) ?? "unvisited";
  }

  version(claimId: string): number {
    return this.versions.get(claimId) ?? 0;
  }

  /** Draft for the popup, prefilled from what the server last accepted. */
  draftFor(claimId: string): Draft {
    return draftFromAnnotation(this.saved.get(claimId) ?? null);
  }

  savedAnnotation(claimId: string): Annotation | null {
    return this.saved.get(claimId) ?? null;
  }

  /** Record a server-acknowledged save (call only on 2xx). */
  markSaved(claimId: string, version: number, annotation: Annotation): void {
    this.statuses.set(claimId, "saved");
    this.versions.set(claimId, version);
    this.saved.set(claimId, { ...annotation, version });
  }

  markCommentSaved(): void {
    this.hasComment = true;
  }

  savedCount(): number {
    let n = 0;
    for (const status of this.statuses.values()) {
      if (status === "saved") n += 1;
    }
    return n;
  }

  progressLabel(): string {
    return `${this.savedCount()}/${this.claims.length} saved`;
  }

  missingClaims(): string[] {
    return this.claims.filter((c) => this.status(c.claim_id) !== "saved").map((c) => c.claim_id);
  }

  canComplete(): CompletionCheck {
    const missing = this.missingClaims();
    return {
      ok: missing.length === 0 && this.hasComment,
      missingClaims: missing,
      missingComment: !this.hasComment,
    };
  }
}
