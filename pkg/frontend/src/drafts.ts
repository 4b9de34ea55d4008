import type { Draft } from "./state.js";

interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

/** Local draft persistence so unsent popup edits survive accidental
 * reloads. Drafts are browser-side only and always flagged unsynced;
 * server state wins once a save is acknowledged. */
export class DraftStore {
  constructor(
    private summaryId: string,
    private annotator: string,
    private storage: StorageLike = window.localStorage,
  ) {}

  private key(claimId: string): string {
    return `draft:${this.summaryId}:${this.annotator}:${claimId}`;
  }

  save(claimId: string, draft: Draft): void {
    this.storage.setItem(this.key(claimId), JSON.stringify({ ...draft, unsynced: true }));
  }

  load(claimId: string): Draft | null {
    const raw = this.storage.getItem(this.key(claimId));
    if (!raw) return null;
    try {
      return JSON.parse(raw) as Draft;
    } catch {
      return null;
    }
  }

  clear(claimId: string): void {
    this.storage.removeItem(this.key(claimId));
  }
}

export const AUTOSAVE_INTERVAL_MS = 10_000;
