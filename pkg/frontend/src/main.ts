import { ApiClient, ApiError } from "./api.js";
import { createCompletionModal, setCompletionError } from "./completion.js";
import { AUTOSAVE_INTERVAL_MS, DraftStore } from "./drafts.js";
import { charToByte } from "./offsets.js";
import { createAnnotationPopup } from "./popup.js";
import { SearchNavigator, computeHighlightSegments } from "./search.js";
import type { Draft } from "./state.js";
import { WorkspaceState } from "./state.js";
import type { ClaimRow, EvidenceQuote } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class Workspace {
  private api: ApiClient;
  private state!: WorkspaceState;
  private drafts!: DraftStore;
  private bookText = "";
  private navigator = new SearchNavigator([]);
  private openDraft: { claimId: string; draft: Draft } | null = null;
  private autosaveTimer: number | null = null;

  constructor(
    private annotator: string,
    private summaryId: string,
  ) {
    this.api = new ApiClient(annotator);
  }

  async start(): Promise<void> {
    try {
      const payload = await this.api.claims(this.summaryId);
      this.state = new WorkspaceState(payload);
      this.drafts = new DraftStore(this.summaryId, this.annotator);
      this.bookText = await this.api.bookText(this.state.bookId).catch(() => "");
      this.renderBook();
      this.renderClaims();
      this.renderStatusBar();
      this.wireSearch();
      this.wireKeys();
      this.wireCompletion();
      this.startAutosave();
      el("connectivity").hidden = true;
    } catch (error) {
      this.showConnectivity(error);
    }
  }

  private showConnectivity(error: unknown): void {
    const banner = el("connectivity");
    banner.hidden = false;
    banner.textContent = `Cannot reach the annotation service (${String(error)}). `;
    const retry = document.createElement("button");
    retry.textContent = "Retry";
    retry.addEventListener("click", () => void this.start());
    banner.appendChild(retry);
  }

  // ------------------------------------------------------------------
  // panes

  private renderClaims(): void {
    const list = el<HTMLUListElement>("claims");
    list.replaceChildren(
      ...this.state.claims.map((claim) => {
        const row = document.createElement("li");
        row.className = `claim-row ${this.state.status(claim.claim_id)}`;
        row.dataset.claimId = claim.claim_id;
        const badge = document.createElement("span");
        badge.className = "badge";
        badge.textContent = this.state.status(claim.claim_id) === "saved" ? "saved" : "";
        const text = document.createElement("span");
        text.className = "claim-text";
        text.textContent = `${claim.index + 1}. ${claim.text}`;
        const unsynced = this.drafts.load(claim.claim_id);
        if (unsynced && this.state.status(claim.claim_id) !== "saved") {
          const draftBadge = document.createElement("span");
          draftBadge.className = "badge draft";
          draftBadge.textContent = "unsynced draft";
          row.append(text, draftBadge, badge);
        } else {
          row.append(text, badge);
        }
        row.addEventListener("click", () => this.openPopup(claim));
        return row;
      }),
    );
  }

  private renderStatusBar(): void {
    el("progress").textContent = this.state.progressLabel();
    const completeButton = el<HTMLButtonElement>("complete");
    const reopenButton = el<HTMLButtonElement>("reopen");
    completeButton.hidden = this.state.complete;
    reopenButton.hidden = !this.state.complete;
    el("locked-note").hidden = !this.state.complete;
  }

  private renderBook(): void {
    const pane = el("book");
    const segments = computeHighlightSegments(this.bookText, this.navigator.hits, this.navigator.active);
    if (segments.length === 0) {
      pane.textContent = this.bookText || "(book text unavailable on this deployment)";
      return;
    }
    pane.replaceChildren(
      ...segments.map((segment) => {
        if (segment.kind === "plain") {
          return document.createTextNode(segment.text);
        }
        const mark = document.createElement("mark");
        mark.textContent = segment.text;
        if (segment.kind === "active") mark.className = "active";
        mark.dataset.hit = String(segment.hitIndex);
        return mark;
      }),
    );
    pane.querySelector("mark.active")?.scrollIntoView({ block: "center" });
  }

  // ------------------------------------------------------------------
  // popup

  private openPopup(claim: ClaimRow): void {
    if (this.state.complete) return;
    const serverDraft = this.state.draftFor(claim.claim_id);
    const localDraft = this.state.status(claim.claim_id) !== "saved" ? this.drafts.load(claim.claim_id) : null;
    const draft = localDraft ?? serverDraft;
    const overlay = createAnnotationPopup(claim, draft, {
      onSave: (finished) => void this.saveAnnotation(claim, finished, overlay),
      onCancel: () => {
        this.openDraft = null;
        overlay.remove();
      },
      onDraftChange: (changed) => {
        this.openDraft = { claimId: claim.claim_id, draft: changed };
      },
      currentSelection: () => this.grabSelection(),
    });
    document.body.appendChild(overlay);
  }

  private async saveAnnotation(claim: ClaimRow, draft: Draft, overlay: HTMLElement): Promise<void> {
    try {
      const response = await this.api.saveAnnotation(
        claim.claim_id,
        { label: draft.label!, reason: draft.reason || null, evidence: draft.evidence },
        this.state.version(claim.claim_id) || undefined,
      );
      this.state.markSaved(claim.claim_id, response.version, {
        label: draft.label!,
        reason: draft.reason || null,
        evidence: draft.evidence,
      });
      this.drafts.clear(claim.claim_id);
      this.openDraft = null;
      overlay.remove();
      this.renderClaims();
      this.renderStatusBar();
    } catch (error) {
      if (error instanceof ApiError && error.status === 409 && error.code === "VersionConflict") {
        if (window.confirm("This claim changed elsewhere. Reload the page to pick up the latest state?")) {
          window.location.reload();
        }
        return;
      }
      window.alert(`Save failed: ${String(error)}`);
    }
  }

  private grabSelection(): EvidenceQuote | null {
    const selection = window.getSelection();
    if (!selection || selection.isCollapsed || selection.rangeCount === 0) return null;
    const pane = el("book");
    const range = selection.getRangeAt(0);
    if (!pane.contains(range.startContainer) || !pane.contains(range.endContainer)) return null;
    const text = selection.toString();
    if (!text.trim()) return null;
    const prefix = document.createRange();
    prefix.selectNodeContents(pane);
    prefix.setEnd(range.startContainer, range.startOffset);
    const charStart = prefix.toString().length;
    const byteStart = charToByte(this.bookText, charStart);
    return {
      text,
      byte_start: byteStart,
      byte_end: byteStart + charToByte(text, text.length),
    };
  }

  // ------------------------------------------------------------------
  // search

  private wireSearch(): void {
    const box = el<HTMLInputElement>("search-box");
    const runSearch = async () => {
      const q = box.value;
      if (!q) {
        this.navigator = new SearchNavigator([]);
        el("search-counter").textContent = "";
        this.renderBook();
        return;
      }
      try {
        const response = await this.api.search(this.state.bookId, q);
        this.navigator = new SearchNavigator(response.hits, response.truncated);
        el("search-counter").textContent = this.navigator.counter;
        this.renderBook();
      } catch (error) {
        el("search-counter").textContent = error instanceof ApiError ? error.code : "search failed";
      }
    };
    box.addEventListener("keydown", (event) => {
      if (event.key === "Enter") void runSearch();
    });
    el("search-next").addEventListener("click", () => {
      this.navigator.next();
      el("search-counter").textContent = this.navigator.counter;
      this.renderBook();
    });
    el("search-prev").addEventListener("click", () => {
      this.navigator.prev();
      el("search-counter").textContent = this.navigator.counter;
      this.renderBook();
    });
  }

  // ------------------------------------------------------------------
  // completion

  private wireCompletion(): void {
    el("complete").addEventListener("click", () => {
      const check = this.state.canComplete();
      const modal = createCompletionModal("", {
        onSubmit: (comment) => void this.completeWith(comment, modal),
        onCancel: () => modal.remove(),
      });
      document.body.appendChild(modal);
      if (check.missingClaims.length > 0) {
        setCompletionError(
          modal,
          `Unsaved claims remain: ${check.missingClaims.join(", ")}. Completion will be rejected until every claim is saved.`,
        );
      }
    });
    el("reopen").addEventListener("click", () => {
      void this.api.reopenSession(this.summaryId).then(() => {
        this.state.complete = false;
        this.renderStatusBar();
        this.renderClaims();
      });
    });
  }

  private async completeWith(comment: string, modal: HTMLElement): Promise<void> {
    try {
      await this.api.saveComment(this.summaryId, comment);
      this.state.markCommentSaved();
      await this.api.completeSession(this.summaryId);
      this.state.complete = true;
      modal.remove();
      this.renderStatusBar();
      this.renderClaims();
    } catch (error) {
      if (error instanceof ApiError) {
        const missing = (error.payload.missing_claims as string[] | undefined) ?? [];
        setCompletionError(
          modal,
          missing.length > 0 ? `The service rejected completion; unsaved claims: ${missing.join(", ")}` : error.message,
        );
      } else {
        setCompletionError(modal, String(error));
      }
    }
  }

  // ------------------------------------------------------------------
  // keyboard + autosave

  private wireKeys(): void {
    let cursor = -1;
    document.addEventListener("keydown", (event) => {
      if (event.target instanceof HTMLInputElement || event.target instanceof HTMLTextAreaElement) return;
      if (event.key !== "j" && event.key !== "k") return;
      const rows = Array.from(document.querySelectorAll<HTMLElement>(".claim-row"));
      if (rows.length === 0) return;
      cursor = event.key === "j" ? Math.min(cursor + 1, rows.length - 1) : Math.max(cursor - 1, 0);
      rows.forEach((row, i) => row.classList.toggle("cursor", i === cursor));
      rows[cursor].scrollIntoView({ block: "nearest" });
    });
    document.addEventListener("keydown", (event) => {
      if (event.key !== "Enter") return;
      const row = document.querySelector<HTMLElement>(".claim-row.cursor");
      if (row && !(event.target instanceof HTMLInputElement) && !(event.target instanceof HTMLTextAreaElement)) {
        const claim = this.state.claims.find((c) => c.claim_id === row.dataset.claimId);
        if (claim) this.openPopup(claim);
      }
    });
  }

  private startAutosave(): void {
    if (this.autosaveTimer !== null) window.clearInterval(this.autosaveTimer);
    this.autosaveTimer = window.setInterval(() => {
      if (this.openDraft) {
        this.drafts.save(this.openDraft.claimId, this.openDraft.draft);
      }
    }, AUTOSAVE_INTERVAL_MS);
  }
}

async function pickSummary(annotator: string, bookId: string): Promise<void> {
  const api = new ApiClient(annotator);
  const listing = await api.summaries(bookId);
  const pane = el("claims");
  const title = el("summary-title");
  title.textContent = `${listing.title}: pick a summary (order is fixed for you)`;
  pane.replaceChildren(
    ...listing.summaries.map((entry, i) => {
      const row = document.createElement("li");
      row.className = "claim-row";
      row.textContent = entry.refused ? `Summary ${i + 1} (unavailable)` : `Summary ${i + 1}`;
      if (!entry.refused) {
        row.addEventListener("click", () => {
          const params = new URLSearchParams(window.location.search);
          params.set("summary", entry.id);
          window.location.search = params.toString();
        });
      }
      return row;
    }),
  );
}

export function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const annotator = params.get("annotator") ?? "";
  const summaryId = params.get("summary");
  const bookId = params.get("book");
  if (!annotator) {
    el("connectivity").hidden = false;
    el("connectivity").textContent = "Add ?annotator=<your-id> (and summary=<id> or book=<id>) to the URL.";
    return;
  }
  if (summaryId) {
    el("summary-title").textContent = summaryId;
    void new Workspace(annotator, summaryId).start();
  } else if (bookId) {
    void pickSummary(annotator, bookId).catch((error) => {
      el("connectivity").hidden = false;
      el("connectivity").textContent = String(error);
    });
  } else {
    el("connectivity").hidden = false;
    el("connectivity").textContent = "Missing summary= or book= in the URL.";
  }
}

boot();
