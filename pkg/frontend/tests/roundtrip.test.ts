// @vitest-environment happy-dom
/** The acceptance flow end to end against the fake service: annotate one
 * claim through the popup, reload, and the annotation reappears;
 * completion stays blocked (naming claims) until everything is saved plus
 * a non-empty comment; a 3-hit search navigates 1/3..3/3 with aligned
 * highlights. */
import { describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { createAnnotationPopup } from "../src/popup.js";
import { SearchNavigator, computeHighlightSegments } from "../src/search.js";
import { WorkspaceState } from "../src/state.js";
import type { Draft } from "../src/state.js";
import { FakeService, threeClaims } from "./fake_service.js";

const BOOK = "Salt, they said. Nothing but salt in the crates. But salt does not whisper at night.";

async function saveThroughPopup(api: ApiClient, state: WorkspaceState, claimId: string, draft: Draft) {
  const claim = state.claims.find((c) => c.claim_id === claimId)!;
  const response = await api.saveAnnotation(
    claim.claim_id,
    { label: draft.label!, reason: draft.reason || null, evidence: draft.evidence },
    state.version(claim.claim_id) || undefined,
  );
  state.markSaved(claim.claim_id, response.version, {
    label: draft.label!,
    reason: draft.reason || null,
    evidence: draft.evidence,
  });
}

describe("UI round-trip", () => {
  it("annotation made through the popup survives a reload", async () => {
    const service = new FakeService("s1", "b1", threeClaims(), BOOK);
    const api = new ApiClient("ann1", service.fetch);
    const state = new WorkspaceState(await api.claims("s1"));

    // Drive the real popup DOM for the first claim.
    const saved = new Promise<Draft>((resolve) => {
      const popup = createAnnotationPopup(state.claims[0], state.draftFor("s1--c000"), {
        onSave: resolve,
        onCancel: () => {},
      });
      document.body.appendChild(popup);
      popup.querySelector<HTMLInputElement>('input[value="Unfaithful"]')!.click();
      const reason = popup.querySelector<HTMLTextAreaElement>("textarea.reason")!;
      reason.value = "She sails at dusk, not dawn.";
      reason.dispatchEvent(new Event("input"));
      const pasteBox = popup.querySelector<HTMLInputElement>('input[type="text"]')!;
      pasteBox.value = "cast off under the evening bell";
      popup.querySelectorAll<HTMLButtonElement>("button").forEach((b) => {
        if (b.textContent === "Add quote") b.click();
      });
      popup.querySelector<HTMLButtonElement>("button.save")!.click();
    });
    await saveThroughPopup(api, state, "s1--c000", await saved);
    expect(state.status("s1--c000")).toBe("saved");

    // "Reload the page": a fresh workspace built from the server payload.
    const reloaded = new WorkspaceState(await api.claims("s1"));
    expect(reloaded.status("s1--c000")).toBe("saved");
    const draft = reloaded.draftFor("s1--c000");
    expect(draft.label).toBe("Unfaithful");
    expect(draft.reason).toBe("She sails at dusk, not dawn.");
    expect(draft.evidence.map((q) => q.text)).toEqual(["cast off under the evening bell"]);

    // And the popup prefilled from the reloaded state shows all of it.
    const popup = createAnnotationPopup(reloaded.claims[0], draft, { onSave: vi.fn(), onCancel: vi.fn() });
    document.body.appendChild(popup);
    expect(popup.querySelector<HTMLInputElement>('input[value="Unfaithful"]')!.checked).toBe(true);
    expect(popup.querySelector<HTMLTextAreaElement>("textarea.reason")!.value).toBe(
      "She sails at dusk, not dawn.",
    );
    expect(popup.querySelector(".evidence-list")!.textContent).toContain("cast off under the evening bell");
  });

  it("completion is blocked with named claims until saves and comment exist", async () => {
    const service = new FakeService("s1", "b1", threeClaims(), BOOK);
    const api = new ApiClient("ann1", service.fetch);
    const state = new WorkspaceState(await api.claims("s1"));

    await saveThroughPopup(api, state, "s1--c000", {
      label: "Faithful",
      reason: "",
      evidence: [],
      unsynced: false,
    });

    // Client-side gate names the outstanding claims.
    const check = state.canComplete();
    expect(check.ok).toBe(false);
    expect(check.missingClaims).toEqual(["s1--c001", "s1--c002"]);

    // The service enforces the same thing.
    try {
      await api.completeSession("s1");
      expect.unreachable("should have thrown");
    } catch (error) {
      expect((error as ApiError).payload.missing_claims).toEqual(["s1--c001", "s1--c002"]);
    }

    for (const claimId of ["s1--c001", "s1--c002"]) {
      await saveThroughPopup(api, state, claimId, {
        label: "Faithful",
        reason: "",
        evidence: [],
        unsynced: false,
      });
    }
    // Still blocked: the general comment is missing.
    try {
      await api.completeSession("s1");
      expect.unreachable("should have thrown");
    } catch (error) {
      expect((error as ApiError).payload.missing_comment).toBe(true);
    }

    await api.saveComment("s1", "Solid but overemphasizes the ending.");
    state.markCommentSaved();
    expect(state.canComplete().ok).toBe(true);
    const done = await api.completeSession("s1");
    expect(done.complete).toBe(true);

    // Completion locks editing until an explicit reopen.
    await expect(
      api.saveAnnotation("s1--c000", { label: "Unfaithful", reason: null, evidence: [] }, 1),
    ).rejects.toMatchObject({ status: 409, code: "SessionCompleted" });
    await api.reopenSession("s1");
    const afterReopen = await api.saveAnnotation(
      "s1--c000",
      { label: "Unfaithful", reason: null, evidence: [] },
      1,
    );
    expect(afterReopen.version).toBe(2);
  });

  it("a 3-hit search navigates 1/3..3/3 with aligned highlights", async () => {
    const service = new FakeService("s1", "b1", threeClaims(), BOOK);
    const api = new ApiClient("ann1", service.fetch);
    const response = await api.search("b1", "salt");
    expect(response.hits).toHaveLength(3);

    const nav = new SearchNavigator(response.hits, response.truncated);
    const counters = [nav.counter];
    nav.next();
    counters.push(nav.counter);
    nav.next();
    counters.push(nav.counter);
    expect(counters).toEqual(["1/3", "2/3", "3/3"]);
    nav.next();
    expect(nav.counter).toBe("1/3");

    for (let active = 0; active < 3; active++) {
      const segments = computeHighlightSegments(BOOK, response.hits, active);
      expect(segments.map((s) => s.text).join("")).toBe(BOOK);
      const marked = segments.filter((s) => s.kind !== "plain");
      expect(marked).toHaveLength(3);
      for (const segment of marked) {
        expect(segment.text.toLowerCase()).toBe("salt");
      }
      expect(segments.findIndex((s) => s.kind === "active")).toBeGreaterThanOrEqual(0);
      expect(segments.find((s) => s.kind === "active")!.hitIndex).toBe(active);
    }
  });
});
