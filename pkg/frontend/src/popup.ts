import type { Draft } from "./state.js";
import type { ClaimRow, EvidenceQuote } from "./types.js";
import { LABELS } from "./types.js";

export interface PopupHandlers {
  onSave(draft: Draft): void;
  onCancel(): void;
  onDraftChange?(draft: Draft): void;
  /** Returns the book pane's current selection, if any. */
  currentSelection?(): EvidenceQuote | null;
}

function evidenceRow(quote: EvidenceQuote, onRemove: () => void): HTMLElement {
  const row = document.createElement("li");
  row.className = "evidence-row";
  const text = document.createElement("span");
  text.textContent = quote.text;
  const where =
    quote.byte_start !== null && quote.byte_end !== null ? ` [${quote.byte_start}-${quote.byte_end}]` : "";
  const meta = document.createElement("small");
  meta.textContent = where;
  const remove = document.createElement("button");
  remove.type = "button";
  remove.textContent = "remove";
  remove.addEventListener("click", onRemove);
  row.append(text, meta, remove);
  return row;
}

/** The per-claim annotation popup: exactly one of the four labels, a
 * free-form reason, and evidence quotes added by pasting or from the
 * current book-pane selection. Save is rejected until a label is chosen;
 * cancel never calls back with data. */
export function createAnnotationPopup(claim: ClaimRow, draft: Draft, handlers: PopupHandlers): HTMLElement {
  const working: Draft = {
    label: draft.label,
    reason: draft.reason,
    evidence: draft.evidence.map((q) => ({ ...q })),
    unsynced: draft.unsynced,
  };

  const overlay = document.createElement("div");
  overlay.className = "popup-overlay";
  const popup = document.createElement("div");
  popup.className = "popup";
  overlay.appendChild(popup);

  const heading = document.createElement("h3");
  heading.textContent = `Claim ${claim.index + 1}`;
  const claimText = document.createElement("p");
  claimText.className = "claim-text";
  claimText.textContent = claim.text;
  popup.append(heading, claimText);

  const labelGroup = document.createElement("div");
  labelGroup.className = "label-group";
  for (const label of LABELS) {
    const wrapper = document.createElement("label");
    const radio = document.createElement("input");
    radio.type = "radio";
    radio.name = "label";
    radio.value = label;
    radio.checked = working.label === label;
    radio.addEventListener("change", () => {
      working.label = label;
      validation.textContent = "";
      handlers.onDraftChange?.(working);
    });
    wrapper.append(radio, document.createTextNode(label));
    labelGroup.appendChild(wrapper);
  }
  popup.appendChild(labelGroup);

  const reason = document.createElement("textarea");
  reason.className = "reason";
  reason.placeholder = "Reasoning for the label (quote or explain)";
  reason.value = working.reason;
  reason.addEventListener("input", () => {
    working.reason = reason.value;
    handlers.onDraftChange?.(working);
  });
  popup.appendChild(reason);

  const evidenceList = document.createElement("ul");
  evidenceList.className = "evidence-list";

  const renderEvidence = () => {
    evidenceList.replaceChildren(
      ...working.evidence.map((quote, i) =>
        evidenceRow(quote, () => {
          working.evidence.splice(i, 1);
          renderEvidence();
          handlers.onDraftChange?.(working);
        }),
      ),
    );
  };
  renderEvidence();
  popup.appendChild(evidenceList);

  const evidenceControls = document.createElement("div");
  evidenceControls.className = "evidence-controls";
  const pasteBox = document.createElement("input");
  pasteBox.type = "text";
  pasteBox.placeholder = "Paste an evidence quote";
  const addPasted = document.createElement("button");
  addPasted.type = "button";
  addPasted.textContent = "Add quote";
  addPasted.addEventListener("click", () => {
    const text = pasteBox.value.trim();
    if (!text) return;
    working.evidence.push({ text, byte_start: null, byte_end: null });
    pasteBox.value = "";
    renderEvidence();
    handlers.onDraftChange?.(working);
  });
  evidenceControls.append(pasteBox, addPasted);
  if (handlers.currentSelection) {
    const fromSelection = document.createElement("button");
    fromSelection.type = "button";
    fromSelection.className = "from-selection";
    fromSelection.textContent = "Use current selection";
    fromSelection.addEventListener("click", () => {
      const quote = handlers.currentSelection!();
      if (!quote) {
        validation.textContent = "Select some book text first.";
        return;
      }
      working.evidence.push(quote);
      renderEvidence();
      handlers.onDraftChange?.(working);
    });
    evidenceControls.appendChild(fromSelection);
  }
  popup.appendChild(evidenceControls);

  const validation = document.createElement("p");
  validation.className = "validation";
  popup.appendChild(validation);

  const buttons = document.createElement("div");
  buttons.className = "popup-buttons";
  const save = document.createElement("button");
  save.type = "button";
  save.className = "save";
  save.textContent = "Save";
  save.addEventListener("click", () => {
    if (!working.label) {
      validation.textContent = "Choose one of the four labels before saving.";
      return;
    }
    handlers.onSave(working);
  });
  const cancel = document.createElement("button");
  cancel.type = "button";
  cancel.className = "cancel";
  cancel.textContent = "Cancel";
  cancel.addEventListener("click", () => handlers.onCancel());
  buttons.append(save, cancel);
  popup.appendChild(buttons);

  return overlay;
}
