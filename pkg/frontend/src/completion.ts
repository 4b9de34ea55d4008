export interface CompletionHandlers {
  onSubmit(comment: string): void;
  onCancel(): void;
}

const COMMENT_PLACEHOLDER =
  "Overall comment on this summary's claims: note omissions of key content, " +
  "salience problems (over- or under-emphasis), chronology issues, and factuality concerns.";

/** Completion modal: collects the required general comment and submits.
 * The submit button stays disabled while the comment is empty. */
export function createCompletionModal(existingComment: string, handlers: CompletionHandlers): HTMLElement {
  const overlay = document.createElement("div");
  overlay.className = "popup-overlay";
  const modal = document.createElement("div");
  modal.className = "popup completion-modal";
  overlay.appendChild(modal);

  const heading = document.createElement("h3");
  heading.textContent = "General comments";
  modal.appendChild(heading);

  const comment = document.createElement("textarea");
  comment.className = "general-comment";
  comment.placeholder = COMMENT_PLACEHOLDER;
  comment.value = existingComment;
  modal.appendChild(comment);

  const errorLine = document.createElement("p");
  errorLine.className = "validation";
  modal.appendChild(errorLine);

  const buttons = document.createElement("div");
  buttons.className = "popup-buttons";
  const submit = document.createElement("button");
  submit.type = "button";
  submit.className = "submit";
  submit.textContent = "Save comment and complete";
  submit.disabled = comment.value.trim() === "";
  comment.addEventListener("input", () => {
    submit.disabled = comment.value.trim() === "";
  });
  submit.addEventListener("click", () => handlers.onSubmit(comment.value.trim()));
  const cancel = document.createElement("button");
  cancel.type = "button";
  cancel.className = "cancel";
  cancel.textContent = "Not yet";
  cancel.addEventListener("click", () => handlers.onCancel());
  buttons.append(submit, cancel);
  modal.appendChild(buttons);

  return overlay;
}

export function setCompletionError(modal: HTMLElement, message: string): void {
  const line = modal.querySelector<HTMLElement>(".validation");
  if (line) line.textContent = message;
}
