// Local draft persistence. One draft per (annotator, document), stored in
// localStorage so a crash or page reload loses nothing. All failures are
// swallowed with a warning: drafts are a convenience, never load-bearing.

import type { UiSpan } from "./spans";

export interface Draft {
  spans: UiSpan[];
  /** Revision of the doc the draft was written against. */
  revision: number;
  savedAt: number;
}

function draftKey(annotator: string, docId: string): string {
  return `storyscope.draft.${annotator}.${docId}`;
}

export function saveDraft(
  annotator: string,
  docId: string,
  spans: readonly UiSpan[],
  revision: number,
): void {
  const draft: Draft = { spans: [...spans], revision, savedAt: Date.now() };
  try {
    localStorage.setItem(draftKey(annotator, docId), JSON.stringify(draft));
  } catch (e) {
    console.warn("[drafts] save failed:", e);
  }
}

export function loadDraft(annotator: string, docId: string): Draft | null {
  let raw: string | null = null;
  try {
    raw = localStorage.getItem(draftKey(annotator, docId));
  } catch (e) {
    console.warn("[drafts] load failed:", e);
    return null;
  }
  if (raw === null) return null;
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch {
    return null;
  }
  if (
    typeof parsed !== "object" ||
    parsed === null ||
    !Array.isArray((parsed as Draft).spans) ||
    typeof (parsed as Draft).revision !== "number"
  ) {
    return null;
  }
  const draft = parsed as Draft;
  const ok = draft.spans.every(
    (sp) =>
      (sp.label === "story" || sp.label === "event") &&
      Number.isInteger(sp.start) &&
      Number.isInteger(sp.end) &&
      sp.start < sp.end,
  );
  return ok ? draft : null;
}

export function clearDraft(annotator: string, docId: string): void {
  try {
    localStorage.removeItem(draftKey(annotator, docId));
  } catch (e) {
    console.warn("[drafts] clear failed:", e);
  }
}
