// DOM helpers for laying out a document as token and gap elements that
// carry their raw-text char offsets, and for painting span highlights
// over them. Offsets always refer to the raw text, never to markup.

import type { WireSpan } from "./api";

/**
 * Fill `container` with the document text, one <span> per token and one
 * per inter-token gap, each stamped with data-start/data-end. The
 * concatenated textContent equals `text` exactly.
 */
export function renderDocText(
  container: HTMLElement,
  text: string,
  tokens: readonly [number, number][],
): void {
  container.textContent = "";
  let cursor = 0;
  const append = (cls: string, start: number, end: number): void => {
    if (end <= start) return;
    const el = document.createElement("span");
    el.className = cls;
    el.dataset.start = String(start);
    el.dataset.end = String(end);
    el.textContent = text.slice(start, end);
    container.appendChild(el);
  };
  for (const [ts, te] of tokens) {
    append("gap", cursor, ts);
    append("tok", ts, te);
    cursor = te;
  }
  append("gap", cursor, text.length);
}

/**
 * Apply highlight classes for `spans` to a container previously filled by
 * renderDocText. A token is highlighted by any span it overlaps; a gap
 * only when it sits strictly inside a span, so highlights never bleed
 * past the annotated range.
 */
export function paintSpans(container: HTMLElement, spans: readonly WireSpan[]): void {
  for (const el of container.querySelectorAll<HTMLElement>(".tok, .gap")) {
    el.classList.remove("hl-story", "hl-event");
    const start = Number(el.dataset.start);
    const end = Number(el.dataset.end);
    for (const sp of spans) {
      const covered = el.classList.contains("tok")
        ? sp.start < end && sp.end > start
        : sp.start <= start && end <= sp.end;
      if (covered) el.classList.add(sp.label === "story" ? "hl-story" : "hl-event");
    }
  }
}

/**
 * The text the user actually sees highlighted for one span: the
 * concatenated content of every element carrying that span's highlight
 * class within [span.start, span.end), in document order.
 */
export function highlightedText(container: HTMLElement, span: WireSpan): string {
  const cls = span.label === "story" ? "hl-story" : "hl-event";
  let out = "";
  for (const el of container.querySelectorAll<HTMLElement>(`.${cls}`)) {
    const start = Number(el.dataset.start);
    const end = Number(el.dataset.end);
    if (start >= span.start && end <= span.end) out += el.textContent ?? "";
  }
  return out;
}

/**
 * Map a DOM Selection endpoint inside a renderDocText container to a raw
 * char offset, or null when the endpoint lies outside any offset-bearing
 * element.
 */
function endpointOffset(node: Node, offset: number): number | null {
  if (node.nodeType === Node.TEXT_NODE) {
    const el = node.parentElement;
    if (!el?.dataset.start) return null;
    return Number(el.dataset.start) + offset;
  }
  if (node instanceof HTMLElement) {
    const kids = node.childNodes;
    if (kids.length === 0) {
      return node.dataset.start ? Number(node.dataset.start) : null;
    }
    if (offset >= kids.length) {
      const last = kids[kids.length - 1];
      return last ? endpointOffset(last, last.textContent?.length ?? 0) : null;
    }
    const kid = kids[offset];
    return kid ? endpointOffset(kid, 0) : null;
  }
  return null;
}

/**
 * Read the browser's current selection as [start, end) raw-text offsets
 * within `container`. Returns null for collapsed, empty, or out-of-scope
 * selections.
 */
export function selectionOffsets(container: HTMLElement): [number, number] | null {
  const sel = window.getSelection?.();
  if (!sel || sel.rangeCount === 0 || sel.isCollapsed) return null;
  const range = sel.getRangeAt(0);
  if (!container.contains(range.startContainer) || !container.contains(range.endContainer)) {
    return null;
  }
  const start = endpointOffset(range.startContainer, range.startOffset);
  const end = endpointOffset(range.endContainer, range.endOffset);
  if (start === null || end === null || start === end) return null;
  return start <= end ? [start, end] : [end, start];
}
