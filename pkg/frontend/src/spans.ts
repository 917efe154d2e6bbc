// Pure span arithmetic: snapping raw selections to token boundaries,
// merging overlaps the same way the server will, and diffing two span
// sets for the stale-revision view. No DOM, no fetch.

import type { Label, WireSpan } from "./api";

/** A span as the UI tracks it locally, before submission. */
export interface UiSpan {
  /** Client-local id; never sent to the server. */
  id: number;
  label: Label;
  /** Inclusive char offset into the raw document text. */
  start: number;
  /** Exclusive char offset into the raw document text. */
  end: number;
}

let nextSpanId = 1;

export function makeSpan(label: Label, start: number, end: number): UiSpan {
  return { id: nextSpanId++, label, start, end };
}

/** Test hook: make generated ids predictable. */
export function resetSpanIds(): void {
  nextSpanId = 1;
}

/**
 * Snap a raw character selection outward to token boundaries.
 *
 * Every token the selection touches becomes fully covered, so a mid-word
 * selection grows to the whole word. Selections that touch no token
 * (whitespace only, or an empty caret) snap to nothing and return null.
 *
 * `tokens` is the per-document boundary table served with the doc payload;
 * it is sorted and non-overlapping.
 */
export function snapToTokens(
  start: number,
  end: number,
  tokens: readonly [number, number][],
): [number, number] | null {
  if (end < start) [start, end] = [end, start];
  if (end === start) return null; // empty selection snaps to nothing
  let snapStart = Number.POSITIVE_INFINITY;
  let snapEnd = Number.NEGATIVE_INFINITY;
  for (const [ts, te] of tokens) {
    if (ts < end && te > start) {
      if (ts < snapStart) snapStart = ts;
      if (te > snapEnd) snapEnd = te;
    }
  }
  if (!Number.isFinite(snapStart) || snapEnd <= snapStart) return null;
  return [snapStart, snapEnd];
}

/**
 * Merge spans exactly the way the server does before storing: within each
 * label, strictly overlapping ranges collapse into one; ranges that merely
 * touch stay separate. Labels never merge across each other, so an event
 * span inside a story span survives. Output is ordered by (label, start),
 * which matches the server's stored order.
 */
export function mergeSpans(spans: readonly UiSpan[]): UiSpan[] {
  const byLabel = new Map<Label, UiSpan[]>();
  for (const sp of spans) {
    const bucket = byLabel.get(sp.label);
    if (bucket) bucket.push(sp);
    else byLabel.set(sp.label, [sp]);
  }
  const out: UiSpan[] = [];
  for (const label of [...byLabel.keys()].sort()) {
    const group = byLabel.get(label) ?? [];
    group.sort((a, b) => a.start - b.start || a.end - b.end);
    let current: UiSpan | null = null;
    for (const sp of group) {
      if (current && sp.start < current.end) {
        current = {
          id: current.id,
          label,
          start: current.start,
          end: Math.max(current.end, sp.end),
        };
        out[out.length - 1] = current;
      } else {
        current = { ...sp };
        out.push(current);
      }
    }
  }
  return out;
}

/** Strip local ids, producing the wire shape expected by POST /api/annotations. */
export function toWireSpans(spans: readonly UiSpan[]): WireSpan[] {
  return mergeSpans(spans).map(({ label, start, end }) => ({ label, start, end }));
}

export function spanText(text: string, span: { start: number; end: number }): string {
  return text.slice(span.start, span.end);
}

function sameSpan(a: WireSpan, b: WireSpan): boolean {
  return a.label === b.label && a.start === b.start && a.end === b.end;
}

export interface SpanDiff {
  /** Spans in my pending submission that the server does not have. */
  onlyMine: WireSpan[];
  /** Spans the server has that my pending submission lacks. */
  onlyTheirs: WireSpan[];
  /** Spans present in both. */
  both: WireSpan[];
}

/**
 * Compare a pending submission against what the server currently stores,
 * for the stale-revision re-confirm view. Both sides are compared in
 * merged wire form so cosmetic differences (split vs merged overlaps)
 * do not show up as conflicts.
 */
export function diffSpans(
  mine: readonly WireSpan[],
  theirs: readonly WireSpan[],
): SpanDiff {
  const onlyMine = mine.filter((m) => !theirs.some((t) => sameSpan(m, t)));
  const onlyTheirs = theirs.filter((t) => !mine.some((m) => sameSpan(m, t)));
  const both = mine.filter((m) => theirs.some((t) => sameSpan(m, t)));
  return { onlyMine, onlyTheirs, both };
}
