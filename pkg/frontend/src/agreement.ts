// Agreement screen: chance-corrected agreement per label and unit, a list
// of documents where the two annotators disagree, and a side-by-side
// comparison (including the adjudicator's pass when one exists). All
// agreement numbers come from GET /api/agreement verbatim; this module
// never computes kappa itself.

import {
  ApiError,
  fetchAgreement,
  fetchExport,
  type ExportPayload,
  type Label,
  type WireSpan,
} from "./api";
import { paintSpans } from "./render";

type Unit = "document" | "token";

export interface AgreementHandle {
  whenIdle(): Promise<void>;
}

export function mountAgreement(root: HTMLElement): AgreementHandle {
  root.innerHTML = `
    <div class="agreement">
      <div class="agreement-controls">
        <label>Label
          <select class="label-select">
            <option value="story">story</option>
            <option value="event">event</option>
          </select>
        </label>
        <label>Unit
          <select class="unit-select">
            <option value="document">document</option>
            <option value="token">token</option>
          </select>
        </label>
      </div>
      <div class="banner banner-error" hidden></div>
      <div class="kappa-box" hidden>
        <h3>Agreement</h3>
        <dl>
          <dt>kappa</dt><dd class="kappa-value"></dd>
          <dt>observed</dt><dd class="observed-value"></dd>
          <dt>expected by chance</dt><dd class="expected-value"></dd>
          <dt>documents</dt><dd class="ndocs-value"></dd>
        </dl>
      </div>
      <div class="no-overlap" hidden>
        <p>No documents have been completed by both annotators yet, so there
           is nothing to compare.</p>
      </div>
      <div class="disagreements">
        <h3>Disagreements</h3>
        <ul class="disagreement-list"></ul>
      </div>
      <div class="compare" hidden>
        <h3 class="compare-title"></h3>
        <div class="compare-panels"></div>
      </div>
    </div>
  `;

  const q = <T extends HTMLElement>(sel: string): T => {
    const el = root.querySelector<T>(sel);
    if (!el) throw new Error(`missing element ${sel}`);
    return el;
  };
  const labelSelect = q<HTMLSelectElement>(".label-select");
  const unitSelect = q<HTMLSelectElement>(".unit-select");
  const errorBanner = q<HTMLDivElement>(".banner-error");
  const kappaBox = q<HTMLDivElement>(".kappa-box");
  const noOverlap = q<HTMLDivElement>(".no-overlap");
  const listEl = q<HTMLUListElement>(".disagreement-list");
  const compareEl = q<HTMLDivElement>(".compare");

  let exported: ExportPayload | null = null;
  let pending: Promise<void> = Promise.resolve();

  function track(op: () => Promise<void>): Promise<void> {
    pending = pending.then(op, op);
    return pending;
  }

  function selectedLabel(): Label {
    return labelSelect.value as Label;
  }

  function refresh(): Promise<void> {
    return track(async () => {
      errorBanner.hidden = true;
      compareEl.hidden = true;
      const label = selectedLabel();
      const unit = unitSelect.value as Unit;
      try {
        const agr = await fetchAgreement(label, unit);
        // Displayed digits are the server's numbers, full precision.
        q<HTMLElement>(".kappa-value").textContent = String(agr.kappa);
        q<HTMLElement>(".observed-value").textContent = String(agr.observed_agreement);
        q<HTMLElement>(".expected-value").textContent = String(agr.expected_agreement);
        q<HTMLElement>(".ndocs-value").textContent = String(agr.n_docs);
        kappaBox.hidden = false;
        noOverlap.hidden = true;
      } catch (e) {
        kappaBox.hidden = true;
        if (e instanceof ApiError && e.code === "no_overlap") {
          noOverlap.hidden = false;
        } else {
          errorBanner.textContent = e instanceof Error ? e.message : String(e);
          errorBanner.hidden = false;
          return;
        }
      }
      try {
        exported = await fetchExport();
      } catch (e) {
        errorBanner.textContent = e instanceof Error ? e.message : String(e);
        errorBanner.hidden = false;
        return;
      }
      renderDisagreements();
    });
  }

  function spansFor(docId: string, who: string, label: Label): WireSpan[] {
    if (!exported) return [];
    return exported.annotations
      .filter((a) => a.doc_id === docId && a.annotator === who && a.label === label)
      .map(({ label: l, start, end }) => ({ label: l, start, end }));
  }

  function sameSpanSet(a: WireSpan[], b: WireSpan[]): boolean {
    if (a.length !== b.length) return false;
    const key = (sp: WireSpan): string => `${sp.start}:${sp.end}`;
    const bs = new Set(b.map(key));
    return a.every((sp) => bs.has(key(sp)));
  }

  function annotatorNames(): { annotators: string[]; adjudicators: string[] } {
    const annotators = new Set<string>();
    const adjudicators = new Set<string>();
    for (const c of exported?.completions ?? []) {
      (c.role === "adjudicator" ? adjudicators : annotators).add(c.annotator);
    }
    return { annotators: [...annotators].sort(), adjudicators: [...adjudicators].sort() };
  }

  function renderDisagreements(): void {
    listEl.textContent = "";
    if (!exported) return;
    const label = selectedLabel();
    const { annotators } = annotatorNames();
    if (annotators.length < 2) return;
    const [a, b] = annotators as [string, string];
    const doneBy = (who: string): Set<string> =>
      new Set(
        (exported?.completions ?? [])
          .filter((c) => c.annotator === who)
          .map((c) => c.doc_id),
      );
    const shared = [...doneBy(a)].filter((id) => doneBy(b).has(id)).sort();
    let found = 0;
    for (const docId of shared) {
      if (sameSpanSet(spansFor(docId, a, label), spansFor(docId, b, label))) continue;
      found += 1;
      const li = document.createElement("li");
      li.className = "disagreement-row";
      const btn = document.createElement("button");
      btn.type = "button";
      btn.dataset.docId = docId;
      btn.textContent = `${docId} — ${a} and ${b} disagree on ${label} spans`;
      btn.addEventListener("click", () => openComparison(docId));
      li.appendChild(btn);
      listEl.appendChild(li);
    }
    if (found === 0) {
      const li = document.createElement("li");
      li.className = "disagreement-none";
      li.textContent = `No ${label}-span disagreements on shared documents.`;
      listEl.appendChild(li);
    }
  }

  function openComparison(docId: string): void {
    if (!exported) return;
    const doc = exported.documents.find((d) => d.id === docId);
    if (!doc) return;
    const label = selectedLabel();
    const { annotators, adjudicators } = annotatorNames();
    compareEl.hidden = false;
    q<HTMLElement>(".compare-title").textContent = `${docId}: ${label} spans side by side`;
    const panels = q<HTMLDivElement>(".compare-panels");
    panels.textContent = "";
    const columns = [...annotators];
    for (const judge of adjudicators) {
      if (
        exported.completions.some(
          (c) => c.doc_id === docId && c.annotator === judge,
        )
      ) {
        columns.push(judge);
      }
    }
    for (const who of columns) {
      const panel = document.createElement("div");
      panel.className = "compare-panel";
      panel.dataset.annotator = who;
      const head = document.createElement("h4");
      const isJudge = adjudicators.includes(who);
      head.textContent = isJudge ? `${who} (adjudicator)` : who;
      const body = document.createElement("div");
      body.className = "doc-text compare-text";
      // The token table is not part of the export payload; for read-only
      // display the text is cut at the stored span boundaries instead, so
      // highlights map exactly onto the annotated characters.
      const spans = spansFor(docId, who, label);
      splitForSpans(body, doc.text, spans);
      paintSpans(body, spans);
      panel.append(head, body);
      panels.appendChild(panel);
    }
  }

  labelSelect.addEventListener("change", () => void refresh());
  unitSelect.addEventListener("change", () => void refresh());

  void refresh();

  return { whenIdle: () => pending };
}

/**
 * Re-segment a single-segment doc container so that each stored span's
 * boundaries fall on element boundaries; highlights then map exactly onto
 * the annotated characters.
 */
function splitForSpans(container: HTMLElement, text: string, spans: WireSpan[]): void {
  const cuts = new Set<number>([0, text.length]);
  for (const sp of spans) {
    cuts.add(sp.start);
    cuts.add(sp.end);
  }
  const ordered = [...cuts].sort((x, y) => x - y);
  container.textContent = "";
  for (let i = 0; i + 1 < ordered.length; i++) {
    const start = ordered[i] ?? 0;
    const end = ordered[i + 1] ?? 0;
    if (end <= start) continue;
    const el = document.createElement("span");
    el.className = "tok";
    el.dataset.start = String(start);
    el.dataset.end = String(end);
    el.textContent = text.slice(start, end);
    container.appendChild(el);
  }
}
