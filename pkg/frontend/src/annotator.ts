// The annotation screen: one document at a time, span highlighting with
// token snapping, keyboard-driven labeling, draft autosave, and the
// submit / stale-revision flow against the annotation service.

import {
  ApiError,
  fetchDoc,
  fetchExport,
  fetchNextTask,
  submitAnnotation,
  type DocPayload,
  type Label,
  type WireSpan,
} from "./api";
import { CODEBOOK, SHORTCUTS } from "./codebook";
import { clearDraft, loadDraft, saveDraft } from "./drafts";
import {
  diffSpans,
  makeSpan,
  mergeSpans,
  snapToTokens,
  spanText,
  toWireSpans,
  type UiSpan,
} from "./spans";
import { highlightedText, paintSpans, renderDocText, selectionOffsets } from "./render";

export interface AnnotatorHandle {
  /** Resolves when the in-flight load/submit settles; for tests. */
  whenIdle(): Promise<void>;
  /** Tear down document-level listeners. */
  destroy(): void;
}

interface State {
  doc: DocPayload | null;
  spans: UiSpan[];
  undoStack: UiSpan[][];
  mode: Label;
  completed: number;
  remaining: number;
  /** Pending wire spans while the stale-revision dialog is open. */
  stalePending: WireSpan[] | null;
}

export function mountAnnotator(root: HTMLElement, annotator: string): AnnotatorHandle {
  const state: State = {
    doc: null,
    spans: [],
    undoStack: [],
    mode: "story",
    completed: 0,
    remaining: 0,
    stalePending: null,
  };

  root.innerHTML = `
    <div class="annotate">
      <div class="banner banner-retry" hidden>
        <span class="banner-msg"></span>
        <button type="button" class="retry-btn">Retry</button>
      </div>
      <div class="banner banner-error" hidden></div>
      <div class="doc-head" hidden>
        <span class="doc-id"></span>
        <span class="doc-meta"></span>
        <span class="progress"></span>
        <span class="mode-pill"></span>
      </div>
      <div class="workspace" hidden>
        <div class="doc-text"></div>
        <aside class="sidebar">
          <section class="span-list-box">
            <h3>Spans</h3>
            <ul class="span-list"></ul>
          </section>
          <section class="codebook"></section>
        </aside>
      </div>
      <div class="actions" hidden>
        <button type="button" class="undo-btn">Undo (u)</button>
        <button type="button" class="submit-btn">Submit (enter)</button>
      </div>
      <div class="dialog no-story-dialog" hidden>
        <p>No story? Submit this document with no spans and
           <code>story_present=false</code>?</p>
        <button type="button" class="confirm-no-story">Submit as no story</button>
        <button type="button" class="cancel-no-story">Keep annotating</button>
      </div>
      <div class="dialog stale-dialog" hidden>
        <p>Someone submitted a newer revision of this document while you were
           working. Review the differences before resubmitting.</p>
        <div class="stale-diff"></div>
        <button type="button" class="stale-resubmit">Resubmit mine</button>
        <button type="button" class="stale-discard">Discard mine</button>
      </div>
      <div class="done-screen" hidden>
        <h2>All done</h2>
        <p class="done-msg"></p>
      </div>
    </div>
  `;

  const q = <T extends HTMLElement>(sel: string): T => {
    const el = root.querySelector<T>(sel);
    if (!el) throw new Error(`missing element ${sel}`);
    return el;
  };
  const retryBanner = q<HTMLDivElement>(".banner-retry");
  const errorBanner = q<HTMLDivElement>(".banner-error");
  const docHead = q<HTMLDivElement>(".doc-head");
  const workspace = q<HTMLDivElement>(".workspace");
  const docTextEl = q<HTMLDivElement>(".doc-text");
  const spanList = q<HTMLUListElement>(".span-list");
  const codebookEl = q<HTMLElement>(".codebook");
  const actions = q<HTMLDivElement>(".actions");
  const noStoryDialog = q<HTMLDivElement>(".no-story-dialog");
  const staleDialog = q<HTMLDivElement>(".stale-dialog");
  const doneScreen = q<HTMLDivElement>(".done-screen");

  renderCodebook(codebookEl);

  let pending: Promise<void> = Promise.resolve();
  let retryAction: (() => Promise<void>) | null = null;

  function track(op: () => Promise<void>): Promise<void> {
    pending = pending.then(op, op);
    return pending;
  }

  // -- rendering ------------------------------------------------------------

  function wire(): WireSpan[] {
    return toWireSpans(state.spans);
  }

  function renderDoc(): void {
    const doc = state.doc;
    if (!doc) return;
    docHead.hidden = false;
    workspace.hidden = false;
    actions.hidden = false;
    doneScreen.hidden = true;
    q<HTMLSpanElement>(".doc-id").textContent = doc.id;
    q<HTMLSpanElement>(".doc-meta").textContent = `${doc.community} · ${doc.kind}`;
    q<HTMLSpanElement>(".progress").textContent =
      `${state.completed} done · ${state.remaining} left`;
    renderDocText(docTextEl, doc.text, doc.tokens);
    renderMode();
    renderSpans();
  }

  function renderMode(): void {
    const pill = q<HTMLSpanElement>(".mode-pill");
    pill.textContent = `${state.mode} mode`;
    pill.dataset.mode = state.mode;
  }

  function renderSpans(): void {
    const doc = state.doc;
    if (!doc) return;
    const merged = wire();
    paintSpans(docTextEl, merged);
    spanList.textContent = "";
    for (const sp of mergeSpans(state.spans)) {
      const li = document.createElement("li");
      li.className = `span-chip span-${sp.label}`;
      li.dataset.spanId = String(sp.id);
      const label = document.createElement("span");
      label.className = "chip-label";
      label.textContent = sp.label;
      const excerpt = document.createElement("span");
      excerpt.className = "chip-text";
      excerpt.textContent = clip(spanText(doc.text, sp), 60);
      const del = document.createElement("button");
      del.type = "button";
      del.className = "chip-delete";
      del.textContent = "×";
      del.addEventListener("click", () => deleteSpan(sp.id));
      li.append(label, excerpt, del);
      spanList.appendChild(li);
    }
  }

  function showError(msg: string): void {
    errorBanner.textContent = msg;
    errorBanner.hidden = false;
  }

  function clearBanners(): void {
    errorBanner.hidden = true;
    retryBanner.hidden = true;
  }

  // -- span editing ---------------------------------------------------------

  function pushUndo(): void {
    state.undoStack.push(state.spans.map((sp) => ({ ...sp })));
  }

  function persistDraft(): void {
    const doc = state.doc;
    if (!doc) return;
    saveDraft(annotator, doc.id, state.spans, doc.revisions[annotator] ?? 0);
  }

  function addSpanFromSelection(): void {
    const doc = state.doc;
    if (!doc) return;
    const offsets = selectionOffsets(docTextEl);
    if (!offsets) return;
    const snapped = snapToTokens(offsets[0], offsets[1], doc.tokens);
    window.getSelection?.()?.removeAllRanges();
    if (!snapped) return; // nothing but whitespace: ignore
    pushUndo();
    state.spans = mergeSpans([...state.spans, makeSpan(state.mode, snapped[0], snapped[1])]);
    persistDraft();
    renderSpans();
  }

  function deleteSpan(id: number): void {
    pushUndo();
    state.spans = state.spans.filter((sp) => sp.id !== id);
    persistDraft();
    renderSpans();
  }

  function undo(): void {
    const prev = state.undoStack.pop();
    if (!prev) return;
    state.spans = prev;
    persistDraft();
    renderSpans();
  }

  // -- loading --------------------------------------------------------------

  function loadNext(): Promise<void> {
    return track(async () => {
      clearBanners();
      let task;
      try {
        task = await fetchNextTask(annotator);
      } catch (e) {
        offerRetry(e, loadNext);
        return;
      }
      state.completed = task.completed;
      state.remaining = task.remaining;
      if (task.doc === null) {
        showDone();
        return;
      }
      state.doc = task.doc;
      state.undoStack = [];
      const draft = loadDraft(annotator, task.doc.id);
      state.spans = draft ? draft.spans.map((sp) => ({ ...sp })) : [];
      renderDoc();
    });
  }

  function showDone(): void {
    state.doc = null;
    docHead.hidden = true;
    workspace.hidden = true;
    actions.hidden = true;
    doneScreen.hidden = false;
    q<HTMLParagraphElement>(".done-msg").textContent =
      `Every document in your queue is annotated (${state.completed} completed).`;
  }

  function offerRetry(e: unknown, action: () => Promise<void>): void {
    if (e instanceof ApiError && e.code === "network") {
      q<HTMLSpanElement>(".banner-msg").textContent =
        "Annotation service unreachable. Your spans are saved locally.";
      retryBanner.hidden = false;
      retryAction = action;
    } else {
      showError(e instanceof Error ? e.message : String(e));
    }
  }

  // -- submit ---------------------------------------------------------------

  function expectedRevision(doc: DocPayload): number {
    return (doc.revisions[annotator] ?? 0) + 1;
  }

  function requestSubmit(): Promise<void> {
    const doc = state.doc;
    if (!doc) return pending;
    if (!noStoryDialog.hidden || !staleDialog.hidden) return pending;
    if (state.spans.length === 0) {
      noStoryDialog.hidden = false;
      return pending;
    }
    return doSubmit(wire(), undefined);
  }

  function doSubmit(spans: WireSpan[], storyPresent: boolean | undefined): Promise<void> {
    return track(async () => {
      const doc = state.doc;
      if (!doc) return;
      clearBanners();
      try {
        await submitAnnotation({
          doc_id: doc.id,
          annotator,
          revision: expectedRevision(doc),
          spans,
          story_present: storyPresent,
        });
      } catch (e) {
        if (e instanceof ApiError && e.code === "stale_revision") {
          await openStaleDialog(spans);
        } else if (e instanceof ApiError && e.code === "network") {
          offerRetry(e, () => doSubmit(spans, storyPresent));
        } else {
          showError(e instanceof Error ? e.message : String(e));
        }
        return;
      }
      clearDraft(annotator, doc.id);
      state.spans = [];
      state.undoStack = [];
    });
  }

  async function openStaleDialog(mine: WireSpan[]): Promise<void> {
    const doc = state.doc;
    if (!doc) return;
    // Refresh the revision ladder and pull the server's current spans so
    // the annotator can see exactly what changed under them.
    const [fresh, exported] = await Promise.all([fetchDoc(doc.id), fetchExport()]);
    state.doc = fresh;
    const theirs: WireSpan[] = exported.annotations
      .filter((a) => a.doc_id === doc.id && a.annotator === annotator)
      .map(({ label, start, end }) => ({ label, start, end }));
    state.stalePending = mine;
    renderStaleDiff(doc.text, mine, theirs);
    staleDialog.hidden = false;
  }

  function renderStaleDiff(text: string, mine: WireSpan[], theirs: WireSpan[]): void {
    const diff = diffSpans(mine, theirs);
    const box = q<HTMLDivElement>(".stale-diff");
    box.textContent = "";
    const section = (title: string, cls: string, spans: WireSpan[]): void => {
      const h = document.createElement("h4");
      h.textContent = title;
      box.appendChild(h);
      const ul = document.createElement("ul");
      ul.className = cls;
      if (spans.length === 0) {
        const li = document.createElement("li");
        li.className = "diff-empty";
        li.textContent = "(none)";
        ul.appendChild(li);
      }
      for (const sp of spans) {
        const li = document.createElement("li");
        li.textContent = `[${sp.label}] "${clip(spanText(text, sp), 80)}"`;
        ul.appendChild(li);
      }
      box.appendChild(ul);
    };
    section("Only in yours", "diff-mine", diff.onlyMine);
    section("Only on the server", "diff-theirs", diff.onlyTheirs);
    section("In both", "diff-both", diff.both);
  }

  function submitWentThrough(): boolean {
    return (
      noStoryDialog.hidden &&
      staleDialog.hidden &&
      errorBanner.hidden &&
      retryBanner.hidden
    );
  }

  function confirmStale(): Promise<void> {
    const mine = state.stalePending;
    staleDialog.hidden = true;
    state.stalePending = null;
    if (!mine) return pending;
    return doSubmit(mine, undefined).then(() => {
      if (submitWentThrough()) return loadNext();
      return undefined;
    });
  }

  function discardStale(): Promise<void> {
    const doc = state.doc;
    staleDialog.hidden = true;
    state.stalePending = null;
    if (doc) clearDraft(annotator, doc.id);
    state.spans = [];
    state.undoStack = [];
    return loadNext();
  }

  // -- events ---------------------------------------------------------------

  docTextEl.addEventListener("mouseup", () => addSpanFromSelection());

  q<HTMLButtonElement>(".retry-btn").addEventListener("click", () => {
    const action = retryAction;
    retryAction = null;
    retryBanner.hidden = true;
    if (action) void action();
  });
  q<HTMLButtonElement>(".undo-btn").addEventListener("click", () => undo());
  q<HTMLButtonElement>(".submit-btn").addEventListener("click", () => {
    void submitAndAdvance();
  });
  q<HTMLButtonElement>(".confirm-no-story").addEventListener("click", () => {
    noStoryDialog.hidden = true;
    void doSubmit([], false).then(() => {
      if (submitWentThrough()) return loadNext();
      return undefined;
    });
  });
  q<HTMLButtonElement>(".cancel-no-story").addEventListener("click", () => {
    noStoryDialog.hidden = true;
  });
  q<HTMLButtonElement>(".stale-resubmit").addEventListener("click", () => {
    void confirmStale();
  });
  q<HTMLButtonElement>(".stale-discard").addEventListener("click", () => {
    void discardStale();
  });

  function submitAndAdvance(): Promise<void> {
    const hadSpans = state.spans.length > 0;
    return requestSubmit().then(() => {
      // Only advance when the submit actually went through: dialogs and
      // error banners leave the document in place.
      if (hadSpans && state.spans.length === 0 && submitWentThrough()) {
        return loadNext();
      }
      return undefined;
    });
  }

  function onKeyDown(ev: KeyboardEvent): void {
    const target = ev.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) return;
    if (!noStoryDialog.hidden || !staleDialog.hidden) return;
    if (ev.key === "s") {
      state.mode = "story";
      renderMode();
    } else if (ev.key === "e") {
      state.mode = "event";
      renderMode();
    } else if (ev.key === "Enter") {
      ev.preventDefault();
      void submitAndAdvance();
    } else if (ev.key === "u") {
      undo();
    }
  }
  document.addEventListener("keydown", onKeyDown);

  void loadNext();

  return {
    whenIdle: () => pending,
    destroy: () => document.removeEventListener("keydown", onKeyDown),
  };
}

// -- small helpers ------------------------------------------------------------

function clip(s: string, n: number): string {
  return s.length > n ? `${s.slice(0, n - 1)}…` : s;
}

function renderCodebook(container: HTMLElement): void {
  container.textContent = "";
  const h = document.createElement("h3");
  h.textContent = "Codebook";
  container.appendChild(h);
  for (const entry of CODEBOOK) {
    const box = document.createElement("div");
    box.className = `codebook-entry codebook-${entry.label}`;
    const title = document.createElement("h4");
    title.textContent = entry.title;
    const def = document.createElement("p");
    def.textContent = entry.definition;
    box.append(title, def);
    const lists: [string, string[]][] = [
      ["Mark", entry.include],
      ["Do not mark", entry.exclude],
    ];
    for (const [caption, items] of lists) {
      const cap = document.createElement("strong");
      cap.textContent = caption;
      const ul = document.createElement("ul");
      for (const item of items) {
        const li = document.createElement("li");
        li.textContent = item;
        ul.appendChild(li);
      }
      box.append(cap, ul);
    }
    container.appendChild(box);
  }
  const keys = document.createElement("dl");
  keys.className = "shortcuts";
  for (const sc of SHORTCUTS) {
    const dt = document.createElement("dt");
    dt.textContent = sc.key;
    const dd = document.createElement("dd");
    dd.textContent = sc.action;
    keys.append(dt, dd);
  }
  container.appendChild(keys);
}

/** Exposed for the round-trip test: what the UI shows as highlighted. */
export { highlightedText };
