// Application shell: annotator identity, tab navigation between the
// annotation screen and the agreement screen.

import { mountAgreement } from "./agreement";
import { mountAnnotator, type AnnotatorHandle } from "./annotator";

export interface AppHandle {
  whenIdle(): Promise<void>;
}

export function mountApp(root: HTMLElement, annotator: string): AppHandle {
  root.innerHTML = `
    <div class="app">
      <header class="topbar">
        <span class="brand">storyscope annotator</span>
        <nav class="tabs">
          <button type="button" class="tab tab-annotate active">Annotate</button>
          <button type="button" class="tab tab-agreement">Agreement</button>
        </nav>
        <span class="who"></span>
      </header>
      <main class="screen"></main>
    </div>
  `;
  const who = root.querySelector<HTMLSpanElement>(".who");
  if (who) who.textContent = annotator;
  const screen = root.querySelector<HTMLElement>(".screen");
  if (!screen) throw new Error("missing screen element");

  let annotatorHandle: AnnotatorHandle | null = null;
  let idle: () => Promise<void> = () => Promise.resolve();

  function activate(tab: "annotate" | "agreement"): void {
    annotatorHandle?.destroy();
    annotatorHandle = null;
    for (const btn of root.querySelectorAll<HTMLButtonElement>(".tab")) {
      btn.classList.toggle("active", btn.classList.contains(`tab-${tab}`));
    }
    if (tab === "annotate") {
      annotatorHandle = mountAnnotator(screen as HTMLElement, annotator);
      idle = annotatorHandle.whenIdle.bind(annotatorHandle);
    } else {
      const handle = mountAgreement(screen as HTMLElement);
      idle = handle.whenIdle.bind(handle);
    }
  }

  root.querySelector(".tab-annotate")?.addEventListener("click", () => activate("annotate"));
  root.querySelector(".tab-agreement")?.addEventListener("click", () => activate("agreement"));

  activate("annotate");

  return { whenIdle: () => idle() };
}
