import { mountApp } from "./app";
import "./style.css";

const root = document.getElementById("root");
if (root) {
  const annotator = new URLSearchParams(window.location.search).get("annotator");
  if (annotator) {
    mountApp(root, annotator);
  } else {
    // No identity yet: ask once, then reload with it in the URL so a
    // bookmark or refresh keeps the same session.
    root.innerHTML = `
      <div class="picker">
        <h2>Who is annotating?</h2>
        <form>
          <input type="text" name="annotator" placeholder="annotator id" required>
          <button type="submit">Start</button>
        </form>
      </div>
    `;
    root.querySelector("form")?.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const input = root.querySelector<HTMLInputElement>("input[name=annotator]");
      const name = input?.value.trim();
      if (name) {
        const url = new URL(window.location.href);
        url.searchParams.set("annotator", name);
        window.location.assign(url.toString());
      }
    });
  }
}
