// Application bootstrap: wires the editor state, canvas view and chrome
// (slap list, save button, status line, conflict banner, keyboard help).

import { ReviewApi } from "./api.js";
import { EditorView } from "./editor.js";
import { EditorState } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function start(): Promise<void> {
  const api = new ReviewApi("");
  const state = new EditorState(api);
  const canvas = el<HTMLCanvasElement>("editor-canvas");
  const view = new EditorView(state, canvas, () => renderChrome());
  view.attach();

  const slapList = el<HTMLUListElement>("slap-list");
  const saveButton = el<HTMLButtonElement>("save-button");
  const statusLine = el<HTMLSpanElement>("status-line");
  const banner = el<HTMLDivElement>("banner");

  function renderList(): void {
    slapList.replaceChildren(
      ...state.slaps.map((s) => {
        const item = document.createElement("li");
        item.textContent = `${s.slap_id} (${s.hand}, ${s.age_group}) r${s.revision}`;
        item.className = s.slap_id === state.currentId ? "active" : "";
        item.onclick = () => navigate(() => state.loadSlap(s.slap_id));
        return item;
      }),
    );
  }

  function renderChrome(): void {
    saveButton.disabled = !state.canSave;
    const dirty = state.dirty ? " (unsaved edits)" : "";
    statusLine.textContent = `${state.currentId ?? "no slap"} rev ${state.revision} — ${state.status}${dirty}`;
    banner.replaceChildren();
    banner.className = "";
    if (state.status === "conflict") {
      banner.className = "conflict";
      banner.append(
        `Server has revision ${state.conflictRevision}; your edits are still local. `,
        button("Reload and keep my edits", async () => {
          await state.resolveConflict(true);
          await refresh();
        }),
        button("Discard my edits", async () => {
          await state.resolveConflict(false);
          await refresh();
        }),
      );
    } else if (state.status === "error") {
      banner.className = "error";
      banner.append(state.errorMessage + " ", button("Retry save", () => save()));
    }
    renderList();
  }

  function button(label: string, onClick: () => void): HTMLButtonElement {
    const b = document.createElement("button");
    b.textContent = label;
    b.onclick = onClick;
    return b;
  }

  async function refresh(): Promise<void> {
    await view.showCurrent();
    renderChrome();
  }

  async function navigate(go: () => Promise<unknown>): Promise<void> {
    if (state.dirty && !window.confirm("Discard unsaved edits?")) {
      return;
    }
    await go();
    await refresh();
  }

  async function save(): Promise<void> {
    await state.save();
    renderChrome();
  }

  saveButton.onclick = () => save();

  window.addEventListener("keydown", (e) => {
    if (e.target instanceof HTMLInputElement) return;
    switch (e.key) {
      case "ArrowRight":
      case "n":
        void navigate(() => state.nextSlap());
        break;
      case "ArrowLeft":
      case "p":
        void navigate(() => state.prevSlap());
        break;
      case "l":
        state.cycleLabel(1);
        renderChrome();
        view.draw();
        break;
      case "L":
        state.cycleLabel(-1);
        renderChrome();
        view.draw();
        break;
      case "[":
        state.rotateSelected(e.shiftKey ? -0.05 : -0.5, e.shiftKey);
        renderChrome();
        view.draw();
        break;
      case "]":
        state.rotateSelected(e.shiftKey ? 0.05 : 0.5, e.shiftKey);
        renderChrome();
        view.draw();
        break;
      case "a":
        state.addBox({ x: canvas.width / 2, y: canvas.height / 2 });
        renderChrome();
        view.draw();
        break;
      case "Delete":
      case "Backspace":
        state.removeSelected();
        renderChrome();
        view.draw();
        break;
      case "s":
        if (e.ctrlKey || e.metaKey) {
          e.preventDefault();
        }
        void save();
        break;
    }
  });

  await state.init();
  await refresh();
}

void start();
