import { ExtremalRequired, PreviewScheduler, requestRetarget, uploadImage } from "./api.js";
import { AnnotationState, RATIO_MAX, RATIO_MIN } from "./state.js";
import type { Point, PreviewResponse } from "./types.js";
import { pointerToSource, sourceToDisplay, type ViewTransform } from "./view.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const state = new AnnotationState();
const view: ViewTransform = { zoom: 1, panX: 0, panY: 0 };

const editorCanvas = el<HTMLCanvasElement>("editor");
const overlayCanvas = el<HTMLCanvasElement>("mesh-overlay");
const previewImg = el<HTMLImageElement>("preview");
const statusBar = el<HTMLDivElement>("status");
const metricsPanel = el<HTMLDivElement>("metrics");
const suggestionPanel = el<HTMLDivElement>("suggestion");
const ratioSlider = el<HTMLInputElement>("ratio");
const ratioValue = el<HTMLSpanElement>("ratio-value");
const zoomValue = el<HTMLSpanElement>("zoom-value");

let sourceBitmap: ImageBitmap | null = null;
let extremalBeta: number | null = null;
let flashDraft = false;

function setStatus(text: string, isError = false): void {
  statusBar.textContent = text;
  statusBar.className = isError ? "error" : "";
}

function renderEditor(): void {
  const ctx = editorCanvas.getContext("2d")!;
  ctx.setTransform(1, 0, 0, 1, 0, 0);
  ctx.clearRect(0, 0, editorCanvas.width, editorCanvas.height);
  if (!sourceBitmap) return;
  ctx.setTransform(view.zoom, 0, 0, view.zoom, view.panX, view.panY);
  ctx.drawImage(sourceBitmap, 0, 0);
  ctx.setTransform(1, 0, 0, 1, 0, 0);

  const drawPath = (points: Point[], close: boolean) => {
    ctx.beginPath();
    points.forEach((p, i) => {
      const [x, y] = sourceToDisplay(view, p);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    if (close) ctx.closePath();
    ctx.stroke();
  };

  for (const shape of state.shapes) {
    ctx.strokeStyle = shape.kind === "polygon" ? "#2e7d32" : "#1565c0";
    ctx.lineWidth = 2;
    drawPath(shape.points, shape.kind === "polygon");
  }
  if (state.draft.length) {
    ctx.strokeStyle = flashDraft ? "#d32f2f" : "#f9a825";
    ctx.lineWidth = 1.5;
    ctx.setLineDash([5, 4]);
    drawPath(state.draft, false);
    ctx.setLineDash([]);
    for (const p of state.draft) {
      const [x, y] = sourceToDisplay(view, p);
      ctx.fillStyle = "#f9a825";
      ctx.fillRect(x - 2.5, y - 2.5, 5, 5);
    }
  }
}

function renderPreview(preview: PreviewResponse): void {
  previewImg.src = `data:image/png;base64,${preview.png}`;
  previewImg.width = preview.width;
  previewImg.height = preview.height;
  const m = preview.metrics;
  const badge = m.min_jacobian > 0 ? "badge-ok" : "badge-bad";
  metricsPanel.innerHTML =
    `<span class="${badge}">min J ${m.min_jacobian.toExponential(2)}</span>` +
    ` <span>solve ${m.solve_ms.toFixed(0)} ms</span>` +
    ` <span>max |mu| ${m.max_abs_mu.toFixed(3)}</span>` +
    (m.object_scale !== null ? ` <span>object scale ${m.object_scale.toFixed(3)}</span>` : "") +
    (m.extremal ? ` <span class="badge-warn">extremal</span>` : "");
  overlayCanvas.width = preview.width;
  overlayCanvas.height = preview.height;
  const ctx = overlayCanvas.getContext("2d")!;
  ctx.clearRect(0, 0, overlayCanvas.width, overlayCanvas.height);
  if (preview.mesh && state.showMesh) {
    const sx = preview.width / preview.full_size[0];
    const sy = preview.height / preview.full_size[1];
    ctx.strokeStyle = "rgba(255, 64, 129, 0.55)";
    ctx.lineWidth = 0.6;
    const pts = preview.mesh.vertices_warped;
    ctx.beginPath();
    for (const [i, j, k] of preview.mesh.faces) {
      ctx.moveTo(pts[i][0] * sx, pts[i][1] * sy);
      ctx.lineTo(pts[j][0] * sx, pts[j][1] * sy);
      ctx.lineTo(pts[k][0] * sx, pts[k][1] * sy);
      ctx.closePath();
    }
    ctx.stroke();
  }
}

const scheduler = new PreviewScheduler(async (signal) => {
  if (state.imageId === null) return;
  suggestionPanel.textContent = "";
  try {
    const request = state.toRequest();
    if (extremalBeta !== null) {
      request.extremal = "on";
      request.beta = extremalBeta;
    }
    const preview = await requestRetarget(request, signal);
    state.lastPreview = preview;
    renderPreview(preview);
    setStatus("preview updated");
  } catch (err) {
    if (err instanceof DOMException && err.name === "AbortError") return;
    if (err instanceof ExtremalRequired) {
      const beta = err.suggestion.suggested_beta;
      suggestionPanel.innerHTML =
        `target too narrow for the objects. ` +
        (beta !== undefined
          ? `<button id="apply-beta">retry in extremal mode (beta ${beta})</button>`
          : "");
      const button = document.getElementById("apply-beta");
      if (button && beta !== undefined) {
        button.addEventListener("click", () => {
          extremalBeta = beta;
          void scheduler.fireNow();
        });
      }
      setStatus(err.message, true);
      return;
    }
    setStatus(err instanceof Error ? err.message : String(err), true);
  }
});

function wireToolbar(): void {
  el<HTMLInputElement>("file").addEventListener("change", async (event) => {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    try {
      const info = await uploadImage(file);
      state.setImage(info.id, info.width, info.height);
      sourceBitmap = await createImageBitmap(file);
      editorCanvas.width = Math.min(900, info.width);
      editorCanvas.height = Math.round(editorCanvas.width * (info.height / info.width));
      view.zoom = editorCanvas.width / info.width;
      view.panX = 0;
      view.panY = 0;
      zoomValue.textContent = view.zoom.toFixed(2);
      extremalBeta = null;
      renderEditor();
      setStatus(`loaded ${info.width}x${info.height}`);
      void scheduler.fireNow();
    } catch (err) {
      setStatus(err instanceof Error ? err.message : String(err), true);
    }
  });

  for (const tool of ["object", "line"] as const) {
    el<HTMLButtonElement>(`tool-${tool}`).addEventListener("click", () => {
      state.tool = tool;
      state.cancelDraft();
      el<HTMLButtonElement>("tool-object").classList.toggle("active", tool === "object");
      el<HTMLButtonElement>("tool-line").classList.toggle("active", tool === "line");
      renderEditor();
    });
  }

  el<HTMLButtonElement>("finish").addEventListener("click", finishShape);
  el<HTMLButtonElement>("undo").addEventListener("click", () => {
    state.undoLast();
    renderEditor();
    void scheduler.fireNow();
  });

  el<HTMLButtonElement>("zoom-in").addEventListener("click", () => changeZoom(2));
  el<HTMLButtonElement>("zoom-out").addEventListener("click", () => changeZoom(0.5));

  ratioSlider.min = String(RATIO_MIN);
  ratioSlider.max = String(RATIO_MAX);
  ratioSlider.step = "0.01";
  ratioSlider.value = String(state.ratio);
  ratioValue.textContent = state.ratio.toFixed(2);
  ratioSlider.addEventListener("input", () => {
    state.setRatio(Number(ratioSlider.value));
    ratioValue.textContent = state.ratio.toFixed(2);
    extremalBeta = null;
    scheduler.schedule(); // debounced: each preview is a full solve
  });

  el<HTMLSelectElement>("choice").addEventListener("change", (event) => {
    state.choice = (event.target as HTMLSelectElement).value as typeof state.choice;
    void scheduler.fireNow();
  });
  el<HTMLInputElement>("chessboard").addEventListener("change", (event) => {
    state.chessboard = (event.target as HTMLInputElement).checked;
    void scheduler.fireNow();
  });
  el<HTMLInputElement>("show-mesh").addEventListener("change", (event) => {
    state.showMesh = (event.target as HTMLInputElement).checked;
    void scheduler.fireNow();
  });

  el<HTMLButtonElement>("export").addEventListener("click", () => {
    const blob = new Blob([state.exportLabelSet()], { type: "application/json" });
    const anchor = document.createElement("a");
    anchor.href = URL.createObjectURL(blob);
    anchor.download = "labels.json";
    anchor.click();
    URL.revokeObjectURL(anchor.href);
  });
  el<HTMLInputElement>("import").addEventListener("change", async (event) => {
    const file = (event.target as HTMLInputElement).files?.[0];
    if (!file) return;
    try {
      const result = state.loadLabelSet(JSON.parse(await file.text()));
      if (!result.ok) {
        setStatus(result.error ?? "import failed", true);
        return;
      }
      renderEditor();
      void scheduler.fireNow();
    } catch {
      setStatus("import failed: not a valid label document", true);
    }
  });
}

function changeZoom(factor: number): void {
  view.zoom *= factor;
  zoomValue.textContent = view.zoom.toFixed(2);
  renderEditor();
}

function finishShape(): void {
  const result = state.commitDraft();
  if (!result.ok) {
    // visual cue: flash the draft red, keep it editable
    flashDraft = true;
    renderEditor();
    setTimeout(() => {
      flashDraft = false;
      renderEditor();
    }, 450);
    setStatus(result.error ?? "cannot close shape", true);
    return;
  }
  renderEditor();
  void scheduler.fireNow();
}

function wireCanvas(): void {
  editorCanvas.addEventListener("pointerdown", (event) => {
    const rect = editorCanvas.getBoundingClientRect();
    const point = pointerToSource(view, rect, event.clientX, event.clientY);
    const result = state.addDraftPoint(point);
    if (!result.ok) {
      setStatus(result.error ?? "", true);
      return;
    }
    renderEditor();
  });
  editorCanvas.addEventListener("dblclick", (event) => {
    event.preventDefault();
    finishShape();
  });
}

wireToolbar();
wireCanvas();
setStatus("load an image to start");
