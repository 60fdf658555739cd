/**
 * DOM wiring for the workbench. All numerical work happens in the service;
 * this file only moves bytes onto canvases and state into the URL fragment.
 */
import { ApiClient, type JobStatus, type SessionInfo } from "./api.js";
import { PolygonDraft, PolygonStore, CLASS_NAMES } from "./polygons.js";
import { ThresholdSliders } from "./sliders.js";
import { ThresholdLoop } from "./threshold-loop.js";
import { SyncedPanZoom } from "./viewer.js";
import { DEFAULT_STATE, decodeState, encodeState, parseSource, type UiState } from "./viewstate.js";

const api = new ApiClient("");
const state: UiState = { ...DEFAULT_STATE, ...decodeState(location.hash) };

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

let session: SessionInfo | null = null;
const store = new PolygonStore();
let draft: PolygonDraft | null = null;
const sliders = new ThresholdSliders();
const panZoom = new SyncedPanZoom();
const results: string[] = [];

function syncFragment(): void {
  state.sliders = sliders.value;
  history.replaceState(null, "", "#" + encodeState(state));
}

async function drawBytes(canvas: HTMLCanvasElement, bytes: ArrayBuffer): Promise<void> {
  const blob = new Blob([bytes], { type: "image/png" });
  const bitmap = await createImageBitmap(blob);
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(bitmap, 0, 0);
  bitmap.close();
}

async function fetchSource(ref: string): Promise<ArrayBuffer> {
  const parsed = parseSource(ref);
  return typeof parsed === "number" ? api.bandPreview(parsed) : api.resultPng(parsed);
}

// --- session -------------------------------------------------------------

async function openSession(): Promise<void> {
  const manifest = ($("manifest-path") as HTMLInputElement).value.trim();
  if (!manifest) return;
  session = await api.openSession(manifest);
  state.sessionId = session.session_id;
  $("session-info").textContent =
    `${session.width}x${session.height}, ${session.bands.length} bands`;
  const list = $("band-list");
  list.innerHTML = "";
  session.bands.forEach((band, index) => {
    const button = document.createElement("button");
    button.textContent = band.filter_code ? `${band.band_id} (${band.filter_code})` : band.band_id;
    button.addEventListener("click", () => void selectSource(`band:${index}`));
    list.appendChild(button);
    for (const side of ["left", "right"] as const) {
      const option = document.createElement("option");
      option.value = `band:${index}`;
      option.textContent = button.textContent ?? `band:${index}`;
      ($(`${side}-source`) as HTMLSelectElement).appendChild(option);
    }
  });
  if (state.active) await selectSource(state.active);
  else if (session.bands.length) await selectSource("band:0");
  syncFragment();
}

async function selectSource(ref: string): Promise<void> {
  state.active = ref;
  $("active-source").textContent = ref;
  await drawBytes($("view-canvas") as HTMLCanvasElement, await fetchSource(ref));
  thresholdLoop.update(parseSource(ref), sliders.value);
  syncFragment();
}

// --- labeling ------------------------------------------------------------

function classId(): number {
  return Number(($("label-class") as HTMLSelectElement).value);
}

function redrawOverlay(): void {
  const canvas = $("overlay-canvas") as HTMLCanvasElement;
  const view = $("view-canvas") as HTMLCanvasElement;
  canvas.width = view.width;
  canvas.height = view.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const palette: Record<number, string> = { 1: "#dc2828", 2: "#2858dc", 3: "#c8b464" };
  const paint = (points: [number, number][], cls: number, open: boolean) => {
    if (!points.length) return;
    ctx.strokeStyle = palette[cls] ?? "#ffffff";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    const first = points[0];
    if (!first) return;
    ctx.moveTo(first[0], first[1]);
    for (const [x, y] of points.slice(1)) ctx.lineTo(x, y);
    if (!open) ctx.closePath();
    ctx.stroke();
  };
  for (const poly of store.all) paint(poly.points, poly.class, false);
  if (draft) paint(draft.points, draft.classId, true);
}

function updateLabelControls(): void {
  ($("finish-polygon") as HTMLButtonElement).disabled = !draft?.canSubmit;
  ($("submit-labels") as HTMLButtonElement).disabled = store.count === 0 && !draft;
  $("polygon-status").textContent = draft
    ? `drawing ${CLASS_NAMES[draft.classId]} (${draft.points.length} pts)`
    : `${store.count} polygons staged`;
}

function canvasPoint(event: MouseEvent): [number, number] {
  const canvas = $("overlay-canvas") as HTMLCanvasElement;
  const rect = canvas.getBoundingClientRect();
  const x = ((event.clientX - rect.left) / rect.width) * canvas.width;
  const y = ((event.clientY - rect.top) / rect.height) * canvas.height;
  return [Math.round(x * 10) / 10, Math.round(y * 10) / 10];
}

async function submitLabels(): Promise<void> {
  if (draft?.canSubmit) {
    store.add(draft.finish());
    draft = null;
  }
  const response = await api.putLabels(store.toDocument());
  $("label-counts").textContent = Object.entries(response.counts)
    .map(([cls, count]) => `${CLASS_NAMES[Number(cls)] ?? cls}: ${count}`)
    .join(", ");
  updateLabelControls();
  redrawOverlay();
}

// --- enhancement jobs ----------------------------------------------------

async function pollJob(jobId: string): Promise<JobStatus> {
  for (;;) {
    const status = await api.jobStatus(jobId);
    if (status.status === "done" || status.status === "failed") return status;
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
}

async function launchMethod(): Promise<void> {
  const method = ($("method-select") as HTMLSelectElement).value;
  const badge = $("job-status");
  badge.textContent = `${method}: queued`;
  try {
    const { job_id } = await api.enhance({ method, q: 3, seed: 7 });
    badge.textContent = `${method}: running`;
    const status = await pollJob(job_id);
    if (status.status === "failed") {
      badge.textContent = `${method}: failed (${status.error ?? "unknown"})`;
      return;
    }
    const resultId = status.result_id!;
    results.push(resultId);
    badge.textContent = `${method}: done (${resultId})`;
    const option = document.createElement("option");
    option.value = `result:${resultId}`;
    option.textContent = `${method} ${resultId}`;
    ($("left-source") as HTMLSelectElement).appendChild(option.cloneNode(true));
    ($("right-source") as HTMLSelectElement).appendChild(option);
    await selectSource(`result:${resultId}`);
  } catch (error) {
    badge.textContent = `${method}: ${String(error)}`;
  }
}

// --- threshold steering ----------------------------------------------------

const thresholdLoop = new ThresholdLoop(api, {
  debounceMs: 100,
  onPreview: (bytes) => {
    void drawBytes($("threshold-canvas") as HTMLCanvasElement, bytes);
  },
  onError: (error) => {
    $("threshold-status").textContent = String(error);
  },
});

function wireSlider(id: string, apply: (value: number) => void): void {
  const input = $(id) as HTMLInputElement;
  input.addEventListener("input", () => apply(Number(input.value)));
}

sliders.onChange((value) => {
  ($("t1-slider") as HTMLInputElement).value = String(value.t1);
  ($("t2-slider") as HTMLInputElement).value = String(value.t2);
  ($("alpha-slider") as HTMLInputElement).value = String(value.alpha);
  $("threshold-status").textContent =
    `t1=${value.t1.toFixed(3)} t2=${value.t2.toFixed(3)} alpha=${value.alpha.toFixed(2)}`;
  if (state.active) thresholdLoop.update(parseSource(state.active), value);
  syncFragment();
});

async function suggestThresholds(): Promise<void> {
  if (!state.active) return;
  const params = await api.suggestThresholds(parseSource(state.active));
  sliders.fill({ t1: params.t1, t2: params.t2, alpha: params.alpha });
  thresholdLoop.flush();
}

// --- comparison ------------------------------------------------------------

async function renderPane(side: "left" | "right"): Promise<void> {
  const select = $(`${side}-source`) as HTMLSelectElement;
  const ref = select.value;
  if (!ref) return;
  state[side] = ref;
  await drawBytes($(`${side}-canvas`) as HTMLCanvasElement, await fetchSource(ref));
  const badge = $(`${side}-score`);
  badge.textContent = "";
  const parsed = parseSource(ref);
  if (typeof parsed === "string") {
    try {
      const report = await api.score(parsed);
      badge.textContent = `fisher ${report.best.toFixed(3)} (ch ${report.best_channel})`;
    } catch {
      badge.textContent = "score unavailable";
    }
  }
  syncFragment();
}

panZoom.onChange((t) => {
  for (const side of ["left", "right"] as const) {
    const canvas = $(`${side}-canvas`) as HTMLCanvasElement;
    canvas.style.transform = `translate(${t.offsetX}px, ${t.offsetY}px) scale(${t.scale})`;
  }
});

function wireComparePane(side: "left" | "right"): void {
  const canvas = $(`${side}-canvas`) as HTMLCanvasElement;
  let dragging = false;
  let last: [number, number] = [0, 0];
  canvas.addEventListener("mousedown", (event) => {
    dragging = true;
    last = [event.clientX, event.clientY];
  });
  window.addEventListener("mouseup", () => (dragging = false));
  window.addEventListener("mousemove", (event) => {
    if (!dragging) return;
    panZoom.pan(event.clientX - last[0], event.clientY - last[1]);
    last = [event.clientX, event.clientY];
  });
  canvas.addEventListener("wheel", (event) => {
    event.preventDefault();
    panZoom.zoom(event.deltaY < 0 ? 1.15 : 1 / 1.15, event.offsetX, event.offsetY);
  });
}

// --- boot ------------------------------------------------------------------

export function boot(): void {
  $("open-session").addEventListener("click", () => void openSession());
  $("overlay-canvas").addEventListener("click", (event) => {
    if (!draft) draft = new PolygonDraft(classId());
    const [x, y] = canvasPoint(event as MouseEvent);
    draft.addVertex(x, y);
    updateLabelControls();
    redrawOverlay();
  });
  $("finish-polygon").addEventListener("click", () => {
    if (draft?.canSubmit) {
      store.add(draft.finish());
      draft = null;
      updateLabelControls();
      redrawOverlay();
    }
  });
  $("clear-labels").addEventListener("click", () => {
    store.clear();
    draft = null;
    updateLabelControls();
    redrawOverlay();
  });
  $("submit-labels").addEventListener("click", () => void submitLabels());
  $("launch-method").addEventListener("click", () => void launchMethod());
  $("suggest-thresholds").addEventListener("click", () => void suggestThresholds());
  wireSlider("t1-slider", (v) => sliders.setT1(v));
  wireSlider("t2-slider", (v) => sliders.setT2(v));
  wireSlider("alpha-slider", (v) => sliders.setAlpha(v));
  $("left-source").addEventListener("change", () => void renderPane("left"));
  $("right-source").addEventListener("change", () => void renderPane("right"));
  $("reset-view").addEventListener("click", () => panZoom.reset());
  wireComparePane("left");
  wireComparePane("right");
  sliders.fill(state.sliders);
  updateLabelControls();
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  boot();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
