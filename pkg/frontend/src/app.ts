// Studio single-page app. Talks exclusively to the /v1 API on loopback;
// all authoritative state lives server-side and the view is rebuilt from
// GET endpoints (poll + reload both converge to the same timeline).

import { ApiClient, ApiFailure } from "./api";
import { SingleFlight } from "./generation";
import { maskIsEmpty, maskToOverlay, rasterizeStrokes } from "./mask";
import { buildSessionView, SessionView } from "./timeline";
import type { IterationRecord, Phase, Session, StrokeJson } from "./types";
import { PHASE_ORDER } from "./types";

const EXAMPLE_PROMPTS = [
  "A head of woman in pot, realistic facial features, ranunculus on her head, representing personal growth and renewal, messy background, detailed, high quality.",
  "A woman with a long, flowing blonde hairstyle, adding waves and volume.",
  "An abstract painting showing a spiral. It symbolises insecurity and fears. Blue and black colors. There's a red thunderstorm shaped line from top to the center of the spiral.",
  "A painting of light spreading spherically from the center, warm colors, representing calmness, clarity and hope, matching the artistic style.",
  "A small figure made of aluminum foil and wire depicting a man on his knees with his arms up in the air. The man seems helplessness.",
  "A small figure made of aluminum foil depicting a man in an upright position with his arms up in the air.",
];

const PHASE_LABELS: Record<Phase, string> = {
  InitialConversation: "i. initial conversation",
  ArtisticWork: "ii. artistic work",
  Adaptation: "iii. adaptation",
  Retrospective: "iv. retrospective",
};

type Mode = "draw-draft" | "paint-mask" | "view";

interface AppState {
  session: Session | null;
  view: SessionView | null;
  mode: Mode;
  displayedArtifact: string | null; // mask brushing only allowed with a target shown
  strokes: StrokeJson[]; // in-progress StrokeSet, image coordinates
  brushRadius: number;
  latestEdgeId: string | null;
}

const state: AppState = {
  session: null,
  view: null,
  mode: "view",
  displayedArtifact: null,
  strokes: [],
  brushRadius: 12,
  latestEdgeId: null,
};

const api = new ApiClient("");
const generateFlight = new SingleFlight<IterationRecord>();

const $ = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

function showError(err: unknown): void {
  const banner = $("error-banner");
  if (err instanceof ApiFailure) {
    banner.textContent = `${err.body.code}: ${err.body.message}`;
  } else {
    banner.textContent = String(err);
  }
  banner.style.display = "block";
  setTimeout(() => (banner.style.display = "none"), 6000);
}

async function guarded<T>(work: () => Promise<T>): Promise<T | null> {
  try {
    return await work();
  } catch (err) {
    showError(err);
    return null;
  }
}

// --- canvas ---

function canvasEl(): HTMLCanvasElement {
  return $("stage") as unknown as HTMLCanvasElement;
}

function ctx(): CanvasRenderingContext2D {
  return canvasEl().getContext("2d")!;
}

function clearStage(): void {
  const c = canvasEl();
  ctx().fillStyle = "white";
  ctx().fillRect(0, 0, c.width, c.height);
}

async function showArtifact(artifactId: string): Promise<void> {
  const img = new Image();
  img.src = api.artifactUrl(artifactId);
  await img.decode();
  const c = canvasEl();
  c.width = img.naturalWidth;
  c.height = img.naturalHeight;
  ctx().drawImage(img, 0, 0);
  state.displayedArtifact = artifactId;
  redrawMaskPreview();
}

function redrawMaskPreview(): void {
  if (state.mode !== "paint-mask" || state.displayedArtifact === null) return;
  const c = canvasEl();
  // preview mirrors the server's rasterization exactly (same StrokeSet math)
  const mask = previewMask(c.width, c.height);
  if (mask === null) return;
  const overlay = new ImageData(maskToOverlay(mask), c.width, c.height);
  const scratch = document.createElement("canvas");
  scratch.width = c.width;
  scratch.height = c.height;
  scratch.getContext("2d")!.putImageData(overlay, 0, 0);
  ctx().drawImage(scratch, 0, 0);
}

function previewMask(width: number, height: number): Uint8Array | null {
  if (state.strokes.length === 0) return null;
  try {
    return rasterizeStrokes(state.strokes, width, height);
  } catch {
    return null;
  }
}

// pointer position in image coordinates, independent of zoom/pan transform
function imageCoords(event: PointerEvent): [number, number] {
  const c = canvasEl();
  const rect = c.getBoundingClientRect();
  const x = ((event.clientX - rect.left) / rect.width) * c.width;
  const y = ((event.clientY - rect.top) / rect.height) * c.height;
  return [Math.min(Math.max(x, 0), c.width - 0.001), Math.min(Math.max(y, 0), c.height - 0.001)];
}

function wireCanvas(): void {
  const c = canvasEl();
  let drawing = false;
  let current: StrokeJson | null = null;

  c.addEventListener("pointerdown", (event) => {
    if (state.mode === "view") return;
    if (state.mode === "paint-mask" && state.displayedArtifact === null) return;
    drawing = true;
    const erase = (event as PointerEvent).shiftKey;
    current = {
      points: [imageCoords(event as PointerEvent)],
      radius: state.mode === "paint-mask" ? state.brushRadius : 2,
      mode: erase ? "erase" : "add",
    };
  });
  c.addEventListener("pointermove", (event) => {
    if (!drawing || current === null) return;
    current.points.push(imageCoords(event as PointerEvent));
    if (state.mode === "draw-draft") {
      drawFreehandSegment(current);
    } else {
      refreshStageFromArtifact();
    }
  });
  const finish = () => {
    if (!drawing || current === null) return;
    drawing = false;
    state.strokes.push(current);
    current = null;
    if (state.mode === "paint-mask") refreshStageFromArtifact();
  };
  c.addEventListener("pointerup", finish);
  c.addEventListener("pointerleave", finish);

  function drawFreehandSegment(stroke: StrokeJson): void {
    const pts = stroke.points;
    if (pts.length < 2) return;
    const g = ctx();
    g.strokeStyle = "black";
    g.lineWidth = stroke.radius * 2;
    g.lineCap = "round";
    g.beginPath();
    g.moveTo(pts[pts.length - 2][0], pts[pts.length - 2][1]);
    g.lineTo(pts[pts.length - 1][0], pts[pts.length - 1][1]);
    g.stroke();
  }
}

async function refreshStageFromArtifact(): Promise<void> {
  if (state.displayedArtifact !== null) {
    await showArtifact(state.displayedArtifact);
  }
}

// --- workflows ---

async function newSession(): Promise<void> {
  const alias = ($("alias-input") as HTMLInputElement).value.trim();
  const session = await guarded(() => api.createSession(alias));
  if (session === null) return;
  state.session = session;
  state.strokes = [];
  state.latestEdgeId = null;
  await refreshView();
  startPolling();
}

async function refreshView(): Promise<void> {
  if (state.session === null) return;
  const session = await guarded(() => api.getSession(state.session!.session_id));
  if (session === null) return;
  state.session = session;
  state.view = buildSessionView(session);
  renderView();
}

function renderView(): void {
  const view = state.view;
  if (view === null) return;
  $("phase-indicator").textContent = PHASE_LABELS[view.phase];
  const stepBtn = $("phase-step") as HTMLButtonElement;
  stepBtn.disabled = view.terminal; // iv is terminal
  stepBtn.textContent = view.terminal
    ? "session complete"
    : `advance to ${PHASE_LABELS[PHASE_ORDER[view.phaseIndex + 1]]}`;

  const timeline = $("timeline");
  timeline.innerHTML = "";
  view.timeline.forEach((entry, index) => {
    const item = document.createElement("figure");
    item.className = "timeline-item";
    const thumb = document.createElement("img");
    thumb.src = api.artifactUrl(entry.outputArtifact);
    thumb.width = 96;
    thumb.title = entry.promptText;
    thumb.addEventListener("click", () => {
      void showArtifact(entry.outputArtifact);
      renderCompare(index);
    });
    const caption = document.createElement("figcaption");
    caption.textContent = `${index + 1}. ${entry.kind}`;
    item.append(thumb, caption);
    timeline.append(item);
  });

  if (view.phase === "Retrospective") renderRetrospective();
  ($("generate-btn") as HTMLButtonElement).disabled =
    view.phase !== "ArtisticWork" || generateFlight.busy;
  ($("inpaint-btn") as HTMLButtonElement).disabled =
    view.phase !== "Adaptation" || generateFlight.busy;
}

function renderCompare(index: number): void {
  const view = state.view;
  if (view === null) return;
  const entry = view.timeline[index];
  const before = $("compare-before") as HTMLImageElement;
  const after = $("compare-after") as HTMLImageElement;
  before.src = entry.inputArtifacts.length ? api.artifactUrl(entry.inputArtifacts[0]) : "";
  after.src = api.artifactUrl(entry.outputArtifact);
  const slider = $("compare-slider") as HTMLInputElement;
  const apply = () => {
    after.style.clipPath = `inset(0 ${100 - Number(slider.value)}% 0 0)`;
  };
  slider.oninput = apply;
  apply();
}

function renderRetrospective(): void {
  const view = state.view;
  const session = state.session;
  if (view === null || session === null) return;
  const panel = $("retrospective");
  panel.innerHTML = "";
  const draft = session.artifacts.find((a) => a.role === "Draft");
  const final = [...view.timeline].reverse().find((t) => t.kind === "Refinement");
  const adapted = [...view.timeline].reverse().find((t) => t.kind === "Adaptation");
  for (const [label, id] of [
    ["draft", draft?.artifact_id],
    ["final artwork", final?.outputArtifact],
    ["adaptation", adapted?.outputArtifact],
  ] as [string, string | undefined][]) {
    if (!id) continue;
    const fig = document.createElement("figure");
    const img = document.createElement("img");
    img.src = api.artifactUrl(id);
    img.width = 180;
    const cap = document.createElement("figcaption");
    cap.textContent = label;
    fig.append(img, cap);
    panel.append(fig);
  }
  panel.style.display = "flex";
}

async function uploadDraftFromCanvas(): Promise<void> {
  if (state.session === null) return;
  const blob = await new Promise<Blob>((resolve) =>
    canvasEl().toBlob((b) => resolve(b!), "image/png"),
  );
  const ref = await guarded(() => api.uploadDraft(state.session!.session_id, blob));
  if (ref === null) return;
  state.strokes = [];
  await showArtifact(ref.artifact_id);
  await deriveEdges(ref.artifact_id);
  await refreshView();
}

async function uploadDraftFromFile(file: File): Promise<void> {
  if (state.session === null) return;
  const ref = await guarded(() => api.uploadDraft(state.session!.session_id, file));
  if (ref === null) return;
  await showArtifact(ref.artifact_id);
  await deriveEdges(ref.artifact_id);
  await refreshView();
}

async function deriveEdges(draftId: string): Promise<void> {
  const ref = await guarded(() => api.makeEdges(state.session!.session_id, draftId));
  if (ref !== null) state.latestEdgeId = ref.artifact_id;
}

function readParams(): Record<string, unknown> | undefined {
  // params live behind the "advanced" drawer; patients normally never see them
  const drawer = $("advanced-drawer") as HTMLDetailsElement;
  if (!drawer.open) return undefined;
  const seed = Number(($("seed-input") as HTMLInputElement).value);
  const steps = Number(($("steps-input") as HTMLInputElement).value);
  return { seed, steps };
}

async function triggerGenerate(): Promise<void> {
  if (state.session === null || state.latestEdgeId === null) {
    showError(new Error("upload or draw a draft first"));
    return;
  }
  const text = ($("prompt-input") as HTMLTextAreaElement).value;
  ($("generate-btn") as HTMLButtonElement).disabled = true;
  const record = await guarded(() =>
    generateFlight.run(() =>
      api.generate(state.session!.session_id, state.latestEdgeId!, text, readParams()),
    ),
  );
  await refreshView();
  if (record !== null) await showArtifact(record.output_artifact);
}

async function triggerInpaint(): Promise<void> {
  if (state.session === null || state.displayedArtifact === null) return;
  const width = canvasEl().width;
  const height = canvasEl().height;
  const preview = previewMask(width, height);
  if (preview === null || maskIsEmpty(preview)) {
    showError(new Error("brush a mask over the artwork first"));
    return;
  }
  const text = ($("prompt-input") as HTMLTextAreaElement).value;
  const targetId = state.displayedArtifact;
  ($("inpaint-btn") as HTMLButtonElement).disabled = true;
  const record = await guarded(() =>
    generateFlight.run(async () => {
      const maskRef = await api.submitMask(state.session!.session_id, targetId, state.strokes);
      return api.inpaint(state.session!.session_id, targetId, maskRef.artifact_id, text, readParams());
    }),
  );
  state.strokes = [];
  await refreshView();
  if (record !== null) await showArtifact(record.output_artifact);
}

async function stepPhase(): Promise<void> {
  const view = state.view;
  if (view === null || state.session === null || view.terminal) return;
  const next = PHASE_ORDER[view.phaseIndex + 1];
  // forward moves are irreversible; make that explicit
  if (!window.confirm(`Move to "${PHASE_LABELS[next]}"? This cannot be undone.`)) return;
  await guarded(() => api.advancePhase(state.session!.session_id, next));
  await refreshView();
}

function undoStroke(): void {
  state.strokes.pop();
  void refreshStageFromArtifact();
}

// --- polling ---

let pollTimer: number | null = null;

function startPolling(): void {
  if (pollTimer !== null) window.clearInterval(pollTimer);
  pollTimer = window.setInterval(() => void refreshView(), 3000);
}

// --- bootstrapping ---

export function initApp(): void {
  wireCanvas();
  clearStage();

  $("new-session-btn").addEventListener("click", () => void newSession());
  $("phase-step").addEventListener("click", () => void stepPhase());
  $("generate-btn").addEventListener("click", () => void triggerGenerate());
  $("inpaint-btn").addEventListener("click", () => void triggerInpaint());
  $("undo-btn").addEventListener("click", undoStroke);
  $("draft-from-canvas-btn").addEventListener("click", () => void uploadDraftFromCanvas());
  ($("draft-file-input") as HTMLInputElement).addEventListener("change", (event) => {
    const file = (event.target as HTMLInputElement).files?.[0];
    if (file) void uploadDraftFromFile(file);
  });

  ($("brush-input") as HTMLInputElement).addEventListener("input", (event) => {
    state.brushRadius = Number((event.target as HTMLInputElement).value);
  });

  for (const [id, mode] of [
    ["mode-draw", "draw-draft"],
    ["mode-mask", "paint-mask"],
    ["mode-view", "view"],
  ] as [string, Mode][]) {
    $(id).addEventListener("click", () => {
      if (mode === "paint-mask" && state.displayedArtifact === null) {
        showError(new Error("show an artwork before masking"));
        return;
      }
      state.mode = mode;
      state.strokes = [];
      if (mode === "draw-draft") {
        state.displayedArtifact = null;
        clearStage();
      }
    });
  }

  const picker = $("prompt-examples") as HTMLSelectElement;
  for (const prompt of EXAMPLE_PROMPTS) {
    const option = document.createElement("option");
    option.value = prompt;
    option.textContent = prompt.slice(0, 60) + "…";
    picker.append(option);
  }
  picker.addEventListener("change", () => {
    ($("prompt-input") as HTMLTextAreaElement).value = picker.value;
  });
}

if (typeof document !== "undefined" && document.getElementById("stage")) {
  initApp();
}
