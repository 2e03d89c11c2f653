/**
 * Interactive shell: load an image, annotate it (oriented source point,
 * scribbles, landmarks, optional z), tune parameters, run segmentation and
 * inspect the contour plus its turning-angle profile.
 *
 * At most one segmentation request is in flight; launching a new run
 * supersedes the old one and stale responses are dropped.
 */

import { ServiceClient } from "./api.js";
import { ChartLayout, drawTurningProfile } from "./chart.js";
import {
  Viewport,
  canvasToImage,
  fitViewport,
  renderOverlay,
} from "./overlay.js";
import {
  AnnotationDoc,
  SegmentParams,
  annotationToJson,
  parseAnnotation,
} from "./schema.js";
import { SessionStore } from "./state.js";

type Tool = "source" | "fg" | "bg" | "landmark" | "z";

const store = new SessionStore();
const client = new ServiceClient("");

let imageBitmap: ImageBitmap | null = null;
let imageBase64: string | null = null;
let viewport: Viewport = { scale: 1, offsetX: 0, offsetY: 0 };
let tool: Tool = "source";
let runCounter = 0;
let draggingArrow = false;
let stroke: { x: number; y: number }[] | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("view");
const chart = el<HTMLCanvasElement>("chart");
const banner = el<HTMLDivElement>("banner");
const badges = el<HTMLDivElement>("badges");

function showBanner(text: string, kind: "error" | "info"): void {
  banner.textContent = text;
  banner.className = `banner ${kind}`;
  banner.style.display = text ? "block" : "none";
}

function paramsFromPanel(): SegmentParams {
  return {
    model: el<HTMLSelectElement>("model").value as SegmentParams["model"],
    convexity: el<HTMLInputElement>("convexity").checked,
    beta: Number(el<HTMLInputElement>("beta").value),
    alpha: Number(el<HTMLInputElement>("alpha").value),
    mu: Number(el<HTMLInputElement>("mu").value),
    ntheta: Number(el<HTMLInputElement>("ntheta").value),
    edge_only: el<HTMLInputElement>("edgeOnly").checked,
    appearance: el<HTMLSelectElement>("appearance")
      .value as SegmentParams["appearance"],
  };
}

function redraw(): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (imageBitmap && store.image) {
    viewport = fitViewport(
      store.image.width,
      store.image.height,
      canvas.width,
      canvas.height,
    );
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(
      imageBitmap,
      viewport.offsetX,
      viewport.offsetY,
      store.image.width * viewport.scale,
      store.image.height * viewport.scale,
    );
    renderOverlay(ctx, viewport, store.draft, store.sourceSet,
                  store.lastResponse, { rayPreview: true });
  }
  const warning = store.compatibilityWarning();
  el<HTMLDivElement>("warning").textContent =
    store.sourceSet && warning ? `warning: ${warning}` : "";
  renderBadges();
  renderChart();
}

function renderBadges(): void {
  badges.innerHTML = "";
  const resp = store.lastResponse;
  if (!resp) return;
  const d = resp.diagnostics;
  const entries: [string, boolean][] = [
    ["simple", d.is_simple],
    ["convex", d.is_convex],
    [`winding 2π (${d.total_curvature.toFixed(3)})`,
     Math.abs(d.total_curvature - 2 * Math.PI) <= 0.05],
    ["encloses z", d.encloses_z],
  ];
  for (const [label, ok] of entries) {
    const span = document.createElement("span");
    span.className = `badge ${ok ? "ok" : "bad"}`;
    span.textContent = label;
    badges.appendChild(span);
  }
}

function renderChart(): void {
  const ctx = chart.getContext("2d");
  if (!ctx) return;
  const layout: ChartLayout = {
    width: chart.width,
    height: chart.height,
    margin: 24,
  };
  drawTurningProfile(ctx, store.lastResponse?.turning_angle_profile ?? [],
                     layout);
}

async function loadImageFile(file: File): Promise<void> {
  const bytes = new Uint8Array(await file.arrayBuffer());
  imageBitmap = await createImageBitmap(new Blob([bytes]));
  let binary = "";
  bytes.forEach((b) => (binary += String.fromCharCode(b)));
  imageBase64 = btoa(binary);
  store.setImage({
    imageId: null,
    width: imageBitmap.width,
    height: imageBitmap.height,
  });
  store.lastResponse = null;
  showBanner("", "info");
  redraw();
}

async function runSegmentation(): Promise<void> {
  if (!store.sourceSet || !imageBase64) {
    showBanner("place the source point first", "error");
    return;
  }
  const token = ++runCounter;
  showBanner("segmenting...", "info");
  try {
    const response = await client.segment({
      image: imageBase64,
      annotation: store.draft,
      params: paramsFromPanel(),
    });
    if (token !== runCounter) return; // a newer run superseded this one
    store.lastResponse = response;
    showBanner("", "info");
  } catch (err) {
    if (token !== runCounter) return;
    const e = err as { code?: string; message?: string };
    showBanner(e.code ? `${e.code}: ${e.message ?? ""}` : String(err),
               "error");
  }
  redraw();
}

function pointerImagePos(ev: MouseEvent): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect();
  return canvasToImage(viewport, {
    x: ev.clientX - rect.left,
    y: ev.clientY - rect.top,
  });
}

function wireCanvas(): void {
  canvas.addEventListener("mousedown", (ev) => {
    if (!store.image) return;
    const p = pointerImagePos(ev);
    if (tool === "source") {
      if (store.sourceSet) {
        const d = Math.hypot(p.x - store.draft.source.x,
                             p.y - store.draft.source.y);
        if (d < 20 / viewport.scale) {
          draggingArrow = true;
          return;
        }
      }
      store.setSource(p, store.draft.source.theta);
    } else if (tool === "fg" || tool === "bg") {
      stroke = [p];
    } else if (tool === "landmark") {
      store.toggleLandmark(p);
    } else if (tool === "z") {
      store.setZ(p);
    }
    redraw();
  });
  canvas.addEventListener("mousemove", (ev) => {
    const p = pointerImagePos(ev);
    if (draggingArrow) {
      const theta = Math.atan2(p.y - store.draft.source.y,
                               p.x - store.draft.source.x);
      store.draft.source.theta = theta;
      redraw();
    } else if (stroke) {
      const last = stroke[stroke.length - 1];
      if (Math.hypot(p.x - last.x, p.y - last.y) > 0.75) {
        stroke.push(p);
        redraw();
      }
    }
  });
  const finish = () => {
    if (stroke && stroke.length > 0) {
      store.addStroke(tool === "bg" ? "bg" : "fg", stroke);
    }
    stroke = null;
    draggingArrow = false;
    redraw();
  };
  canvas.addEventListener("mouseup", finish);
  canvas.addEventListener("mouseleave", finish);
}

function wirePanel(): void {
  for (const t of ["source", "fg", "bg", "landmark", "z"] as Tool[]) {
    el<HTMLButtonElement>(`tool-${t}`).addEventListener("click", () => {
      tool = t;
      document.querySelectorAll(".tool").forEach((b) =>
        b.classList.remove("active"));
      el(`tool-${t}`).classList.add("active");
    });
  }
  el<HTMLInputElement>("file").addEventListener("change", (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (file) void loadImageFile(file);
  });
  el<HTMLButtonElement>("run").addEventListener("click", () => {
    void runSegmentation();
  });
  el<HTMLButtonElement>("undo").addEventListener("click", () => {
    store.undo();
    redraw();
  });
  el<HTMLButtonElement>("redo").addEventListener("click", () => {
    store.redo();
    redraw();
  });
  el<HTMLButtonElement>("export").addEventListener("click", () => {
    const blob = new Blob([annotationToJson(store.draft)],
                          { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "annotation.json";
    a.click();
    URL.revokeObjectURL(a.href);
  });
  el<HTMLInputElement>("import").addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    try {
      const ann: AnnotationDoc = parseAnnotation(await file.text());
      store.draft = ann;
      store.sourceSet = true;
      showBanner("", "info");
    } catch (err) {
      showBanner(String(err), "error");
    }
    redraw();
  });
  document.addEventListener("keydown", (ev) => {
    if ((ev.ctrlKey || ev.metaKey) && ev.key === "z") {
      if (ev.shiftKey) store.redo();
      else store.undo();
      redraw();
      ev.preventDefault();
    }
  });
}

export function start(): void {
  wireCanvas();
  wirePanel();
  redraw();
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  window.addEventListener("DOMContentLoaded", start);
}
