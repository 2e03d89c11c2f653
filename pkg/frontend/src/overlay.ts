/**
 * Viewport transform and overlay rendering.  All overlay geometry is stored
 * in image-pixel coordinates and only mapped to canvas coordinates at render
 * time, so zooming or panning never mutates the annotation.
 */

import { AnnotationDoc, ContourDoc, Point } from "./schema.js";

export interface Viewport {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export function fitViewport(
  imageW: number,
  imageH: number,
  canvasW: number,
  canvasH: number,
): Viewport {
  const scale = Math.min(canvasW / imageW, canvasH / imageH);
  return {
    scale,
    offsetX: (canvasW - imageW * scale) / 2,
    offsetY: (canvasH - imageH * scale) / 2,
  };
}

export function imageToCanvas(v: Viewport, p: Point): Point {
  return { x: p.x * v.scale + v.offsetX, y: p.y * v.scale + v.offsetY };
}

export function canvasToImage(v: Viewport, p: Point): Point {
  return { x: (p.x - v.offsetX) / v.scale, y: (p.y - v.offsetY) / v.scale };
}

function polyline(
  ctx: CanvasRenderingContext2D,
  v: Viewport,
  pts: Point[],
  close = false,
): void {
  if (pts.length === 0) return;
  ctx.beginPath();
  const first = imageToCanvas(v, pts[0]);
  ctx.moveTo(first.x, first.y);
  for (const p of pts.slice(1)) {
    const c = imageToCanvas(v, p);
    ctx.lineTo(c.x, c.y);
  }
  if (close) ctx.closePath();
  ctx.stroke();
}

export interface OverlayOptions {
  rayPreview?: boolean;
}

export function renderOverlay(
  ctx: CanvasRenderingContext2D,
  v: Viewport,
  ann: AnnotationDoc,
  sourceSet: boolean,
  contour: ContourDoc | null,
  opts: OverlayOptions = {},
): void {
  ctx.lineWidth = 1.5;
  for (const stroke of ann.fg_scribbles) {
    ctx.strokeStyle = "#2d7ff9";
    polyline(ctx, v, stroke);
  }
  for (const stroke of ann.bg_scribbles) {
    ctx.strokeStyle = "#f9a825";
    polyline(ctx, v, stroke);
  }
  ctx.fillStyle = "#2d7ff9";
  for (const lm of ann.landmarks) {
    const c = imageToCanvas(v, lm);
    ctx.beginPath();
    ctx.arc(c.x, c.y, 4, 0, 2 * Math.PI);
    ctx.fill();
  }
  if (ann.z) {
    const c = imageToCanvas(v, ann.z);
    ctx.fillStyle = "#d32f2f";
    ctx.beginPath();
    ctx.arc(c.x, c.y, 4, 0, 2 * Math.PI);
    ctx.fill();
    if (opts.rayPreview && sourceSet) {
      ctx.strokeStyle = "rgba(0,0,0,0.45)";
      ctx.setLineDash([6, 4]);
      const dir = {
        x: ann.source.x - ann.z.x,
        y: ann.source.y - ann.z.y,
      };
      const len = Math.hypot(dir.x, dir.y) || 1;
      const far = {
        x: ann.z.x + (dir.x / len) * 10000,
        y: ann.z.y + (dir.y / len) * 10000,
      };
      polyline(ctx, v, [ann.z, far]);
      ctx.setLineDash([]);
    }
  }
  if (sourceSet) {
    const c = imageToCanvas(v, ann.source);
    ctx.fillStyle = "#00bcd4";
    ctx.beginPath();
    ctx.arc(c.x, c.y, 5, 0, 2 * Math.PI);
    ctx.fill();
    const tip = imageToCanvas(v, {
      x: ann.source.x + 12 * Math.cos(ann.source.theta),
      y: ann.source.y + 12 * Math.sin(ann.source.theta),
    });
    ctx.strokeStyle = "#00bcd4";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(c.x, c.y);
    ctx.lineTo(tip.x, tip.y);
    ctx.stroke();
  }
  if (contour) {
    ctx.strokeStyle = "#e53935";
    ctx.lineWidth = 2;
    polyline(ctx, v, contour.vertices, true);
  }
}

/** Contour vertices as they land on the canvas; used by the parity tests. */
export function projectedVertices(v: Viewport, contour: ContourDoc): Point[] {
  return contour.vertices.map((p) => imageToCanvas(v, p));
}
