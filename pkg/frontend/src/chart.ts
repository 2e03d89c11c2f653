/** Turning-angle chart: arc length on x, unwrapped tangent angle on y. */

import { ProfileSample } from "./schema.js";

export interface ChartLayout {
  width: number;
  height: number;
  margin: number;
}

export interface ChartPoint {
  x: number;
  y: number;
}

export function profileToChartPoints(
  profile: ProfileSample[],
  layout: ChartLayout,
): ChartPoint[] {
  if (profile.length === 0) return [];
  const xs = profile.map((p) => p.arc_length);
  const ys = profile.map((p) => p.eta);
  const x0 = Math.min(...xs);
  const x1 = Math.max(...xs);
  const y0 = Math.min(...ys);
  const y1 = Math.max(...ys);
  const spanX = x1 - x0 || 1;
  const spanY = y1 - y0 || 1;
  const inner = {
    w: layout.width - 2 * layout.margin,
    h: layout.height - 2 * layout.margin,
  };
  return profile.map((p) => ({
    x: layout.margin + ((p.arc_length - x0) / spanX) * inner.w,
    y: layout.height - layout.margin - ((p.eta - y0) / spanY) * inner.h,
  }));
}

export function drawTurningProfile(
  ctx: CanvasRenderingContext2D,
  profile: ProfileSample[],
  layout: ChartLayout,
): void {
  ctx.clearRect(0, 0, layout.width, layout.height);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(
    layout.margin,
    layout.margin,
    layout.width - 2 * layout.margin,
    layout.height - 2 * layout.margin,
  );
  const pts = profileToChartPoints(profile, layout);
  if (pts.length === 0) return;
  ctx.strokeStyle = "#1565c0";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.moveTo(pts[0].x, pts[0].y);
  for (const p of pts.slice(1)) {
    ctx.lineTo(p.x, p.y);
  }
  ctx.stroke();
}
