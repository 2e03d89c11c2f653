/**
 * Annotation and contour documents, mirroring the JSON schema the CLI and
 * service consume.  Serialization here must round-trip losslessly across
 * tools, so the document shape is kept in exact lockstep with the backend.
 */

export interface Point {
  x: number;
  y: number;
}

export interface SourcePoint extends Point {
  theta: number;
}

export interface AnnotationDoc {
  source: SourcePoint;
  z: Point | null;
  fg_scribbles: Point[][];
  bg_scribbles: Point[][];
  landmarks: Point[];
}

export interface ContourDiagnostics {
  total_curvature: number;
  is_simple: boolean;
  is_convex: boolean;
  encloses_z: boolean;
  winding: number;
  min_turn_angle: number;
  jaccard?: number;
}

export interface ProfileSample {
  arc_length: number;
  eta: number;
}

export interface ContourDoc {
  schema_version: string;
  vertices: Point[];
  diagnostics: ContourDiagnostics;
  turning_angle_profile: ProfileSample[];
  params: Record<string, unknown>;
  trace?: unknown[];
  converged?: boolean;
  degraded?: boolean;
}

export interface SegmentParams {
  model: "rsf" | "dubins" | "em";
  convexity: boolean;
  beta: number;
  alpha: number;
  mu: number;
  ntheta: number;
  edge_only?: boolean;
  appearance?: "gmm" | "pc";
  tube_radius?: number;
  max_iters?: number;
  budget_seconds?: number;
}

export function emptyAnnotation(): AnnotationDoc {
  return {
    source: { x: 0, y: 0, theta: 0 },
    z: null,
    fg_scribbles: [],
    bg_scribbles: [],
    landmarks: [],
  };
}

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isPoint(v: unknown): v is Point {
  return (
    typeof v === "object" &&
    v !== null &&
    isFiniteNumber((v as Point).x) &&
    isFiniteNumber((v as Point).y)
  );
}

/** Validate a parsed document; returns machine-readable error codes. */
export function validateAnnotation(doc: unknown): string[] {
  const errors: string[] = [];
  if (typeof doc !== "object" || doc === null) {
    return ["annotation.malformed"];
  }
  const d = doc as Partial<AnnotationDoc>;
  if (!d.source) {
    errors.push("annotation.source.missing");
  } else {
    for (const field of ["x", "y", "theta"] as const) {
      if (!isFiniteNumber(d.source[field])) {
        errors.push(`annotation.source.${field}.missing`);
      }
    }
  }
  if (d.z !== null && d.z !== undefined && !isPoint(d.z)) {
    errors.push("annotation.z.malformed");
  }
  for (const key of ["fg_scribbles", "bg_scribbles"] as const) {
    const strokes = d[key];
    if (strokes === undefined) continue;
    if (!Array.isArray(strokes)) {
      errors.push(`annotation.${key}.malformed`);
      continue;
    }
    for (const stroke of strokes) {
      if (!Array.isArray(stroke) || stroke.length === 0) {
        errors.push("annotation.scribble.empty");
      } else if (!stroke.every(isPoint)) {
        errors.push(`annotation.${key}.malformed`);
      }
    }
  }
  if (d.landmarks !== undefined &&
      (!Array.isArray(d.landmarks) || !d.landmarks.every(isPoint))) {
    errors.push("annotation.landmarks.malformed");
  }
  return errors;
}

/** Canonical serialization: field order matches the backend writer. */
export function annotationToJson(ann: AnnotationDoc): string {
  const doc = {
    source: { x: ann.source.x, y: ann.source.y, theta: ann.source.theta },
    z: ann.z === null ? null : { x: ann.z.x, y: ann.z.y },
    fg_scribbles: ann.fg_scribbles.map((s) => s.map(({ x, y }) => ({ x, y }))),
    bg_scribbles: ann.bg_scribbles.map((s) => s.map(({ x, y }) => ({ x, y }))),
    landmarks: ann.landmarks.map(({ x, y }) => ({ x, y })),
  };
  return JSON.stringify(doc, null, 2) + "\n";
}

export function parseAnnotation(text: string): AnnotationDoc {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    throw new Error("annotation.malformed");
  }
  const errors = validateAnnotation(doc);
  if (errors.length > 0) {
    throw new Error(errors[0]);
  }
  const d = doc as AnnotationDoc;
  return {
    source: { ...d.source },
    z: d.z ? { x: d.z.x, y: d.z.y } : null,
    fg_scribbles: (d.fg_scribbles ?? []).map((s) => s.map((p) => ({ ...p }))),
    bg_scribbles: (d.bg_scribbles ?? []).map((s) => s.map((p) => ({ ...p }))),
    landmarks: (d.landmarks ?? []).map((p) => ({ ...p })),
  };
}

/** det(p - z, n_theta) must be positive for a well-posed problem. */
export function compatibilityDeterminant(ann: AnnotationDoc): number | null {
  if (!ann.z) return null;
  const dx = ann.source.x - ann.z.x;
  const dy = ann.source.y - ann.z.y;
  return dx * Math.sin(ann.source.theta) - dy * Math.cos(ann.source.theta);
}
