/**
 * Session state: the annotation draft with a bounded undo stack, the chosen
 * parameters, and the last segmentation result.
 */

import {
  AnnotationDoc,
  ContourDoc,
  Point,
  SegmentParams,
  compatibilityDeterminant,
  emptyAnnotation,
} from "./schema.js";

export const UNDO_DEPTH = 50;
export const LANDMARK_TOGGLE_RADIUS = 3.0;

export interface ImageInfo {
  imageId: string | null;
  width: number;
  height: number;
}

export function defaultParams(): SegmentParams {
  return {
    model: "em",
    convexity: true,
    beta: 1.0,
    alpha: 3.0,
    mu: 0.1,
    ntheta: 60,
    edge_only: false,
    appearance: "gmm",
  };
}

function cloneAnnotation(a: AnnotationDoc): AnnotationDoc {
  return {
    source: { ...a.source },
    z: a.z ? { ...a.z } : null,
    fg_scribbles: a.fg_scribbles.map((s) => s.map((p) => ({ ...p }))),
    bg_scribbles: a.bg_scribbles.map((s) => s.map((p) => ({ ...p }))),
    landmarks: a.landmarks.map((p) => ({ ...p })),
  };
}

export class SessionStore {
  image: ImageInfo | null = null;
  draft: AnnotationDoc = emptyAnnotation();
  sourceSet = false;
  params: SegmentParams = defaultParams();
  lastResponse: ContourDoc | null = null;

  private undoStack: AnnotationDoc[] = [];
  private redoStack: AnnotationDoc[] = [];

  private pushUndo(): void {
    this.undoStack.push(cloneAnnotation(this.draft));
    if (this.undoStack.length > UNDO_DEPTH) {
      this.undoStack.shift();
    }
    this.redoStack = [];
  }

  setImage(info: ImageInfo): void {
    this.image = info;
    this.draft = emptyAnnotation();
    this.sourceSet = false;
    this.undoStack = [];
    this.redoStack = [];
    this.lastResponse = null;
  }

  inBounds(p: Point): boolean {
    if (!this.image) return false;
    return (
      p.x >= 0 && p.x <= this.image.width - 1 &&
      p.y >= 0 && p.y <= this.image.height - 1
    );
  }

  /** Place or move the oriented source point; out-of-image input is a no-op. */
  setSource(p: Point, theta: number): boolean {
    if (!this.inBounds(p)) return false;
    this.pushUndo();
    this.draft.source = { x: p.x, y: p.y, theta };
    this.sourceSet = true;
    return true;
  }

  setSourceAngle(theta: number): void {
    this.pushUndo();
    this.draft.source.theta = theta;
  }

  setZ(p: Point | null): boolean {
    if (p !== null && !this.inBounds(p)) return false;
    this.pushUndo();
    this.draft.z = p ? { ...p } : null;
    return true;
  }

  addStroke(kind: "fg" | "bg", points: Point[]): boolean {
    if (points.length === 0) return false;
    this.pushUndo();
    const target =
      kind === "fg" ? this.draft.fg_scribbles : this.draft.bg_scribbles;
    target.push(points.map((p) => ({ ...p })));
    return true;
  }

  /** Click semantics: a click within the toggle radius of an existing
   * landmark removes it, anywhere else adds one. */
  toggleLandmark(p: Point): "added" | "removed" | "rejected" {
    if (!this.inBounds(p)) return "rejected";
    this.pushUndo();
    const idx = this.draft.landmarks.findIndex(
      (q) => Math.hypot(q.x - p.x, q.y - p.y) <= LANDMARK_TOGGLE_RADIUS,
    );
    if (idx >= 0) {
      this.draft.landmarks.splice(idx, 1);
      return "removed";
    }
    this.draft.landmarks.push({ ...p });
    return "added";
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (!prev) return false;
    this.redoStack.push(cloneAnnotation(this.draft));
    this.draft = prev;
    return true;
  }

  redo(): boolean {
    const next = this.redoStack.pop();
    if (!next) return false;
    this.undoStack.push(cloneAnnotation(this.draft));
    this.draft = next;
    return true;
  }

  /** Inline geometric warning; the server re-validates authoritatively. */
  compatibilityWarning(): string | null {
    const det = compatibilityDeterminant(this.draft);
    if (det !== null && det <= 0) {
      return "source.orientation.incompatible";
    }
    return null;
  }
}
