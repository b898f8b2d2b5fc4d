import { isSimplePolygon } from "./geometry.js";
import type {
  Choice,
  LabelDocument,
  Point,
  PreviewResponse,
  RetargetRequest,
} from "./types.js";

export type Tool = "object" | "line";

export interface Shape {
  kind: "polygon" | "polyline";
  points: Point[];
}

export const RATIO_MIN = 0.1;
export const RATIO_MAX = 2.0;

export interface CommitResult {
  ok: boolean;
  error?: string;
}

/** Everything the studio session knows: the uploaded image, committed and
 * in-progress shapes (in source-pixel coordinates), the retarget settings,
 * and the last preview. */
export class AnnotationState {
  imageId: string | null = null;
  imageWidth = 0;
  imageHeight = 0;
  shapes: Shape[] = [];
  draft: Point[] = [];
  tool: Tool = "object";
  choice: Choice = "even";
  ratio = 1.0;
  chessboard = false;
  showMesh = false;
  lastPreview: PreviewResponse | null = null;

  setImage(id: string, width: number, height: number): void {
    this.imageId = id;
    this.imageWidth = width;
    this.imageHeight = height;
    this.shapes = [];
    this.draft = [];
    this.lastPreview = null;
  }

  setRatio(value: number): void {
    this.ratio = Math.min(RATIO_MAX, Math.max(RATIO_MIN + 1e-9, value));
  }

  addDraftPoint(p: Point): CommitResult {
    if (this.imageId === null) {
      return { ok: false, error: "load an image first" };
    }
    const [x, y] = p;
    if (x < 0 || y < 0 || x > this.imageWidth || y > this.imageHeight) {
      return { ok: false, error: "point outside the image" };
    }
    this.draft.push([x, y]);
    return { ok: true };
  }

  /** Close the draft as a shape of the active tool. Self-intersecting
   * polygons are rejected and the draft is kept for fixing. */
  commitDraft(): CommitResult {
    if (this.tool === "object") {
      if (this.draft.length < 3) {
        return { ok: false, error: "a polygon needs at least 3 points" };
      }
      if (!isSimplePolygon(this.draft)) {
        return { ok: false, error: "polygon is self-intersecting" };
      }
      this.shapes.push({ kind: "polygon", points: this.draft.slice() });
    } else {
      if (this.draft.length < 2) {
        return { ok: false, error: "a line needs at least 2 points" };
      }
      this.shapes.push({ kind: "polyline", points: this.draft.slice() });
    }
    this.draft = [];
    return { ok: true };
  }

  cancelDraft(): void {
    this.draft = [];
  }

  undoLast(): void {
    if (this.draft.length) {
      this.draft.pop();
    } else {
      this.shapes.pop();
    }
  }

  /** Serialize committed shapes into the document the CLI accepts. */
  toLabelSet(): LabelDocument {
    return {
      objects: this.shapes
        .filter((s) => s.kind === "polygon")
        .map((s) => ({ polygon: s.points.map((p) => [p[0], p[1]] as Point) })),
      lines: this.shapes
        .filter((s) => s.kind === "polyline")
        .map((s) => ({ polyline: s.points.map((p) => [p[0], p[1]] as Point) })),
    };
  }

  exportLabelSet(): string {
    return JSON.stringify(this.toLabelSet(), null, 2);
  }

  /** Replace the committed shapes with the content of a label document. */
  loadLabelSet(doc: LabelDocument): CommitResult {
    if (!doc || !Array.isArray(doc.objects) || !Array.isArray(doc.lines)) {
      return { ok: false, error: "document needs 'objects' and 'lines' arrays" };
    }
    const shapes: Shape[] = [];
    for (const entry of doc.objects) {
      const points = (entry.polygon ?? []).map((p) => [p[0], p[1]] as Point);
      if (points.length < 3 || !isSimplePolygon(points)) {
        return { ok: false, error: "document contains an invalid polygon" };
      }
      shapes.push({ kind: "polygon", points });
    }
    for (const entry of doc.lines) {
      const points = (entry.polyline ?? []).map((p) => [p[0], p[1]] as Point);
      if (points.length < 2) {
        return { ok: false, error: "document contains an invalid polyline" };
      }
      shapes.push({ kind: "polyline", points });
    }
    this.shapes = shapes;
    this.draft = [];
    return { ok: true };
  }

  toRequest(): RetargetRequest {
    if (this.imageId === null) {
      throw new Error("no image uploaded");
    }
    const labels = this.toLabelSet();
    const hasLabels = labels.objects.length > 0 || labels.lines.length > 0;
    return {
      image_id: this.imageId,
      labels: hasLabels ? labels : null,
      ratio: this.ratio,
      choice: this.choice,
      chessboard: this.chessboard,
      include_mesh: this.showMesh,
    };
  }
}
