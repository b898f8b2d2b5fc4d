import type { Point } from "./types.js";

/** Pure view transform: shapes live in source-pixel space, the canvas shows
 * them scaled by zoom and shifted by pan (display = source * zoom + pan). */
export interface ViewTransform {
  zoom: number;
  panX: number;
  panY: number;
}

export function displayToSource(view: ViewTransform, x: number, y: number): Point {
  return [(x - view.panX) / view.zoom, (y - view.panY) / view.zoom];
}

export function sourceToDisplay(view: ViewTransform, p: Point): Point {
  return [p[0] * view.zoom + view.panX, p[1] * view.zoom + view.panY];
}

/** Map a pointer event position (client coordinates) into source pixels. */
export function pointerToSource(
  view: ViewTransform,
  rect: { left: number; top: number },
  clientX: number,
  clientY: number,
): Point {
  return displayToSource(view, clientX - rect.left, clientY - rect.top);
}
