import type { Point } from "./types.js";

function orient(a: Point, b: Point, c: Point): number {
  return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

function onSegment(p: Point, a: Point, b: Point, eps: number): boolean {
  return (
    Math.min(a[0], b[0]) - eps <= p[0] &&
    p[0] <= Math.max(a[0], b[0]) + eps &&
    Math.min(a[1], b[1]) - eps <= p[1] &&
    p[1] <= Math.max(a[1], b[1]) + eps
  );
}

/** Closed-segment intersection test, collinear touching included. */
export function segmentsIntersect(p1: Point, p2: Point, p3: Point, p4: Point, eps = 1e-12): boolean {
  const d1 = orient(p3, p4, p1);
  const d2 = orient(p3, p4, p2);
  const d3 = orient(p1, p2, p3);
  const d4 = orient(p1, p2, p4);
  if (((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) &&
      ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))) {
    return true;
  }
  if (Math.abs(d1) <= eps && onSegment(p1, p3, p4, eps)) return true;
  if (Math.abs(d2) <= eps && onSegment(p2, p3, p4, eps)) return true;
  if (Math.abs(d3) <= eps && onSegment(p3, p1, p2, eps)) return true;
  if (Math.abs(d4) <= eps && onSegment(p4, p1, p2, eps)) return true;
  return false;
}

export function polygonArea(points: Point[]): number {
  let area = 0;
  for (let i = 0; i < points.length; i++) {
    const [x1, y1] = points[i];
    const [x2, y2] = points[(i + 1) % points.length];
    area += x1 * y2 - x2 * y1;
  }
  return area / 2;
}

/** A polygon is usable when it has area and no two non-adjacent edges meet. */
export function isSimplePolygon(points: Point[]): boolean {
  const n = points.length;
  if (n < 3) return false;
  const scale = Math.max(1, ...points.flat().map(Math.abs));
  if (Math.abs(polygonArea(points)) <= 1e-12 * scale * scale) return false;
  const eps = 1e-12 * scale * scale;
  for (let i = 0; i < n; i++) {
    const a1 = points[i];
    const a2 = points[(i + 1) % n];
    for (let j = i + 1; j < n; j++) {
      const adjacent = (j + 1) % n === i || (i + 1) % n === j;
      if (adjacent) continue;
      if (segmentsIntersect(a1, a2, points[j], points[(j + 1) % n], eps)) {
        return false;
      }
    }
  }
  return true;
}
