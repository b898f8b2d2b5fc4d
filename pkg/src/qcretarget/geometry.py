"""Regular triangular meshes over an image rectangle and label rasterization.

Coordinates here live in the mathematical orientation: origin at the lower
left, y increasing upward, domain [0, width] x [0, height].  Callers that
start from image pixel coordinates (y down) flip before entering this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import InputError, LabelError


class Point2(NamedTuple):
    x: float
    y: float


class BoundaryTag(IntEnum):
    INTERIOR = 0
    LEFT = 1
    RIGHT = 2
    BOTTOM = 3
    TOP = 4
    CORNER_LL = 5
    CORNER_LR = 6
    CORNER_TL = 7
    CORNER_TR = 8


_LEFTISH = (BoundaryTag.LEFT, BoundaryTag.CORNER_LL, BoundaryTag.CORNER_TL)
_RIGHTISH = (BoundaryTag.RIGHT, BoundaryTag.CORNER_LR, BoundaryTag.CORNER_TR)
_BOTTOMISH = (BoundaryTag.BOTTOM, BoundaryTag.CORNER_LL, BoundaryTag.CORNER_LR)
_TOPISH = (BoundaryTag.TOP, BoundaryTag.CORNER_TL, BoundaryTag.CORNER_TR)
_CORNERS = (
    BoundaryTag.CORNER_LL,
    BoundaryTag.CORNER_LR,
    BoundaryTag.CORNER_TL,
    BoundaryTag.CORNER_TR,
)


def on_left(tag: int) -> bool:
    return tag in _LEFTISH


def on_right(tag: int) -> bool:
    return tag in _RIGHTISH


def on_bottom(tag: int) -> bool:
    return tag in _BOTTOMISH


def on_top(tag: int) -> bool:
    return tag in _TOPISH


def is_corner(tag: int) -> bool:
    return tag in _CORNERS


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulated rectangle.

    vertices:      (N, 2) float64, math orientation.
    faces:         (F, 3) int32, counterclockwise.
    boundary_tags: (N,) int8 of BoundaryTag values.
    grid:          (p, q) cell counts along x and y.
    """

    vertices: np.ndarray
    faces: np.ndarray
    boundary_tags: np.ndarray
    width: float
    height: float
    grid: tuple[int, int]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def signed_areas(self) -> np.ndarray:
        v = self.vertices
        a, b, c = (v[self.faces[:, k]] for k in range(3))
        return 0.5 * (
            (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
            - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        )

    def centroids(self) -> np.ndarray:
        return self.vertices[self.faces].mean(axis=1)

    def face_bounds(self) -> np.ndarray:
        """Per-face (xmin, xmax, ymin, ymax)."""
        pts = self.vertices[self.faces]
        return np.column_stack(
            [
                pts[:, :, 0].min(axis=1),
                pts[:, :, 0].max(axis=1),
                pts[:, :, 1].min(axis=1),
                pts[:, :, 1].max(axis=1),
            ]
        )

    def interior_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_tags == BoundaryTag.INTERIOR)

    def edge_counts(self) -> dict[tuple[int, int], int]:
        counts: dict[tuple[int, int], int] = {}
        for i, j, k in self.faces:
            for a, b in ((i, j), (j, k), (k, i)):
                key = (int(min(a, b)), int(max(a, b)))
                counts[key] = counts.get(key, 0) + 1
        return counts

    def validate(self) -> None:
        """Structural checks: orientation, tags on their edges, 2-manifold."""
        areas = self.signed_areas()
        if not np.all(areas > 0):
            bad = np.flatnonzero(areas <= 0)[:8].tolist()
            raise InputError("faces with non-positive area", faces=bad)
        v = self.vertices
        for i, tag in enumerate(self.boundary_tags):
            x, y = v[i]
            if on_left(tag) and x != 0.0:
                raise InputError("left-tagged vertex off the left edge", vertex=i)
            if on_right(tag) and x != self.width:
                raise InputError("right-tagged vertex off the right edge", vertex=i)
            if on_bottom(tag) and y != 0.0:
                raise InputError("bottom-tagged vertex off the bottom edge", vertex=i)
            if on_top(tag) and y != self.height:
                raise InputError("top-tagged vertex off the top edge", vertex=i)
        for (a, b), count in self.edge_counts().items():
            xa, ya = v[a]
            xb, yb = v[b]
            on_rim = (
                (xa == 0.0 and xb == 0.0)
                or (xa == self.width and xb == self.width)
                or (ya == 0.0 and yb == 0.0)
                or (ya == self.height and yb == self.height)
            )
            expected = 1 if on_rim else 2
            if count != expected:
                raise InputError(
                    "edge incidence breaks the 2-manifold property",
                    edge=(a, b),
                    count=count,
                    expected=expected,
                )


def _pick_grid(width: float, height: float, target_vertex_count: int) -> tuple[int, int]:
    """Choose cell counts (p, q) with (p+1)(q+1) >= target and cells near square."""
    best: tuple[float, int, int] | None = None
    best_pq = (1, 1)
    for q in range(1, target_vertex_count + 1):
        p = max(1, math.ceil(target_vertex_count / (q + 1)) - 1)
        while (p + 1) * (q + 1) < target_vertex_count:
            p += 1
        count = (p + 1) * (q + 1)
        aspect = (width / p) / (height / q)
        score = (abs(math.log(aspect)), count, q)
        if best is None or score < best:
            best = score
            best_pq = (p, q)
        if q + 1 > target_vertex_count // 2 + 1:
            break
    return best_pq


def build_regular_mesh(width: float, height: float, target_vertex_count: int = 1500) -> Mesh:
    """Regular grid of (p+1) x (q+1) vertices, each cell split into two CCW
    triangles along the lower-left to upper-right diagonal."""
    if not (width > 0 and height > 0):
        raise InputError("image dimensions must be positive", width=width, height=height)
    if width < 2 or height < 2:
        raise InputError("image dimensions must be at least 2 pixels", width=width, height=height)
    if target_vertex_count < 4:
        raise InputError("need at least 4 mesh vertices", requested=target_vertex_count)

    p, q = _pick_grid(float(width), float(height), int(target_vertex_count))
    xs = np.linspace(0.0, float(width), p + 1)
    ys = np.linspace(0.0, float(height), q + 1)
    gx, gy = np.meshgrid(xs, ys)  # row-major over y then x
    vertices = np.column_stack([gx.ravel(), gy.ravel()]).astype(np.float64)

    def vid(i: int, j: int) -> int:
        return j * (p + 1) + i

    faces = np.empty((2 * p * q, 3), dtype=np.int32)
    n = 0
    for j in range(q):
        for i in range(p):
            ll = vid(i, j)
            lr = vid(i + 1, j)
            ur = vid(i + 1, j + 1)
            ul = vid(i, j + 1)
            faces[n] = (ll, lr, ur)
            faces[n + 1] = (ll, ur, ul)
            n += 2

    tags = np.full(len(vertices), BoundaryTag.INTERIOR, dtype=np.int8)
    for j in range(q + 1):
        for i in range(p + 1):
            left, right = i == 0, i == p
            bottom, top = j == 0, j == q
            tag = BoundaryTag.INTERIOR
            if left and bottom:
                tag = BoundaryTag.CORNER_LL
            elif right and bottom:
                tag = BoundaryTag.CORNER_LR
            elif left and top:
                tag = BoundaryTag.CORNER_TL
            elif right and top:
                tag = BoundaryTag.CORNER_TR
            elif left:
                tag = BoundaryTag.LEFT
            elif right:
                tag = BoundaryTag.RIGHT
            elif bottom:
                tag = BoundaryTag.BOTTOM
            elif top:
                tag = BoundaryTag.TOP
            tags[vid(i, j)] = tag

    return Mesh(
        vertices=vertices,
        faces=faces,
        boundary_tags=tags,
        width=float(width),
        height=float(height),
        grid=(p, q),
    )


# ---------------------------------------------------------------------------
# point / segment predicates


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(px, py, ax, ay, bx, by, eps: float) -> bool:
    """Collinear point within the segment's bounding box."""
    return (
        min(ax, bx) - eps <= px <= max(ax, bx) + eps
        and min(ay, by) - eps <= py <= max(ay, by) + eps
    )


def segments_intersect(p1, p2, p3, p4, eps: float = 1e-12) -> bool:
    """Closed-segment intersection, collinear touching included."""
    d1 = _orient(p3[0], p3[1], p4[0], p4[1], p1[0], p1[1])
    d2 = _orient(p3[0], p3[1], p4[0], p4[1], p2[0], p2[1])
    d3 = _orient(p1[0], p1[1], p2[0], p2[1], p3[0], p3[1])
    d4 = _orient(p1[0], p1[1], p2[0], p2[1], p4[0], p4[1])
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True
    if abs(d1) <= eps and _on_segment(p1[0], p1[1], p3[0], p3[1], p4[0], p4[1], eps):
        return True
    if abs(d2) <= eps and _on_segment(p2[0], p2[1], p3[0], p3[1], p4[0], p4[1], eps):
        return True
    if abs(d3) <= eps and _on_segment(p3[0], p3[1], p1[0], p1[1], p2[0], p2[1], eps):
        return True
    if abs(d4) <= eps and _on_segment(p4[0], p4[1], p1[0], p1[1], p2[0], p2[1], eps):
        return True
    return False


def _segments_properly_cross(p1, p2, p3, p4, eps: float) -> bool:
    d1 = _orient(p3[0], p3[1], p4[0], p4[1], p1[0], p1[1])
    d2 = _orient(p3[0], p3[1], p4[0], p4[1], p2[0], p2[1])
    d3 = _orient(p1[0], p1[1], p2[0], p2[1], p3[0], p3[1])
    d4 = _orient(p1[0], p1[1], p2[0], p2[1], p4[0], p4[1])
    return ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    )


def point_in_triangle(px, py, tri: np.ndarray, eps: float = 1e-9) -> bool:
    (ax, ay), (bx, by), (cx, cy) = tri
    d1 = _orient(ax, ay, bx, by, px, py)
    d2 = _orient(bx, by, cx, cy, px, py)
    d3 = _orient(cx, cy, ax, ay, px, py)
    scale = abs(d1) + abs(d2) + abs(d3) + eps
    tol = eps * scale
    return d1 >= -tol and d2 >= -tol and d3 >= -tol


def segment_intersects_triangle(a, b, tri: np.ndarray, eps: float = 1e-12) -> bool:
    if point_in_triangle(a[0], a[1], tri) or point_in_triangle(b[0], b[1], tri):
        return True
    for k in range(3):
        if segments_intersect(a, b, tri[k], tri[(k + 1) % 3], eps):
            return True
    return False


def points_in_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Vectorized crossing-number test.  Boundary points are not guaranteed
    either way; region queries add boundary-straddling faces separately."""
    x = points[:, 0][:, None]
    y = points[:, 1][:, None]
    x1 = polygon[:, 0][None, :]
    y1 = polygon[:, 1][None, :]
    x2 = np.roll(polygon[:, 0], -1)[None, :]
    y2 = np.roll(polygon[:, 1], -1)[None, :]
    straddles = (y1 <= y) != (y2 <= y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    hits = straddles & (x < xcross)
    return hits.sum(axis=1) % 2 == 1


def polygon_area(polygon: np.ndarray) -> float:
    x = polygon[:, 0]
    y = polygon[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _dedup_closed(points: Sequence[Sequence[float]]) -> np.ndarray:
    pts = [tuple(map(float, p)) for p in points]
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts = pts[:-1]
    out = []
    for p in pts:
        if not out or p != out[-1]:
            out.append(p)
    return np.asarray(out, dtype=np.float64)


def validate_polygon(points: Sequence[Sequence[float]]) -> np.ndarray:
    """Simple (non-self-intersecting) polygon with nonzero area, or LabelError."""
    poly = _dedup_closed(points)
    if len(poly) < 3:
        raise LabelError("polygon needs at least 3 distinct vertices", got=len(poly))
    if not np.all(np.isfinite(poly)):
        raise LabelError("polygon has non-finite coordinates")
    scale = max(1.0, float(np.abs(poly).max()))
    if abs(polygon_area(poly)) <= 1e-12 * scale * scale:
        raise LabelError("polygon is degenerate (zero area)")
    n = len(poly)
    eps = 1e-12 * scale * scale
    for i in range(n):
        a1, a2 = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            adjacent = (j + 1) % n == i or (i + 1) % n == j
            b1, b2 = poly[j], poly[(j + 1) % n]
            if adjacent:
                continue
            if segments_intersect(a1, a2, b1, b2, eps):
                raise LabelError("polygon is self-intersecting", edges=(i, j))
    return poly


def validate_polyline(points: Sequence[Sequence[float]]) -> np.ndarray:
    pts = [tuple(map(float, p)) for p in points]
    out = []
    for p in pts:
        if not out or p != out[-1]:
            out.append(p)
    line = np.asarray(out, dtype=np.float64)
    if len(line) < 2:
        raise LabelError("polyline needs at least 2 distinct points", got=len(line))
    if not np.all(np.isfinite(line)):
        raise LabelError("polyline has non-finite coordinates")
    return line


# ---------------------------------------------------------------------------
# label rasterization onto face sets


def _candidate_faces(mesh: Mesh, xmin, xmax, ymin, ymax) -> np.ndarray:
    fb = mesh.face_bounds()
    hit = (fb[:, 0] <= xmax) & (fb[:, 1] >= xmin) & (fb[:, 2] <= ymax) & (fb[:, 3] >= ymin)
    return np.flatnonzero(hit)


def faces_for_polygon(mesh: Mesh, polygon: Sequence[Sequence[float]]) -> frozenset[int]:
    """Faces whose centroid lies inside the polygon, plus faces the polygon
    boundary passes through."""
    poly = validate_polygon(polygon)
    inside = points_in_polygon(mesh.centroids(), poly)
    selected = set(np.flatnonzero(inside).tolist())
    tri_pts = mesh.vertices[mesh.faces]
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        lo_x, hi_x = min(a[0], b[0]), max(a[0], b[0])
        lo_y, hi_y = min(a[1], b[1]), max(a[1], b[1])
        for f in _candidate_faces(mesh, lo_x, hi_x, lo_y, hi_y):
            if f in selected:
                continue
            if segment_intersects_triangle(a, b, tri_pts[f]):
                selected.add(int(f))
    return frozenset(selected)


def faces_for_polyline(mesh: Mesh, polyline: Sequence[Sequence[float]]) -> frozenset[int]:
    """Exactly the faces whose closed triangle meets any polyline segment."""
    line = validate_polyline(polyline)
    tri_pts = mesh.vertices[mesh.faces]
    selected: set[int] = set()
    for a, b in zip(line[:-1], line[1:]):
        lo_x, hi_x = min(a[0], b[0]), max(a[0], b[0])
        lo_y, hi_y = min(a[1], b[1]), max(a[1], b[1])
        for f in _candidate_faces(mesh, lo_x, hi_x, lo_y, hi_y):
            if f in selected:
                continue
            if segment_intersects_triangle(a, b, tri_pts[f]):
                selected.add(int(f))
    return frozenset(selected)


def _face_set_bounds(mesh: Mesh, face_set: Iterable[int]) -> tuple[float, float, float, float]:
    idx = np.fromiter(face_set, dtype=np.int64)
    pts = mesh.vertices[mesh.faces[idx]].reshape(-1, 2)
    return (
        float(pts[:, 0].min()),
        float(pts[:, 0].max()),
        float(pts[:, 1].min()),
        float(pts[:, 1].max()),
    )


def compute_stripes(
    mesh: Mesh, object_faces: Sequence[Iterable[int]]
) -> tuple[frozenset[int], frozenset[int]]:
    """Horizontal / vertical face bands covering the objects' bounding boxes.

    Overlap is strict (positive length), so a band does not leak into the
    neighboring grid row/column that merely touches its edge.
    """
    groups = [set(g) for g in object_faces if len(set(g)) > 0]
    if not groups:
        return frozenset(), frozenset()
    fb = mesh.face_bounds()
    h_mask = np.zeros(mesh.n_faces, dtype=bool)
    v_mask = np.zeros(mesh.n_faces, dtype=bool)
    for g in groups:
        x0, x1, y0, y1 = _face_set_bounds(mesh, g)
        h_mask |= (fb[:, 2] < y1) & (fb[:, 3] > y0)
        v_mask |= (fb[:, 0] < x1) & (fb[:, 1] > x0)
    return frozenset(np.flatnonzero(h_mask).tolist()), frozenset(np.flatnonzero(v_mask).tolist())


# ---------------------------------------------------------------------------
# label documents and region models


@dataclass(frozen=True)
class LabelSet:
    """User labels in source coordinates: closed object polygons and line
    polylines.  The on-disk document places the origin at the top-left with y
    down; `flipped` converts to the internal orientation."""

    object_polygons: tuple[np.ndarray, ...] = ()
    line_polylines: tuple[np.ndarray, ...] = ()

    @staticmethod
    def from_dict(doc: dict) -> "LabelSet":
        if not isinstance(doc, dict):
            raise LabelError("label document must be an object with 'objects' and 'lines'")
        objects = doc.get("objects", [])
        lines = doc.get("lines", [])
        if not isinstance(objects, list) or not isinstance(lines, list):
            raise LabelError("'objects' and 'lines' must be arrays")
        polys = []
        for k, entry in enumerate(objects):
            if not isinstance(entry, dict) or "polygon" not in entry:
                raise LabelError("object entry needs a 'polygon' array", index=k)
            polys.append(validate_polygon(entry["polygon"]))
        plines = []
        for k, entry in enumerate(lines):
            if not isinstance(entry, dict) or "polyline" not in entry:
                raise LabelError("line entry needs a 'polyline' array", index=k)
            plines.append(validate_polyline(entry["polyline"]))
        return LabelSet(object_polygons=tuple(polys), line_polylines=tuple(plines))

    def to_dict(self) -> dict:
        return {
            "objects": [{"polygon": p.tolist()} for p in self.object_polygons],
            "lines": [{"polyline": p.tolist()} for p in self.line_polylines],
        }

    def check_bounds(self, width: float, height: float) -> None:
        for k, poly in enumerate(self.object_polygons):
            self._check_points(poly, width, height, kind="object", index=k)
        for k, line in enumerate(self.line_polylines):
            self._check_points(line, width, height, kind="line", index=k)

    @staticmethod
    def _check_points(pts: np.ndarray, width: float, height: float, kind: str, index: int):
        bad = np.flatnonzero(
            (pts[:, 0] < 0) | (pts[:, 0] > width) | (pts[:, 1] < 0) | (pts[:, 1] > height)
        )
        if len(bad):
            i = int(bad[0])
            raise LabelError(
                f"{kind} coordinate outside the image",
                index=index,
                vertex=i,
                point=(float(pts[i, 0]), float(pts[i, 1])),
                bounds=(width, height),
            )

    def flipped(self, height: float) -> "LabelSet":
        """Flip y (image orientation, y down) to math orientation (y up)."""

        def flip(pts: np.ndarray) -> np.ndarray:
            out = pts.copy()
            out[:, 1] = height - out[:, 1]
            return out

        return LabelSet(
            object_polygons=tuple(flip(p) for p in self.object_polygons),
            line_polylines=tuple(flip(p) for p in self.line_polylines),
        )

    @property
    def empty(self) -> bool:
        return not self.object_polygons and not self.line_polylines


@dataclass(frozen=True)
class RegionModel:
    """Face-index sets for objects, lines, the covering stripes and the rest."""

    n_faces: int
    object_faces: tuple[frozenset[int], ...]
    line_faces: tuple[frozenset[int], ...]
    stripe_h: frozenset[int]
    stripe_v: frozenset[int]
    background: frozenset[int]
    object_bounds: tuple[tuple[float, float, float, float], ...]

    @property
    def objects_union(self) -> frozenset[int]:
        out: set[int] = set()
        for g in self.object_faces:
            out |= g
        return frozenset(out)

    @property
    def lines_union(self) -> frozenset[int]:
        out: set[int] = set()
        for g in self.line_faces:
            out |= g
        return frozenset(out)


def merged_interval_length(intervals: Sequence[tuple[float, float]]) -> float:
    """Total length of the union of closed intervals."""
    if not intervals:
        return 0.0
    ordered = sorted((float(a), float(b)) for a, b in intervals)
    total = 0.0
    cur_lo, cur_hi = ordered[0]
    for lo, hi in ordered[1:]:
        if lo > cur_hi:
            total += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        else:
            cur_hi = max(cur_hi, hi)
    total += cur_hi - cur_lo
    return total


def merged_intervals(intervals: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    if not intervals:
        return []
    ordered = sorted((float(a), float(b)) for a, b in intervals)
    out = [list(ordered[0])]
    for lo, hi in ordered[1:]:
        if lo > out[-1][1]:
            out.append([lo, hi])
        else:
            out[-1][1] = max(out[-1][1], hi)
    return [(a, b) for a, b in out]


def build_region_model(mesh: Mesh, labels: LabelSet, with_stripes: bool = True) -> RegionModel:
    """Rasterize math-oriented labels into disjoint face sets plus stripes.

    A face claimed by several object polygons goes to the earliest one so the
    object sets stay pairwise disjoint.
    """
    claimed: set[int] = set()
    object_faces: list[frozenset[int]] = []
    bounds: list[tuple[float, float, float, float]] = []
    for poly in labels.object_polygons:
        faces = faces_for_polygon(mesh, poly) - claimed
        if not faces:
            raise LabelError("object polygon selects no mesh faces", polygon=poly[:3].tolist())
        claimed |= faces
        object_faces.append(frozenset(faces))
        bounds.append(_face_set_bounds(mesh, faces))

    line_faces: list[frozenset[int]] = []
    for line in labels.line_polylines:
        faces = faces_for_polyline(mesh, line)
        if not faces:
            raise LabelError("polyline selects no mesh faces", polyline=line[:2].tolist())
        line_faces.append(frozenset(faces))

    if with_stripes and object_faces:
        stripe_h, stripe_v = compute_stripes(mesh, object_faces)
    else:
        stripe_h, stripe_v = frozenset(), frozenset()

    all_faces = frozenset(range(mesh.n_faces))
    lines_union: set[int] = set()
    for g in line_faces:
        lines_union |= g
    if stripe_h or stripe_v:
        background = all_faces - (stripe_h | stripe_v | lines_union)
    else:
        background = all_faces - claimed - lines_union

    return RegionModel(
        n_faces=mesh.n_faces,
        object_faces=tuple(object_faces),
        line_faces=tuple(line_faces),
        stripe_h=stripe_h,
        stripe_v=stripe_v,
        background=frozenset(background),
        object_bounds=tuple(bounds),
    )


def object_span(regions: RegionModel) -> tuple[float, float]:
    """(total width W, total height H) of the objects, overlaps merged."""
    w = merged_interval_length([(b[0], b[1]) for b in regions.object_bounds])
    h = merged_interval_length([(b[2], b[3]) for b in regions.object_bounds])
    return w, h


def write_mesh_obj(path, mesh: Mesh, warped: np.ndarray | None = None) -> None:
    """OBJ-style dump: the source mesh and, when given, the warped copy."""
    lines = ["o source"]
    for x, y in mesh.vertices:
        lines.append(f"v {x:.9g} {y:.9g} 0")
    for i, j, k in mesh.faces:
        lines.append(f"f {i + 1} {j + 1} {k + 1}")
    if warped is not None:
        base = mesh.n_vertices
        lines.append("o warped")
        for x, y in warped:
            lines.append(f"v {x:.9g} {y:.9g} 0")
        for i, j, k in mesh.faces:
            lines.append(f"f {base + i + 1} {base + j + 1} {base + k + 1}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
