"""Pull-back resampling of a raster through a piecewise-affine warp.

Sampling runs target -> source (no holes): each target pixel center is
located in its containing warped face, mapped back through that face's exact
affine inverse, and bilinearly interpolated with edge clamping.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy.spatial import cKDTree

from .errors import CoverageError, FoldoverError, InputError
from .geometry import Mesh

#: fraction of target pixels allowed to miss every face before we call the
#: geometry broken (misses should only be float-eps slivers along edges)
MAX_UNCOVERED_FRACTION = 0.01


@dataclass(eq=False)
class RasterImage:
    """8-bit raster, shape (height, width, channels), channels in {1, 3, 4}."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3, 4):
            raise InputError("raster must be (h, w, c) with 1, 3 or 4 channels", shape=px.shape)
        if px.dtype != np.uint8:
            raise InputError("raster samples must be 8-bit", dtype=str(px.dtype))
        self.pixels = px

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @staticmethod
    def from_bytes(data: bytes) -> "RasterImage":
        try:
            with Image.open(io.BytesIO(data)) as img:
                img.load()
                return RasterImage._from_pil(img)
        except UnidentifiedImageError as exc:
            raise InputError("unsupported image format") from exc

    @staticmethod
    def from_file(path) -> "RasterImage":
        try:
            with Image.open(path) as img:
                img.load()
                return RasterImage._from_pil(img)
        except FileNotFoundError:
            raise InputError("input image not found", path=str(path))
        except UnidentifiedImageError as exc:
            raise InputError("unsupported image format", path=str(path)) from exc

    @staticmethod
    def _from_pil(img: Image.Image) -> "RasterImage":
        if img.mode in ("1", "P", "CMYK", "I", "F", "I;16"):
            img = img.convert("RGB")
        elif img.mode == "LA":
            img = img.convert("RGBA")
        arr = np.asarray(img)
        return RasterImage(arr.astype(np.uint8, copy=True))

    def _to_pil(self) -> Image.Image:
        if self.channels == 1:
            return Image.fromarray(self.pixels[:, :, 0], mode="L")
        mode = "RGB" if self.channels == 3 else "RGBA"
        return Image.fromarray(self.pixels, mode=mode)

    def to_file(self, path) -> None:
        self._to_pil().save(path)

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        self._to_pil().save(buf, format="PNG")
        return buf.getvalue()


@dataclass(eq=False)
class PiecewiseAffineMap:
    """Mesh + warped positions + the per-face affine inverses (target back to
    source), precomputed so lookup is a gather."""

    mesh: Mesh
    warped: np.ndarray
    inverse: np.ndarray  # (F, 2, 3): src = inverse[:, :, :2] @ tgt + inverse[:, :, 2]
    target_dims: tuple[float, float]


def build_inverse_map(mesh: Mesh, warp) -> PiecewiseAffineMap:
    warped = np.asarray(getattr(warp, "positions", warp), dtype=np.float64)
    target_dims = getattr(warp, "target_dims", None)
    if target_dims is None:
        target_dims = (float(warped[:, 0].max()), float(warped[:, 1].max()))
    src = mesh.vertices[mesh.faces]  # (F, 3, 2)
    tgt = warped[mesh.faces]
    e1 = tgt[:, 1] - tgt[:, 0]
    e2 = tgt[:, 2] - tgt[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    folded = np.flatnonzero(det <= 0)
    if len(folded):
        raise FoldoverError(
            "warped faces are flipped or collapsed; no affine inverse exists",
            faces=folded[:32].tolist(),
        )
    s1 = src[:, 1] - src[:, 0]
    s2 = src[:, 2] - src[:, 0]
    # G maps warped edges onto source edges: G = [s1 s2] @ [e1 e2]^-1
    inv00 = (s1[:, 0] * e2[:, 1] - s2[:, 0] * e1[:, 1]) / det
    inv01 = (s2[:, 0] * e1[:, 0] - s1[:, 0] * e2[:, 0]) / det
    inv10 = (s1[:, 1] * e2[:, 1] - s2[:, 1] * e1[:, 1]) / det
    inv11 = (s2[:, 1] * e1[:, 0] - s1[:, 1] * e2[:, 0]) / det
    off_x = src[:, 0, 0] - (inv00 * tgt[:, 0, 0] + inv01 * tgt[:, 0, 1])
    off_y = src[:, 0, 1] - (inv10 * tgt[:, 0, 0] + inv11 * tgt[:, 0, 1])
    inverse = np.stack(
        [
            np.stack([inv00, inv01, off_x], axis=1),
            np.stack([inv10, inv11, off_y], axis=1),
        ],
        axis=1,
    )
    return PiecewiseAffineMap(
        mesh=mesh, warped=warped, inverse=inverse, target_dims=(float(target_dims[0]), float(target_dims[1]))
    )


def map_points(pmap: PiecewiseAffineMap, faces: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Apply the per-face inverse affines to target points."""
    aff = pmap.inverse[faces]
    x = aff[:, 0, 0] * pts[:, 0] + aff[:, 0, 1] * pts[:, 1] + aff[:, 0, 2]
    y = aff[:, 1, 0] * pts[:, 0] + aff[:, 1, 1] * pts[:, 1] + aff[:, 1, 2]
    return np.column_stack([x, y])


def _locate_pixels(pmap: PiecewiseAffineMap, out_w: int, out_h: int) -> np.ndarray:
    """Per-pixel containing face (first face in order wins on shared edges);
    -1 where no face contains the pixel center."""
    n_t = pmap.target_dims[1]
    face_idx = np.full((out_h, out_w), -1, dtype=np.int64)
    tri = pmap.warped[pmap.mesh.faces]  # (F, 3, 2)
    for f in range(len(tri)):
        (ax, ay), (bx, by), (cx, cy) = tri[f]
        # pixel centers live at x = col + 0.5, y = n' - row - 0.5
        col_lo = max(0, int(np.floor(min(ax, bx, cx) - 0.5)))
        col_hi = min(out_w - 1, int(np.ceil(max(ax, bx, cx) - 0.5)))
        row_lo = max(0, int(np.floor(n_t - max(ay, by, cy) - 0.5)))
        row_hi = min(out_h - 1, int(np.ceil(n_t - min(ay, by, cy) - 0.5)))
        if col_lo > col_hi or row_lo > row_hi:
            continue
        cols = np.arange(col_lo, col_hi + 1)
        rows = np.arange(row_lo, row_hi + 1)
        px = cols[None, :] + 0.5
        py = n_t - rows[:, None] - 0.5
        d1 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        d2 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
        d3 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
        tol = 1e-9 * (np.abs(d1) + np.abs(d2) + np.abs(d3) + 1e-30)
        inside = (d1 >= -tol) & (d2 >= -tol) & (d3 >= -tol)
        block = face_idx[row_lo : row_hi + 1, col_lo : col_hi + 1]
        take = inside & (block < 0)
        block[take] = f
    return face_idx


def _bilinear(src: RasterImage, pts: np.ndarray) -> np.ndarray:
    """Sample source math-oriented points with clamped bilinear filtering."""
    w, h = src.width, src.height
    px = np.clip(pts[:, 0] - 0.5, 0.0, w - 1.0)
    py = np.clip(h - pts[:, 1] - 0.5, 0.0, h - 1.0)
    x0 = np.floor(px).astype(np.int64)
    y0 = np.floor(py).astype(np.int64)
    fx = px - x0
    fy = py - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    img = src.pixels.astype(np.float64)
    v00 = img[y0, x0]
    v01 = img[y0, x1]
    v10 = img[y1, x0]
    v11 = img[y1, x1]
    fx = fx[:, None]
    fy = fy[:, None]
    return (v00 * (1 - fx) + v01 * fx) * (1 - fy) + (v10 * (1 - fx) + v11 * fx) * fy


def resample(src: RasterImage, pmap: PiecewiseAffineMap, target_dims: tuple[int, int]) -> RasterImage:
    """Resample src through the warp onto a target raster of (width, height)."""
    out_w, out_h = int(target_dims[0]), int(target_dims[1])
    if out_w < 1 or out_h < 1:
        raise InputError("target raster dimensions must be positive", dims=target_dims)
    m_t, n_t = pmap.target_dims
    if abs(out_w - m_t) > 1.0 or abs(out_h - n_t) > 1.0:
        raise InputError(
            "target raster does not match the warp's rectangle",
            raster=(out_w, out_h),
            warp=(m_t, n_t),
        )
    face_idx = _locate_pixels(pmap, out_w, out_h)
    missing = face_idx < 0
    n_missing = int(missing.sum())
    if n_missing:
        frac = n_missing / face_idx.size
        if frac > MAX_UNCOVERED_FRACTION:
            raise CoverageError(
                "target pixels fall outside every warped face",
                uncovered=n_missing,
                fraction=frac,
            )
        # numerically uncovered edge slivers: extrapolate from the nearest face
        centroids = pmap.warped[pmap.mesh.faces].mean(axis=1)
        tree = cKDTree(centroids)
        rows, cols = np.nonzero(missing)
        pts = np.column_stack([cols + 0.5, pmap.target_dims[1] - rows - 0.5])
        _, nearest = tree.query(pts)
        face_idx[rows, cols] = nearest

    rows, cols = np.indices((out_h, out_w))
    pts = np.column_stack([cols.ravel() + 0.5, n_t - rows.ravel() - 0.5])
    source_pts = map_points(pmap, face_idx.ravel(), pts)
    values = _bilinear(src, source_pts)
    out = np.rint(values).astype(np.uint8).reshape(out_h, out_w, src.channels)
    return RasterImage(out)
