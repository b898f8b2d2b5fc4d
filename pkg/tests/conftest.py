import json

import numpy as np
import pytest

from qcretarget import LabelSet, RasterImage, build_regular_mesh
from qcretarget.geometry import Mesh


def jittered_mesh(rng, width=None, height=None, target=None):
    """Valid non-regular triangulation: regular grid with interior jitter."""
    width = width if width is not None else float(rng.uniform(8, 50))
    height = height if height is not None else float(rng.uniform(8, 50))
    target = target if target is not None else int(rng.integers(30, 150))
    mesh = build_regular_mesh(width, height, target)
    interior = mesh.interior_vertices()
    cell = min(width / mesh.grid[0], height / mesh.grid[1])
    verts = mesh.vertices.copy()
    verts[interior] += rng.uniform(-0.3, 0.3, size=(len(interior), 2)) * cell
    return Mesh(
        vertices=verts,
        faces=mesh.faces,
        boundary_tags=mesh.boundary_tags,
        width=width,
        height=height,
        grid=mesh.grid,
    )


def gradient_image(width, height, channels=3):
    """Smooth gradient plus vertical stripes; deterministic."""
    x = np.linspace(0, 255, width)[None, :].repeat(height, 0)
    y = np.linspace(0, 255, height)[:, None].repeat(width, 1)
    stripes = ((np.arange(width)[None, :] // 20) % 2).repeat(height, 0).reshape(
        height, width
    ) * 255.0
    stack = [x, y, stripes][:channels]
    return RasterImage(np.stack(stack, axis=-1).astype(np.uint8))


def noise_image(rng, width, height, channels=3):
    return RasterImage(
        rng.integers(0, 256, size=(height, width, channels)).astype(np.uint8)
    )


def scenario_labels(width, height, with_line=True):
    """One centered rectangular object (about 30% each way) and optionally a
    horizontal line below it, in image coordinates."""
    x0, x1 = 0.35 * width, 0.65 * width
    y0, y1 = 0.35 * height, 0.65 * height
    doc = {"objects": [{"polygon": [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]}], "lines": []}
    if with_line:
        ly = 0.83 * height
        doc["lines"].append({"polyline": [[0.04 * width, ly], [0.96 * width, ly]]})
    return LabelSet.from_dict(doc)


@pytest.fixture
def rng():
    return np.random.default_rng(20260811)


@pytest.fixture
def small_image(rng):
    return noise_image(rng, 96, 72)


@pytest.fixture
def label_file(tmp_path):
    def write(doc, name="labels.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)

    return write
