"""Local HTTP facade so the labeling studio can iterate on previews.

Sessions are in-memory only (bounded LRU); every request runs its own solve,
so identical requests produce byte-identical previews.
"""

from __future__ import annotations

import argparse
import base64
import json
import threading
import uuid
from collections import OrderedDict
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import FileResponse, HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .errors import (
    ExtremalRequiredError,
    FoldoverError,
    InputError,
    RetargetError,
    SolverError,
)
from .geometry import LabelSet
from .pipeline import DEFAULT_MESH_VERTICES, retarget, suggest_beta
from .resample import RasterImage

MAX_UPLOAD_BYTES = 32 << 20
MAX_SESSIONS = 32

_PLACEHOLDER = """<!doctype html>
<html><head><title>qcretarget studio</title></head>
<body><h1>qcretarget service</h1>
<p>The labeling studio bundle is not built. Run <code>npm run build</code>
inside <code>frontend/</code> and restart, or talk to the API directly:
POST /api/images, POST /api/retarget.</p></body></html>
"""


class SessionStore:
    """Bounded LRU of uploaded rasters, safe under concurrent requests."""

    def __init__(self, max_items: int = MAX_SESSIONS):
        self._max = max_items
        self._items: OrderedDict[str, RasterImage] = OrderedDict()
        self._lock = threading.Lock()

    def put(self, image: RasterImage) -> str:
        key = uuid.uuid4().hex
        with self._lock:
            self._items[key] = image
            self._items.move_to_end(key)
            while len(self._items) > self._max:
                self._items.popitem(last=False)
        return key

    def get(self, key: str) -> RasterImage | None:
        with self._lock:
            image = self._items.get(key)
            if image is not None:
                self._items.move_to_end(key)
            return image

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


class RetargetRequestBody(BaseModel):
    image_id: str
    labels: dict | None = None
    ratio: float = Field(gt=0.0)
    choice: str = "even"
    chessboard: bool = False
    extremal: str = "auto"
    beta: float | None = None
    mesh_vertices: int = Field(default=DEFAULT_MESH_VERTICES, ge=4, le=20000)
    preview_scale: float = Field(default=1.0, gt=0.0, le=1.0)
    include_mesh: bool = False


def _mesh_payload(result) -> dict:
    """Vertex/face arrays in image coordinates (y down) for the UI overlay."""
    mesh = result.mesh
    n = mesh.height
    n_t = result.warp.target_dims[1]
    src = np.column_stack([mesh.vertices[:, 0], n - mesh.vertices[:, 1]])
    warped = np.column_stack(
        [result.warp.positions[:, 0], n_t - result.warp.positions[:, 1]]
    )
    return {
        "vertices_source": np.round(src, 4).tolist(),
        "vertices_warped": np.round(warped, 4).tolist(),
        "faces": mesh.faces.tolist(),
    }


def create_app(
    max_sessions: int = MAX_SESSIONS,
    max_upload_bytes: int = MAX_UPLOAD_BYTES,
    frontend_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="qcretarget studio service")
    store = SessionStore(max_sessions)
    app.state.sessions = store

    if frontend_dir is None:
        frontend_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    frontend_dir = Path(frontend_dir)
    assets = frontend_dir / "assets"
    if assets.is_dir():
        app.mount("/assets", StaticFiles(directory=str(assets)), name="assets")

    @app.get("/")
    def index():
        page = frontend_dir / "index.html"
        if page.is_file():
            return FileResponse(str(page))
        return HTMLResponse(_PLACEHOLDER)

    @app.post("/api/images")
    async def upload_image(request: Request):
        body = await request.body()
        if not body:
            raise HTTPException(status_code=400, detail="empty upload")
        if len(body) > max_upload_bytes:
            raise HTTPException(
                status_code=413,
                detail=f"upload exceeds the {max_upload_bytes} byte limit",
            )
        try:
            image = RasterImage.from_bytes(body)
        except InputError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        key = store.put(image)
        return {"id": key, "width": image.width, "height": image.height}

    @app.post("/api/retarget")
    def run(body: RetargetRequestBody):
        image = store.get(body.image_id)
        if image is None:
            raise HTTPException(status_code=404, detail="unknown image id")
        try:
            labels = LabelSet.from_dict(body.labels) if body.labels else None
            result = retarget(
                image,
                labels,
                ratio=body.ratio,
                choice=body.choice,
                chessboard=body.chessboard,
                mesh_vertices=body.mesh_vertices,
                extremal=body.extremal,
                beta=body.beta,
            )
        except ExtremalRequiredError as exc:
            detail = {"message": str(exc)}
            if "suggested_beta" in exc.context:
                detail["suggested_beta"] = exc.context["suggested_beta"]
            raise HTTPException(status_code=422, detail=detail)
        except FoldoverError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except InputError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except SolverError as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        except RetargetError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

        out = result.image
        if body.preview_scale < 1.0:
            pw = max(1, int(round(out.width * body.preview_scale)))
            ph = max(1, int(round(out.height * body.preview_scale)))
            pil = out._to_pil().resize((pw, ph))
            out = RasterImage(np.asarray(pil).astype(np.uint8, copy=True).reshape(ph, pw, -1))

        metrics = {
            "solve_ms": result.metrics["solve_ms"],
            "min_jacobian": result.metrics["min_jacobian"],
            "max_abs_mu": result.metrics["max_abs_mu"],
            "object_scale": result.metrics.get("object_scale"),
            "extremal": result.metrics.get("extremal", False),
            "residual": result.metrics["residual"],
        }
        payload = {
            "png": base64.b64encode(out.to_png_bytes()).decode("ascii"),
            "width": out.width,
            "height": out.height,
            "full_size": result.metrics["output_size"],
            "metrics": metrics,
        }
        if body.include_mesh:
            payload["mesh"] = _mesh_payload(result)
        return JSONResponse(
            payload,
            headers={"X-Retarget-Metrics": json.dumps(metrics, sort_keys=True)},
        )

    return app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qcretarget-service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--frontend", metavar="DIR", help="built UI bundle directory")
    args = parser.parse_args(argv)
    import uvicorn

    uvicorn.run(
        create_app(frontend_dir=args.frontend),
        host=args.host,
        port=args.port,
        log_level="info",
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
