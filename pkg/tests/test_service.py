import base64
import io
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from qcretarget import RasterImage
from qcretarget.errors import FoldoverError
from qcretarget.service import create_app
from tests.conftest import gradient_image, noise_image, scenario_labels


@pytest.fixture
def client():
    return TestClient(create_app())


def upload(client, image: RasterImage):
    response = client.post("/api/images", content=image.to_png_bytes())
    assert response.status_code == 200
    return response.json()


def decode_png(payload: str) -> np.ndarray:
    raw = base64.b64decode(payload)
    with Image.open(io.BytesIO(raw)) as img:
        img.load()
        return np.asarray(img)


class TestUpload:
    def test_valid_png_returns_id_and_dims(self, client, rng):
        img = noise_image(rng, 40, 30)
        doc = upload(client, img)
        assert set(doc) == {"id", "width", "height"}
        assert (doc["width"], doc["height"]) == (40, 30)

    def test_empty_body_rejected(self, client):
        assert client.post("/api/images", content=b"").status_code == 400

    def test_garbage_rejected(self, client):
        assert client.post("/api/images", content=b"garbage").status_code == 400

    def test_size_limit(self, rng):
        client = TestClient(create_app(max_upload_bytes=100))
        img = noise_image(rng, 40, 30)
        assert client.post("/api/images", content=img.to_png_bytes()).status_code == 413

    def test_distinct_ids(self, client, rng):
        img = noise_image(rng, 20, 20)
        assert upload(client, img)["id"] != upload(client, img)["id"]

    def test_lru_eviction(self, rng):
        client = TestClient(create_app(max_sessions=2))
        ids = [upload(client, noise_image(rng, 16, 16))["id"] for _ in range(3)]
        gone = client.post(
            "/api/retarget", json={"image_id": ids[0], "ratio": 0.9, "mesh_vertices": 60}
        )
        assert gone.status_code == 404
        kept = client.post(
            "/api/retarget", json={"image_id": ids[2], "ratio": 1.0, "mesh_vertices": 60}
        )
        assert kept.status_code == 200


class TestRetargetEndpoint:
    def test_identity_preview_matches_source(self, client, rng):
        img = noise_image(rng, 48, 36)
        doc = upload(client, img)
        r = client.post(
            "/api/retarget",
            json={"image_id": doc["id"], "ratio": 1.0, "mesh_vertices": 120},
        )
        assert r.status_code == 200
        assert np.array_equal(decode_png(r.json()["png"]), img.pixels)

    def test_weak_choice_scenario(self, client):
        img = gradient_image(120, 90)
        doc = upload(client, img)
        body = {
            "image_id": doc["id"],
            "labels": scenario_labels(120, 90).to_dict(),
            "ratio": 0.5,
            "choice": "weak",
            "mesh_vertices": 250,
        }
        r = client.post("/api/retarget", json=body)
        assert r.status_code == 200
        payload = r.json()
        assert (payload["width"], payload["height"]) == (60, 90)
        assert payload["metrics"]["min_jacobian"] > 0
        header = json.loads(r.headers["X-Retarget-Metrics"])
        assert header["min_jacobian"] > 0

    def test_extremal_auto_returns_200(self, client, rng):
        img = noise_image(rng, 100, 80)
        doc = upload(client, img)
        labels = {"objects": [{"polygon": [[10, 20], [90, 20], [90, 60], [10, 60]]}], "lines": []}
        r = client.post(
            "/api/retarget",
            json={"image_id": doc["id"], "labels": labels, "ratio": 0.25, "mesh_vertices": 250},
        )
        assert r.status_code == 200
        assert r.json()["metrics"]["extremal"] is True
        assert r.json()["metrics"]["min_jacobian"] > 0

    def test_extremal_off_gives_422_with_suggestion(self, client, rng):
        img = noise_image(rng, 100, 80)
        doc = upload(client, img)
        labels = {"objects": [{"polygon": [[10, 20], [90, 20], [90, 60], [10, 60]]}], "lines": []}
        r = client.post(
            "/api/retarget",
            json={
                "image_id": doc["id"],
                "labels": labels,
                "ratio": 0.25,
                "extremal": "off",
                "mesh_vertices": 250,
            },
        )
        assert r.status_code == 422
        assert "suggested_beta" in r.json()["detail"]

    def test_unknown_image_404(self, client):
        r = client.post("/api/retarget", json={"image_id": "missing", "ratio": 0.5})
        assert r.status_code == 404

    def test_bad_labels_400(self, client, rng):
        doc = upload(client, noise_image(rng, 40, 30))
        r = client.post(
            "/api/retarget",
            json={
                "image_id": doc["id"],
                "labels": {"objects": [{"polygon": [[1, 1], [2, 2]]}], "lines": []},
                "ratio": 0.8,
            },
        )
        assert r.status_code == 400

    def test_foldover_maps_to_409(self, client, rng, monkeypatch):
        doc = upload(client, noise_image(rng, 40, 30))

        def boom(*args, **kwargs):
            raise FoldoverError("solved warp folds over", faces=[1, 2])

        monkeypatch.setattr("qcretarget.service.retarget", boom)
        r = client.post("/api/retarget", json={"image_id": doc["id"], "ratio": 0.5})
        assert r.status_code == 409

    def test_repeat_requests_are_byte_identical(self, client):
        img = gradient_image(100, 75)
        doc = upload(client, img)
        body = {
            "image_id": doc["id"],
            "labels": scenario_labels(100, 75).to_dict(),
            "ratio": 0.75,
            "choice": "even",
            "mesh_vertices": 200,
        }
        first = client.post("/api/retarget", json=body)
        second = client.post("/api/retarget", json=body)
        assert first.json()["png"] == second.json()["png"]

    def test_mesh_overlay_on_request(self, client, rng):
        doc = upload(client, noise_image(rng, 60, 45))
        body = {"image_id": doc["id"], "ratio": 0.8, "mesh_vertices": 100, "include_mesh": True}
        r = client.post("/api/retarget", json=body)
        mesh = r.json()["mesh"]
        assert set(mesh) == {"vertices_source", "vertices_warped", "faces"}
        assert len(mesh["vertices_source"]) == len(mesh["vertices_warped"])
        assert all(len(f) == 3 for f in mesh["faces"])
        plain = client.post("/api/retarget", json={**body, "include_mesh": False})
        assert "mesh" not in plain.json()

    def test_preview_scale(self, client, rng):
        doc = upload(client, noise_image(rng, 80, 60))
        r = client.post(
            "/api/retarget",
            json={"image_id": doc["id"], "ratio": 1.0, "mesh_vertices": 100, "preview_scale": 0.5},
        )
        payload = r.json()
        assert (payload["width"], payload["height"]) == (40, 30)
        assert payload["full_size"] == [80, 60]


class TestIndex:
    def test_root_serves_html(self, client):
        r = client.get("/")
        assert r.status_code == 200
        assert "html" in r.headers["content-type"]
