"""Cross-component checks: the browser studio's exported labels drive the CLI
and the service to byte-identical previews.

These run the built frontend bundle through node; they skip cleanly when the
bundle has not been built, so the primary suite stays self-contained.
"""

import base64
import json
import shutil
import subprocess
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from qcretarget.cli import main
from qcretarget.service import create_app
from tests.conftest import gradient_image

FRONTEND_DIST = Path(__file__).resolve().parents[1] / "frontend" / "dist" / "assets"

needs_bundle = pytest.mark.skipif(
    shutil.which("node") is None or not (FRONTEND_DIST / "state.js").is_file(),
    reason="frontend bundle not built",
)

EXPORT_SCRIPT = """
import {{ AnnotationState }} from "{module}";
const state = new AnnotationState();
state.setImage("test", {width}, {height});
state.tool = "object";
for (const p of [[30, 20], [70, 20], [70, 50], [30, 50]]) state.addDraftPoint(p);
if (!state.commitDraft().ok) throw new Error("polygon rejected");
state.tool = "line";
state.addDraftPoint([5, 60]);
state.addDraftPoint([91, 60]);
if (!state.commitDraft().ok) throw new Error("line rejected");
process.stdout.write(state.exportLabelSet());
"""


def studio_export(tmp_path: Path, width: int, height: int) -> Path:
    script = tmp_path / "export.mjs"
    module = (FRONTEND_DIST / "state.js").as_uri()
    script.write_text(EXPORT_SCRIPT.format(module=module, width=width, height=height))
    out = subprocess.run(
        ["node", str(script)], capture_output=True, text=True, check=True
    )
    path = tmp_path / "labels.json"
    path.write_text(out.stdout)
    return path


@needs_bundle
class TestStudioRoundTrip:
    def test_export_is_cli_compatible_and_previews_match(self, tmp_path):
        width, height = 96, 72
        image = gradient_image(width, height)
        labels_path = studio_export(tmp_path, width, height)
        doc = json.loads(labels_path.read_text())
        assert set(doc) == {"objects", "lines"}

        # studio preview through the HTTP service
        client = TestClient(create_app())
        uploaded = client.post("/api/images", content=image.to_png_bytes()).json()
        response = client.post(
            "/api/retarget",
            json={
                "image_id": uploaded["id"],
                "labels": doc,
                "ratio": 0.75,
                "choice": "weak",
                "mesh_vertices": 250,
            },
        )
        assert response.status_code == 200
        service_png = base64.b64decode(response.json()["png"])

        # same config through the CLI with the exported file
        src = tmp_path / "src.png"
        out = tmp_path / "out.png"
        image.to_file(src)
        code = main(
            [
                "--input", str(src), "--output", str(out),
                "--labels", str(labels_path),
                "--ratio", "0.75", "--choice", "weak", "--mesh-vertices", "250",
            ]
        )
        assert code == 0
        assert out.read_bytes() == service_png
