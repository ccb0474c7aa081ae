import base64
import io
import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from orientalign.meshio import TriMesh, normalize_mesh


def box_mesh(center, size):
    """Axis-aligned box as 8 vertices / 12 triangles."""
    cx, cy, cz = center
    sx, sy, sz = (s / 2.0 for s in size)
    verts = np.array([
        [cx - sx, cy - sy, cz - sz],
        [cx + sx, cy - sy, cz - sz],
        [cx + sx, cy + sy, cz - sz],
        [cx - sx, cy + sy, cz - sz],
        [cx - sx, cy - sy, cz + sz],
        [cx + sx, cy - sy, cz + sz],
        [cx + sx, cy + sy, cz + sz],
        [cx - sx, cy + sy, cz + sz],
    ])
    faces = np.array([
        [0, 2, 1], [0, 3, 2],  # bottom
        [4, 5, 6], [4, 6, 7],  # top
        [0, 1, 5], [0, 5, 4],  # -y
        [2, 3, 7], [2, 7, 6],  # +y
        [1, 2, 6], [1, 6, 5],  # +x
        [3, 0, 4], [3, 4, 7],  # -x
    ])
    return TriMesh(verts, faces)


def merge_meshes(meshes):
    verts = []
    faces = []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        offset += m.n_vertices
    return TriMesh(np.vstack(verts), np.vstack(faces))


def asymmetric_mesh(seed=0):
    """Procedural mesh with no rotational symmetry and distinct principal axes."""
    rng = np.random.default_rng(seed)
    j = lambda s: s * (1.0 + 0.15 * rng.uniform(-1, 1))
    body = box_mesh((0.0, 0.0, 0.0), (j(1.0), j(0.34), j(0.22)))
    fin = box_mesh((j(0.3), 0.0, j(0.22)), (j(0.16), j(0.09), j(0.3)))
    tab = box_mesh((j(-0.22), j(0.2), j(-0.03)), (j(0.22), j(0.12), j(0.1)))
    nose = box_mesh((j(0.52), j(-0.06), 0.0), (j(0.18), j(0.1), j(0.12)))
    return normalize_mesh(merge_meshes([body, fin, tab, nose]))


def unit_cube_mesh():
    return normalize_mesh(box_mesh((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)))


@pytest.fixture
def asym_mesh():
    return asymmetric_mesh(0)


def decode_png_b64(b64):
    from PIL import Image

    return np.asarray(Image.open(io.BytesIO(base64.b64decode(b64))).convert("RGB"))


def _images_from_chat_body(body):
    content = body["messages"][0]["content"]
    return [decode_png_b64(part["image_url"]["url"].split(",", 1)[1])
            for part in content if part.get("type") == "image_url"]


class MockVlmServer:
    """Local HTTP fixture speaking the chat-completion wire style.

    Either replays a scripted list of replies (one per request) or answers
    from a callback fn(images) -> text.
    """

    def __init__(self, replies=None, answer_fn=None):
        self.replies = list(replies or [])
        self.answer_fn = answer_fn
        self.request_count = 0
        self.bodies = []
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length))
                with outer._lock:
                    outer.request_count += 1
                    outer.bodies.append(body)
                    if outer.answer_fn is not None:
                        text = outer.answer_fn(_images_from_chat_body(body))
                    elif outer.replies:
                        text = outer.replies.pop(0)
                    else:
                        text = "NONE"
                if text == "__http_500__":
                    self.send_response(500)
                    self.end_headers()
                    return
                payload = json.dumps(
                    {"choices": [{"message": {"content": text}}]}).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self.server = HTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_port}/v1/chat/completions"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def mock_vlm():
    servers = []

    def factory(replies=None, answer_fn=None):
        srv = MockVlmServer(replies=replies, answer_fn=answer_fn)
        servers.append(srv)
        return srv

    yield factory
    for srv in servers:
        srv.close()


@pytest.fixture(autouse=True)
def vlm_api_key(monkeypatch):
    monkeypatch.setenv("VLM_API_KEY", "test-key-not-a-secret")
