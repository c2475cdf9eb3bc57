"""HTTP embedding service implementing the engine's /v1/embed contract.

POST /v1/embed with {"kind": "text"|"image", "items": [string]} returns
{"dimension": D, "embeddings": [[float], ...]}; malformed requests get a
4xx with an {"error": ...} body. Image items are keys resolved against an
optional image root directory. Each request is handled on its own thread;
the encoder is used read-only.
"""

from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from .encoders import DualEncoder


def _make_handler(encoder: DualEncoder, image_root: Optional[Path]):
    class EmbedHandler(BaseHTTPRequestHandler):
        def _reply(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):  # noqa: N802 (http.server naming)
            if self.path != "/v1/embed":
                self._reply(404, {"error": f"no such endpoint {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                request = json.loads(self.rfile.read(length))
                kind = request["kind"]
                items = request["items"]
                if kind not in ("text", "image"):
                    raise ValueError(f"kind must be 'text' or 'image', got {kind!r}")
                if not isinstance(items, list) or not all(isinstance(i, str) for i in items):
                    raise ValueError("items must be a list of strings")
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                self._reply(400, {"error": f"malformed request: {exc}"})
                return

            try:
                if kind == "text":
                    vectors = encoder.encode_text(items)
                    embeddings = [v.tolist() for v in vectors]
                else:
                    embeddings = []
                    for key in items:
                        path = (image_root / key) if image_root else Path(key)
                        if not path.is_file():
                            self._reply(400, {"error": f"image not found for key {key!r}"})
                            return
                        embeddings.append(encoder.encode_image(path).tolist())
            except Exception as exc:  # pragma: no cover - defensive
                self._reply(500, {"error": str(exc)})
                return
            self._reply(200, {"dimension": encoder.dimension, "embeddings": embeddings})

        def log_message(self, *args):
            pass

    return EmbedHandler


def make_server(
    encoder: DualEncoder, port: int = 0, image_root: Optional[str | Path] = None
) -> ThreadingHTTPServer:
    root = Path(image_root) if image_root else None
    return ThreadingHTTPServer(("0.0.0.0", port), _make_handler(encoder, root))


def serve(encoder: DualEncoder, port: int, image_root: Optional[str | Path] = None) -> None:
    """Run the service until interrupted."""
    server = make_server(encoder, port, image_root)
    try:
        server.serve_forever()
    finally:
        server.server_close()
