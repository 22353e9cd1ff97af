"""Serve a synthetic encoder over the wire protocol.

Meant for integration testing the remote client path without a real model
service: requests hit a SyntheticEncoder, responses follow the protocol in
`wire`. The handler distinguishes malformed bodies (400) from shape
violations (422) exactly as a production service must.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from . import wire
from .encoders import SyntheticEncoder
from .errors import ProtocolError


class _EncoderRequestHandler(BaseHTTPRequestHandler):
    encoder: SyntheticEncoder = None
    service_name = "partcrop-synthetic"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        try:
            body = json.loads(raw.decode("utf-8")) if raw.strip() else {}
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"body is not valid JSON: {exc}") from exc
        if not isinstance(body, dict):
            raise ProtocolError("body must be a JSON object")
        return body

    def do_POST(self):
        enc = self.encoder
        try:
            body = self._read_body()
            if self.path == wire.INFO_PATH:
                self._send(
                    200,
                    {
                        "feature_dim": enc.feature_dim,
                        "map_h": enc.map_h,
                        "map_w": enc.map_w,
                        "name": self.service_name,
                    },
                )
                return
            if self.path == wire.ENCODE_MAP_PATH:
                wire.require_fields(body, {"h": int, "w": int, "c": int, "pixels": str})
                h, w, c = body["h"], body["w"], body["c"]
                if h < 1 or w < 1 or c < 1:
                    self._send(422, {"error": f"invalid image shape ({h}, {w}, {c})"})
                    return
                pixels = wire.decode_f32(body["pixels"], h * w * c)
                fmap = enc.encode_map(pixels.reshape(h, w, c))
                self._send(
                    200,
                    {
                        "map_h": fmap.h,
                        "map_w": fmap.w,
                        "dim": fmap.dim,
                        "values": wire.encode_f32(fmap.positions()),
                    },
                )
                return
            if self.path == wire.ENCODE_PATCH_BATCH_PATH:
                wire.require_fields(
                    body, {"count": int, "h": int, "w": int, "c": int, "pixels": str}
                )
                n, h, w, c = body["count"], body["h"], body["w"], body["c"]
                if n < 0 or h < 1 or w < 1 or c < 1:
                    self._send(422, {"error": f"invalid batch shape ({n}, {h}, {w}, {c})"})
                    return
                pixels = wire.decode_f32(body["pixels"], n * h * w * c)
                vectors = enc.encode_patch_batch(list(pixels.reshape(n, h, w, c)))
                self._send(
                    200,
                    {
                        "count": int(vectors.shape[0]),
                        "dim": enc.feature_dim,
                        "values": wire.encode_f32(np.asarray(vectors)),
                    },
                )
                return
            self._send(404, {"error": f"unknown endpoint {self.path}"})
        except ProtocolError as exc:
            self._send(400, {"error": str(exc)})
        except Exception as exc:  # defensive: never kill the server thread
            self._send(500, {"error": f"internal error: {exc}"})


class SyntheticEncoderServer:
    """Threaded loopback server wrapping one SyntheticEncoder."""

    def __init__(self, encoder: SyntheticEncoder, host: str = "127.0.0.1", port: int = 0):
        handler = type(
            "BoundHandler", (_EncoderRequestHandler,), {"encoder": encoder}
        )
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "SyntheticEncoderServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "SyntheticEncoderServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def serve_forever(self) -> None:
        self._httpd.serve_forever()
