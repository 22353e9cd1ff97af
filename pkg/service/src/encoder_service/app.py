"""HTTP layer implementing the encoder wire protocol.

Endpoints (all POST, JSON bodies; binary payloads are base64 of
little-endian float32):

    /v1/info               -> {"feature_dim", "map_h", "map_w", "name"}
    /v1/encode_map         {"h","w","c","pixels"} ->
                           {"map_h","map_w","dim","values"}  (position-major)
    /v1/encode_patch_batch {"count","h","w","c","pixels"} ->
                           {"count","dim","values"}

Malformed bodies answer 400 with {"error": ...}; shape violations 422.
"""

from __future__ import annotations

import base64
import binascii
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .config import ServiceConfig
from .model import ShapeViolation, SpatialEncoder


class MalformedBody(ValueError):
    """Request body violates the message schema (HTTP 400)."""


def _b64_f32(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode("ascii")


def _decode_pixels(payload, expected: int) -> np.ndarray:
    if not isinstance(payload, str):
        raise MalformedBody("'pixels' must be a base64 string")
    try:
        raw = base64.b64decode(payload, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise MalformedBody(f"invalid base64 payload: {exc}") from exc
    if len(raw) != 4 * expected:
        raise MalformedBody(f"payload holds {len(raw) // 4} f32 values, expected {expected}")
    return np.frombuffer(raw, dtype="<f4").copy()


def _require_ints(body: dict, *names: str) -> None:
    if not isinstance(body, dict):
        raise MalformedBody("request body must be a JSON object")
    for name in names:
        value = body.get(name)
        if not isinstance(value, int) or isinstance(value, bool):
            raise MalformedBody(f"field {name!r} must be an integer")


class _Handler(BaseHTTPRequestHandler):
    encoder: SpatialEncoder = None
    service_name: str = "encoder-service"
    quiet: bool = True

    def log_message(self, fmt, *args):
        if not self.quiet:
            super().log_message(fmt, *args)

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        try:
            body = json.loads(raw.decode("utf-8")) if raw.strip() else {}
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedBody(f"body is not valid JSON: {exc}") from exc
        if not isinstance(body, dict):
            raise MalformedBody("body must be a JSON object")
        return body

    def do_POST(self):
        enc = self.encoder
        cfg = enc.config
        try:
            body = self._body()
            if self.path == "/v1/info":
                self._send(200, {
                    "feature_dim": cfg.feature_dim,
                    "map_h": cfg.map_h,
                    "map_w": cfg.map_w,
                    "name": self.service_name,
                })
            elif self.path == "/v1/encode_map":
                _require_ints(body, "h", "w", "c")
                h, w, c = body["h"], body["w"], body["c"]
                if h < 1 or w < 1 or c < 1:
                    raise ShapeViolation(f"invalid image shape ({h}, {w}, {c})")
                pixels = _decode_pixels(body.get("pixels"), h * w * c)
                grid = enc.encode_map(pixels.reshape(h, w, c))
                self._send(200, {
                    "map_h": int(grid.shape[0]),
                    "map_w": int(grid.shape[1]),
                    "dim": int(grid.shape[2]),
                    "values": _b64_f32(grid.reshape(-1, grid.shape[2])),
                })
            elif self.path == "/v1/encode_patch_batch":
                _require_ints(body, "count", "h", "w", "c")
                n, h, w, c = body["count"], body["h"], body["w"], body["c"]
                if n < 0 or h < 1 or w < 1 or c < 1:
                    raise ShapeViolation(f"invalid batch shape ({n}, {h}, {w}, {c})")
                pixels = _decode_pixels(body.get("pixels"), n * h * w * c)
                vectors = enc.encode_patch_batch(pixels.reshape(n, h, w, c))
                self._send(200, {
                    "count": int(vectors.shape[0]),
                    "dim": int(vectors.shape[1]),
                    "values": _b64_f32(vectors),
                })
            else:
                self._send(404, {"error": f"unknown endpoint {self.path}"})
        except MalformedBody as exc:
            self._send(400, {"error": str(exc)})
        except ShapeViolation as exc:
            self._send(422, {"error": str(exc)})
        except Exception as exc:  # keep the worker thread alive
            self._send(500, {"error": f"internal error: {exc}"})


class EncoderService:
    """Threaded HTTP server around one SpatialEncoder."""

    def __init__(self, config: ServiceConfig, encoder: SpatialEncoder | None = None):
        self.config = config
        self.encoder = encoder if encoder is not None else SpatialEncoder(config)
        handler = type("BoundHandler", (_Handler,), {
            "encoder": self.encoder,
            "service_name": config.name,
        })
        self._httpd = ThreadingHTTPServer((config.host, config.port), handler)
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "EncoderService":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "EncoderService":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def serve_forever(self) -> None:
        self._httpd.serve_forever()
