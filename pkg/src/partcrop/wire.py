"""Encoder wire protocol: payload codecs and message validation.

Three endpoints, all POST, all JSON bodies:

    /v1/info               {} -> {"feature_dim", "map_h", "map_w", "name"}
    /v1/encode_map         {"h","w","c","pixels"} ->
                           {"map_h","map_w","dim","values"}
    /v1/encode_patch_batch {"count","h","w","c","pixels"} ->
                           {"count","dim","values"}

Pixel and feature payloads are base64 of little-endian float32. Image pixels
are row-major (H, W, C); feature values are position-major (row-major over
the H x W grid, channel-minor). Malformed bodies get HTTP 400 with
{"error": ...}; shape violations get 422.
"""

from __future__ import annotations

import base64
import binascii

import numpy as np

from .errors import ProtocolError

INFO_PATH = "/v1/info"
ENCODE_MAP_PATH = "/v1/encode_map"
ENCODE_PATCH_BATCH_PATH = "/v1/encode_patch_batch"


def encode_f32(arr: np.ndarray) -> str:
    """Array -> base64 of little-endian float32 bytes (C order)."""
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode("ascii")


def decode_f32(payload: str, expected_count: int) -> np.ndarray:
    """base64 f32le -> 1-D float32 array of exactly `expected_count` values."""
    if not isinstance(payload, str):
        raise ProtocolError("binary payload must be a base64 string")
    try:
        raw = base64.b64decode(payload, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ProtocolError(f"invalid base64 payload: {exc}") from exc
    if len(raw) != 4 * expected_count:
        raise ProtocolError(
            f"payload holds {len(raw) // 4} f32 values, expected {expected_count}"
        )
    return np.frombuffer(raw, dtype="<f4").copy()


def require_fields(body: dict, fields: dict[str, type]) -> None:
    """Validate presence and type of JSON fields; raises ProtocolError."""
    if not isinstance(body, dict):
        raise ProtocolError("request body must be a JSON object")
    for name, typ in fields.items():
        if name not in body:
            raise ProtocolError(f"missing field {name!r}")
        value = body[name]
        if typ is int and (not isinstance(value, int) or isinstance(value, bool)):
            raise ProtocolError(f"field {name!r} must be an integer")
        if typ is str and not isinstance(value, str):
            raise ProtocolError(f"field {name!r} must be a string")


def image_request(image: np.ndarray) -> dict:
    h, w, c = image.shape
    return {"h": int(h), "w": int(w), "c": int(c), "pixels": encode_f32(image)}


def batch_request(patches: np.ndarray) -> dict:
    n, h, w, c = patches.shape
    return {
        "count": int(n),
        "h": int(h),
        "w": int(w),
        "c": int(c),
        "pixels": encode_f32(patches),
    }
