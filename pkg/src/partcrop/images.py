"""Image representation and disk I/O.

An image is a float32 (H, W, C) array with values in [0, 1]. Images written
to disk are 8-bit PNGs; loading divides by 255, so a save/load round trip is
bit-exact for any image whose values lie on the u8 grid. Content keys hash
the little-endian float32 bytes plus the shape header, which makes them
identical whether an image arrived from disk, from a generator, or over the
wire.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidInputError


def as_image(arr: np.ndarray) -> np.ndarray:
    """Validate and convert to the canonical float32 (H, W, C) layout."""
    a = np.asarray(arr, dtype=np.float32)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3 or a.shape[0] < 1 or a.shape[1] < 1 or a.shape[2] < 1:
        raise InvalidInputError(f"expected (H, W, C) image, got shape {arr.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("image contains non-finite values")
    return np.ascontiguousarray(a)


def quantize_u8(arr: np.ndarray) -> np.ndarray:
    """Snap a float image onto the 8-bit grid (round(255 x) / 255)."""
    a = np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0)
    return (np.round(a * 255.0) / 255.0).astype(np.float32)


def image_key(image: np.ndarray) -> str:
    """Content digest of an image: BLAKE2b over shape header + f32le pixels."""
    img = as_image(image)
    h = hashlib.blake2b(digest_size=16)
    h.update(np.array(img.shape, dtype="<u4").tobytes())
    h.update(img.astype("<f4").tobytes())
    return h.hexdigest()


def save_png(image: np.ndarray, path: str | Path) -> None:
    img = as_image(image)
    u8 = np.clip(np.round(img.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)
    if u8.shape[2] == 1:
        pil = Image.fromarray(u8[:, :, 0], mode="L")
    elif u8.shape[2] == 3:
        pil = Image.fromarray(u8, mode="RGB")
    else:
        raise InvalidInputError(f"cannot encode {u8.shape[2]}-channel image as PNG")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    pil.save(path, format="PNG")


def load_png(path: str | Path) -> np.ndarray:
    pil = Image.open(path)
    arr = np.asarray(pil)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return (arr.astype(np.float32) / 255.0).astype(np.float32)
