"""Seeded random part-candidate cropping.

Crops are sampled by area fraction and log-uniform aspect ratio. Sampling is
attempt-major and vectorized: each round draws one (fraction, aspect, x, y)
candidate per still-unplaced crop, and after MAX_ATTEMPTS rounds any
remaining crop falls back to the largest centered square satisfying the
upper area bound. Per-image streams are derived by hashing (seed, image
identifier), so images can be processed concurrently with reproducible
results.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .images import as_image, image_key
from .rng import Stream

MAX_ATTEMPTS = 10


@dataclass(frozen=True)
class PartCropConfig:
    """Crop sampler settings: count, area-fraction range, aspect range, output size."""

    m: int = 128
    scale: tuple[float, float] = (0.08, 0.2)
    aspect: tuple[float, float] = (3.0 / 4.0, 4.0 / 3.0)
    patch_size: tuple[int, int] = (16, 16)
    seed: int = 0

    def __post_init__(self):
        s_lo, s_hi = self.scale
        a_lo, a_hi = self.aspect
        if not (0 < s_lo <= s_hi <= 1):
            raise InvalidInputError(f"scale range must satisfy 0 < lo <= hi <= 1, got {self.scale}")
        if not (0 < a_lo <= a_hi):
            raise InvalidInputError(f"aspect range must satisfy 0 < lo <= hi, got {self.aspect}")
        if self.m < 1:
            raise InvalidInputError("crop count must be >= 1")
        if self.patch_size[0] < 1 or self.patch_size[1] < 1:
            raise InvalidInputError("patch size must be >= 1x1")


@dataclass(frozen=True)
class CropBox:
    """Pixel-space crop rectangle, top-left anchored."""

    x: int
    y: int
    w: int
    h: int

    def validate_inside(self, image_w: int, image_h: int) -> None:
        if self.w < 1 or self.h < 1 or self.x < 0 or self.y < 0:
            raise InvalidInputError(f"degenerate crop box {self}")
        if self.x + self.w > image_w or self.y + self.h > image_h:
            raise InvalidInputError(f"crop box {self} exceeds {image_w}x{image_h} image")


def crop_area_fraction(box: CropBox, image_w: int, image_h: int) -> float:
    """Fraction of the image area the box covers."""
    box.validate_inside(image_w, image_h)
    return (box.w * box.h) / (image_w * image_h)


def sample_boxes(image_w: int, image_h: int, cfg: PartCropConfig, stream: Stream) -> list[CropBox]:
    """cfg.m crop boxes for an image_w x image_h image, attempt-major."""
    area = image_w * image_h
    log_a_lo, log_a_hi = math.log(cfg.aspect[0]), math.log(cfg.aspect[1])

    boxes: list[CropBox | None] = [None] * cfg.m
    pending = np.arange(cfg.m)
    for _ in range(MAX_ATTEMPTS):
        if pending.size == 0:
            break
        k = pending.size
        frac = stream.uniform_range(cfg.scale[0], cfg.scale[1], k)
        aspect = np.exp(stream.uniform_range(log_a_lo, log_a_hi, k))
        ux = stream.uniform(k)
        uy = stream.uniform(k)
        target = frac * area
        ws = np.maximum(1, np.round(np.sqrt(target * aspect))).astype(np.int64)
        hs = np.maximum(1, np.round(np.sqrt(target / aspect))).astype(np.int64)
        ok = (ws <= image_w) & (hs <= image_h)
        for j in np.nonzero(ok)[0]:
            w, h = int(ws[j]), int(hs[j])
            x = int(ux[j] * (image_w - w + 1))
            y = int(uy[j] * (image_h - h + 1))
            boxes[pending[j]] = CropBox(x=x, y=y, w=w, h=h)
        pending = pending[~ok]

    # Fallback: largest centered square satisfying the upper area bound.
    if pending.size:
        side = max(1, min(image_w, image_h, int(math.sqrt(cfg.scale[1] * area))))
        fallback = CropBox(x=(image_w - side) // 2, y=(image_h - side) // 2, w=side, h=side)
        for i in pending:
            boxes[i] = fallback
    return boxes


def crop_resize_batch(image: np.ndarray, boxes: list[CropBox], out_h: int, out_w: int) -> np.ndarray:
    """Crop every box and bilinear-resize to (out_h, out_w) in one pass.

    Exactly equivalent to slicing each box and calling bilinear_resize on it
    (same half-pixel-center convention, same arithmetic order).
    """
    img = np.asarray(image, dtype=np.float64)
    m = len(boxes)
    ph, pw = out_h, out_w

    def axis_indices(sizes: np.ndarray, offsets: np.ndarray, n_out: int):
        # Vectorized twin of core._resize_indices, same arithmetic per element.
        last = (sizes.astype(np.int64) - 1)[:, None]
        src = (np.arange(n_out, dtype=np.float64) + 0.5)[None, :] * (sizes / n_out)[:, None] - 0.5
        lo = np.clip(np.floor(src), 0, last).astype(np.int64)
        hi = np.minimum(lo + 1, last)
        frac = np.clip(src - lo, 0.0, 1.0)
        return lo + offsets[:, None], hi + offsets[:, None], frac

    hs = np.array([b.h for b in boxes], dtype=np.float64)
    ws = np.array([b.w for b in boxes], dtype=np.float64)
    ys = np.array([b.y for b in boxes], dtype=np.int64)
    xs = np.array([b.x for b in boxes], dtype=np.int64)
    y0, y1, fy = axis_indices(hs, ys, ph)
    x0, x1, fx = axis_indices(ws, xs, pw)

    ay0 = y0[:, :, None]
    ay1 = y1[:, :, None]
    ax0 = x0[:, None, :]
    ax1 = x1[:, None, :]
    fyb = fy[:, :, None, None]
    fxb = fx[:, None, :, None]
    top = img[ay0, ax0] * (1.0 - fxb) + img[ay0, ax1] * fxb
    bot = img[ay1, ax0] * (1.0 - fxb) + img[ay1, ax1] * fxb
    return top * (1.0 - fyb) + bot * fyb


def sample_crops(
    image: np.ndarray, cfg: PartCropConfig, image_id: str | None = None
) -> list[tuple[CropBox, np.ndarray]]:
    """Sample cfg.m crops and resize each to cfg.patch_size.

    Deterministic for a fixed (image, cfg, seed); the stream key includes the
    image identifier (content key when not given) so per-image crop sequences
    are independent.
    """
    img = as_image(image)
    img_h, img_w = img.shape[0], img.shape[1]
    if img_h < 2 or img_w < 2:
        raise InvalidInputError(f"image must be at least 2x2, got {img_h}x{img_w}")
    key = image_id if image_id is not None else image_key(img)
    stream = Stream(cfg.seed, "crops", key)

    boxes = sample_boxes(img_w, img_h, cfg, stream)
    for b in boxes:
        b.validate_inside(img_w, img_h)
    patches = crop_resize_batch(img.astype(np.float64), boxes, *cfg.patch_size)
    return [(b, patches[i].astype(np.float32)) for i, b in enumerate(boxes)]


def dump_boxes_csv(boxes: list[CropBox], path: str | Path) -> None:
    """Write crop boxes as x,y,w,h rows for debugging."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "w", "h"])
        for b in boxes:
            writer.writerow([b.x, b.y, b.w, b.h])
