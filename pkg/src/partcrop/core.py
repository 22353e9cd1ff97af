"""Dense numeric kernels used throughout the toolkit.

Pure functions on numpy arrays, all in float64. Probability vectors are
plain 1-D arrays validated at the call sites that require them.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, InvalidInputError

# Floor applied to probabilities inside log(); softmax never emits exact
# zeros at f64 but the clamp makes the contract explicit.
PROB_EPS = 1e-12

PROB_SUM_TOL = 1e-6


def softmax(v: np.ndarray) -> np.ndarray:
    """Max-shifted softmax: e^{v_j - max v} / sum_k e^{v_k - max v}."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise InvalidInputError("softmax input must be non-empty")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("softmax input must be finite")
    e = np.exp(v - np.max(v))
    return e / np.sum(e)


def validate_prob_vector(p: np.ndarray, name: str = "probability vector") -> np.ndarray:
    """Check non-negativity and unit sum (within 1e-6); returns the array."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise InvalidInputError(f"{name} must be a non-empty 1-D vector")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise InvalidInputError(f"{name} must be finite and non-negative")
    if abs(float(np.sum(p)) - 1.0) > PROB_SUM_TOL:
        raise InvalidInputError(f"{name} must sum to 1 (got {float(np.sum(p))})")
    return p


def kl_energy(v: np.ndarray, b: np.ndarray) -> float:
    """Response energy KL(b || v) = sum_j b_j * ln(b_j / v_j).

    `b` is the benchmark distribution, `v` the observed similarity
    distribution. `v` entries are clamped below at PROB_EPS before the log;
    zero entries of `b` contribute nothing (0 * ln 0 == 0 by convention).
    """
    v = np.asarray(v, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if v.shape != b.shape:
        raise InvalidInputError(f"length mismatch: v has {v.shape}, b has {b.shape}")
    vc = np.maximum(v, PROB_EPS)
    pos = b > 0
    return float(np.sum(b[pos] * np.log(b[pos] / vc[pos])))


def query_similarities(chi: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Similarity vector chi @ p for a flattened N x D feature map and D query."""
    chi = np.asarray(chi, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if chi.ndim != 2 or p.ndim != 1 or chi.shape[1] != p.shape[0]:
        raise InvalidInputError(
            f"dimension mismatch: map is {chi.shape}, query is {p.shape}"
        )
    return chi @ p


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """cos(a, b) = <a, b> / (|a| |b|), clipped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidInputError(f"length mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine similarity undefined for zero-norm vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def avgpool_spatial(feature_map: np.ndarray) -> np.ndarray:
    """Per-channel mean over the spatial positions of an (H, W, D) map."""
    m = np.asarray(feature_map, dtype=np.float64)
    if m.ndim != 3 or m.shape[0] < 1 or m.shape[1] < 1:
        raise InvalidInputError(f"expected (H, W, D) map, got shape {m.shape}")
    return m.reshape(-1, m.shape[2]).mean(axis=0)


def sort_desc(v: np.ndarray) -> np.ndarray:
    """Non-increasing sort, stable for ties (equal keys keep input order)."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("sort_desc input must be finite")
    return v[np.argsort(-v, kind="stable")]


def _resize_indices(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Half-pixel-center source coordinates for one axis, edge-clamped."""
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    lo = np.clip(np.floor(src), 0, n_in - 1).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = np.clip(src - lo, 0.0, 1.0)
    return lo, hi, frac


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers and edge clamping.

    Accepts (H, W, C) or a batch (B, H, W, C); resizing to the identical size
    reproduces the input bit-for-bit.
    """
    img = np.asarray(img, dtype=np.float64)
    batched = img.ndim == 4
    if not batched:
        if img.ndim != 3:
            raise InvalidInputError(f"expected (H, W, C) image, got shape {img.shape}")
        img = img[None]
    if out_h < 1 or out_w < 1 or img.shape[1] < 1 or img.shape[2] < 1:
        raise InvalidInputError("image and target dimensions must be >= 1")

    y0, y1, fy = _resize_indices(img.shape[1], out_h)
    x0, x1, fx = _resize_indices(img.shape[2], out_w)
    ay0, ay1 = y0[:, None], y1[:, None]
    ax0, ax1 = x0[None, :], x1[None, :]
    fy = fy[None, :, None, None]
    fx = fx[None, None, :, None]

    top = img[:, ay0, ax0] * (1.0 - fx) + img[:, ay0, ax1] * fx
    bot = img[:, ay1, ax0] * (1.0 - fx) + img[:, ay1, ax1] * fx
    out = top * (1.0 - fy) + bot * fy
    return out if batched else out[0]


def l2_normalize_rows(m: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Row-wise L2 normalization with a zero-norm guard."""
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=-1, keepdims=True)
    return m / np.maximum(norms, eps)
