"""Black-box encoder interface with synthetic and remote backends.

Every backend maps an image to a spatial feature map (H, W, D) and a batch
of equal-sized patches to pooled D-vectors. The synthetic backend is a fully
deterministic stand-in for a trained encoder whose responses on registered
(member) images are sharper than on everything else; the remote backend
speaks the HTTP wire protocol to an external encoder service.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from dataclasses import dataclass, field

import numpy as np

from . import wire
from .core import avgpool_spatial, bilinear_resize, l2_normalize_rows
from .errors import InvalidInputError, ProtocolError, ShapeMismatchError, TransportError
from .images import as_image, image_key
from .rng import Stream, batch_normal, derive_base

# Each map position summarizes its image window through a fixed 4x4 resample.
WINDOW_GRID = 4
# Bias appended to the mean-centered window descriptor; keeps constant
# windows from collapsing to the zero vector.
BIAS_WEIGHT = 0.05
# Relative amplitude of the direction noise at sharpness 1; the effective
# noise on an image is NOISE_SCALE / sharpness, so sharper (member) maps have
# cleaner per-position directions as well as larger norms.
NOISE_SCALE = 1.0


@dataclass(frozen=True)
class FeatureMap:
    """Spatial encoder output: (H, W, D) float64 grid of feature vectors."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 3 or min(d.shape) < 1:
            raise InvalidInputError(f"feature map must be (H, W, D), got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise InvalidInputError("feature map contains non-finite values")
        object.__setattr__(self, "data", d)

    @property
    def h(self) -> int:
        return self.data.shape[0]

    @property
    def w(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]

    def positions(self) -> np.ndarray:
        """Flatten to (N, D) with N = H * W, position-major."""
        return self.data.reshape(-1, self.data.shape[2])


@dataclass(frozen=True)
class SyntheticEncoderConfig:
    """Controls for the deterministic synthetic encoder.

    member_sharpness / nonmember_sharpness scale the feature norms and
    (inversely) the per-position direction noise, so registered images
    produce steeper similarity responses. With the two sharpness values
    equal, members and non-members are statistically indistinguishable.
    """

    seed: int
    member_sharpness: float = 8.0
    nonmember_sharpness: float = 2.0
    member_registry: frozenset[str] = field(default_factory=frozenset)
    proj_scale: float = 1.0

    def __post_init__(self):
        if not (self.member_sharpness >= self.nonmember_sharpness > 0):
            raise InvalidInputError(
                "need member_sharpness >= nonmember_sharpness > 0, got "
                f"{self.member_sharpness} / {self.nonmember_sharpness}"
            )
        object.__setattr__(self, "member_registry", frozenset(self.member_registry))


@dataclass(frozen=True)
class EncoderBinding:
    """Declared encoder surface: backend kind plus the (H, W, D) map shape."""

    kind: str  # "synthetic" | "remote"
    feature_dim: int
    map_h: int
    map_w: int
    synthetic: SyntheticEncoderConfig | None = None
    url: str | None = None
    timeout_s: float = 10.0

    def __post_init__(self):
        if self.feature_dim < 1 or self.map_h < 1 or self.map_w < 1:
            raise InvalidInputError("feature_dim and map size must be >= 1")
        if self.kind == "synthetic":
            if self.synthetic is None:
                raise InvalidInputError("synthetic binding requires a synthetic config")
        elif self.kind == "remote":
            if not self.url:
                raise InvalidInputError("remote binding requires a url")
        else:
            raise InvalidInputError(f"unknown encoder kind {self.kind!r}")


class SyntheticEncoder:
    """Deterministic part-aware encoder stand-in.

    Per map position, a window of the input image is resampled to a 4x4
    luminance grid, projected through a fixed seed-keyed random matrix, and
    L2-normalized into a unit direction. A content-keyed noise direction of
    amplitude NOISE_SCALE / sharpness is mixed in before renormalizing, and
    the result is scaled by the sharpness. Registered images get
    member_sharpness, everything else nonmember_sharpness, so member maps are
    both larger in norm (sharper softmax responses) and cleaner in direction
    (steeper cosine curves).
    """

    def __init__(self, config: SyntheticEncoderConfig, feature_dim: int, map_h: int, map_w: int):
        self.config = config
        self.feature_dim = feature_dim
        self.map_h = map_h
        self.map_w = map_w
        desc_len = WINDOW_GRID * WINDOW_GRID + 1  # 4x4 grid + bias term
        proj = Stream(config.seed, "synthetic-projection").normal(desc_len * feature_dim)
        self._projection = proj.reshape(desc_len, feature_dim) * (
            config.proj_scale / np.sqrt(desc_len)
        )

    def _descriptors(self, images: np.ndarray) -> np.ndarray:
        """(B, h, w, c) -> (B, N, 17) local-contrast window descriptors.

        Each window's 4x4 luminance resample is mean-centered so the
        descriptor captures the local pattern rather than brightness; the
        small bias column keeps featureless windows well-defined.
        """
        gh, gw = WINDOW_GRID * self.map_h, WINDOW_GRID * self.map_w
        grid = bilinear_resize(images, gh, gw).mean(axis=3)  # luminance (B, gh, gw)
        b = grid.shape[0]
        d = (
            grid.reshape(b, self.map_h, WINDOW_GRID, self.map_w, WINDOW_GRID)
            .transpose(0, 1, 3, 2, 4)
            .reshape(b, self.map_h * self.map_w, WINDOW_GRID * WINDOW_GRID)
        )
        d = d - d.mean(axis=2, keepdims=True)
        bias = np.full((b, d.shape[1], 1), BIAS_WEIGHT)
        return np.concatenate([d, bias], axis=2)

    def _sharpness(self, key: str) -> float:
        if key in self.config.member_registry:
            return self.config.member_sharpness
        return self.config.nonmember_sharpness

    def _encode(self, images: np.ndarray, keys: list[str]) -> np.ndarray:
        base = l2_normalize_rows(self._descriptors(images) @ self._projection)
        b, n, d = base.shape
        bases = [derive_base(self.config.seed, "synthetic-noise", key) for key in keys]
        noise = batch_normal(np.array(bases, dtype=np.uint64), n * d).reshape(b, n, d)
        noise /= np.sqrt(d)
        taus = np.array([self._sharpness(key) for key in keys])[:, None, None]
        mixed = l2_normalize_rows(base + (NOISE_SCALE / taus) * noise)
        maps = taus * mixed
        return maps.reshape(-1, self.map_h, self.map_w, self.feature_dim)

    def encode_map(self, image: np.ndarray, image_id: str | None = None) -> FeatureMap:
        img = as_image(image)
        key = image_id if image_id is not None else image_key(img)
        return FeatureMap(self._encode(img[None].astype(np.float64), [key])[0])

    def encode_patch_batch(self, patches: list[np.ndarray] | np.ndarray) -> np.ndarray:
        """Pooled D-vectors for same-sized patches, batch order preserved."""
        if len(patches) == 0:
            return np.zeros((0, self.feature_dim))
        stack = np.stack([as_image(p) for p in patches]).astype(np.float64)
        keys = [image_key(p) for p in stack.astype(np.float32)]
        maps = self._encode(stack, keys)
        return maps.reshape(maps.shape[0], -1, self.feature_dim).mean(axis=1)


class RemoteEncoder:
    """HTTP client for the encoder wire protocol.

    Raises TransportError when the service is unreachable, ProtocolError when
    a response violates the message schema, and ShapeMismatchError when the
    returned shape contradicts the binding's declared (H, W, D).
    """

    def __init__(self, url: str, feature_dim: int, map_h: int, map_w: int, timeout_s: float = 10.0):
        self.url = url.rstrip("/")
        self.feature_dim = feature_dim
        self.map_h = map_h
        self.map_w = map_w
        self.timeout_s = timeout_s

    def _post(self, path: str, body: dict) -> dict:
        req = urllib.request.Request(
            self.url + path,
            data=json.dumps(body).encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                raw = resp.read()
        except urllib.error.HTTPError as exc:
            detail = ""
            try:
                detail = json.loads(exc.read().decode("utf-8")).get("error", "")
            except Exception:
                pass
            raise ProtocolError(f"HTTP {exc.code} from {path}: {detail}") from exc
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            raise TransportError(f"cannot reach encoder service at {self.url}: {exc}") from exc
        try:
            return json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"non-JSON response from {path}") from exc

    def info(self) -> dict:
        body = self._post(wire.INFO_PATH, {})
        wire.require_fields(body, {"feature_dim": int, "map_h": int, "map_w": int, "name": str})
        return body

    def encode_map(self, image: np.ndarray, image_id: str | None = None) -> FeatureMap:
        img = as_image(image)
        body = self._post(wire.ENCODE_MAP_PATH, wire.image_request(img))
        wire.require_fields(body, {"map_h": int, "map_w": int, "dim": int, "values": str})
        shape = (body["map_h"], body["map_w"], body["dim"])
        if shape != (self.map_h, self.map_w, self.feature_dim):
            raise ShapeMismatchError(
                f"service returned map shape {shape}, binding declares "
                f"({self.map_h}, {self.map_w}, {self.feature_dim})"
            )
        values = wire.decode_f32(body["values"], self.map_h * self.map_w * self.feature_dim)
        return FeatureMap(values.reshape(self.map_h, self.map_w, self.feature_dim).astype(np.float64))

    def encode_patch_batch(self, patches: list[np.ndarray] | np.ndarray) -> np.ndarray:
        if len(patches) == 0:
            return np.zeros((0, self.feature_dim))
        stack = np.stack([as_image(p) for p in patches])
        body = self._post(wire.ENCODE_PATCH_BATCH_PATH, wire.batch_request(stack))
        wire.require_fields(body, {"count": int, "dim": int, "values": str})
        if body["count"] != stack.shape[0] or body["dim"] != self.feature_dim:
            raise ShapeMismatchError(
                f"service returned count={body['count']} dim={body['dim']}, expected "
                f"count={stack.shape[0]} dim={self.feature_dim}"
            )
        values = wire.decode_f32(body["values"], stack.shape[0] * self.feature_dim)
        return values.reshape(stack.shape[0], self.feature_dim).astype(np.float64)


Encoder = SyntheticEncoder | RemoteEncoder


def build_encoder(binding: EncoderBinding) -> Encoder:
    """Instantiate the backend an EncoderBinding describes."""
    if binding.kind == "synthetic":
        return SyntheticEncoder(binding.synthetic, binding.feature_dim, binding.map_h, binding.map_w)
    return RemoteEncoder(binding.url, binding.feature_dim, binding.map_h, binding.map_w, binding.timeout_s)


def encode_map(binding_or_encoder, image: np.ndarray, image_id: str | None = None) -> FeatureMap:
    enc = binding_or_encoder
    if isinstance(enc, EncoderBinding):
        enc = build_encoder(enc)
    return enc.encode_map(image, image_id)


def encode_patch_batch(binding_or_encoder, patches) -> np.ndarray:
    enc = binding_or_encoder
    if isinstance(enc, EncoderBinding):
        enc = build_encoder(enc)
    return enc.encode_patch_batch(patches)


def synthetic_encode(
    cfg: SyntheticEncoderConfig,
    image: np.ndarray,
    image_id: str | None = None,
    feature_dim: int = 32,
    map_h: int = 4,
    map_w: int = 4,
) -> FeatureMap:
    """One-shot synthetic encoding without constructing a binding."""
    return SyntheticEncoder(cfg, feature_dim, map_h, map_w).encode_map(image, image_id)


def pooled_vector(encoder: Encoder, image: np.ndarray, image_id: str | None = None) -> np.ndarray:
    """encode_map followed by spatial average pooling."""
    return avgpool_spatial(encoder.encode_map(image, image_id).data)
