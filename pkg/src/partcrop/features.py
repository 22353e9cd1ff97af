"""Membership-feature generation for the part-crop attack and baselines.

Four feature kinds:

* partcrop   — sorted uniform/gaussian response energies of m part queries
               against the image's feature map, concatenated to length 2m
* encodermi  — ranked pairwise cosine similarities of n augmented views
* variance   — channel-wise population variance over augmented views
* supervised — the pooled feature vector itself

Feature files use the binary PCF1 format (see write_features); a CSV export
exists for inspection.
"""

from __future__ import annotations

import csv
import hashlib
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .core import PROB_EPS, avgpool_spatial, cosine_sim, softmax, sort_desc
from .cropper import PartCropConfig, sample_crops
from .encoders import Encoder
from .errors import InvalidInputError
from .images import as_image, image_key
from .rng import Stream

KIND_TAGS = {"partcrop": 1, "encodermi": 2, "variance": 3, "supervised": 4}
LABEL_TAGS = {"nonmember": 0, "member": 1, "unknown": 2}
_MAGIC = b"PCF1"


@dataclass(frozen=True)
class MembershipFeature:
    kind: str
    values: np.ndarray
    source_image: str
    label: str = "unknown"
    # u64 identity used in feature files and for canonical record ordering;
    # derived from source_image unless set explicitly (file round trips).
    id_hash: int | None = None

    def __post_init__(self):
        if self.kind not in KIND_TAGS:
            raise InvalidInputError(f"unknown feature kind {self.kind!r}")
        if self.label not in LABEL_TAGS:
            raise InvalidInputError(f"unknown label {self.label!r}")
        object.__setattr__(
            self, "values", np.ascontiguousarray(self.values, dtype=np.float64)
        )
        if self.id_hash is None:
            object.__setattr__(self, "id_hash", image_id_hash(self.source_image))


@dataclass(frozen=True)
class AugmentConfig:
    """Baseline view augmentation: random resized crop + horizontal flip.

    The victim's true training recipe is unknown under this threat model, so
    a standard recipe is used; views are resized back to the source image
    size before encoding.
    """

    n_views: int = 10
    scale: tuple[float, float] = (0.2, 1.0)
    aspect: tuple[float, float] = (3.0 / 4.0, 4.0 / 3.0)
    flip_p: float = 0.5
    seed: int = 0


@lru_cache(maxsize=4096)
def _gaussian_benchmark_cached(seed: int, query_index: int, n: int) -> np.ndarray:
    draws = Stream(seed, "gaussian-benchmark", query_index).normal(n)
    out = softmax(draws)
    out.setflags(write=False)
    return out


def gaussian_benchmark(seed: int, query_index: int, n: int) -> np.ndarray:
    """Benchmark distribution for query i: softmax of n seeded N(0,1) draws.

    The draw depends only on (seed, query_index, n), so the same benchmarks
    are reused across every image in an experiment.
    """
    if n < 1:
        raise InvalidInputError("benchmark length must be >= 1")
    return _gaussian_benchmark_cached(seed, query_index, n)


def uniform_benchmark(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def partcrop_features(
    encoder: Encoder,
    image: np.ndarray,
    cfg: PartCropConfig,
    image_id: str | None = None,
    benchmark_seed: int | None = None,
    label: str = "unknown",
) -> MembershipFeature:
    """Part-crop membership feature: sorted [E_uniform || E_gaussian], length 2m.

    Pipeline per query p_i: v_i = softmax(chi_flat @ p_i), then the KL energy
    of v_i against the uniform and the per-query gaussian benchmark. The two
    energy halves are sorted descending independently and concatenated.
    """
    img = as_image(image)
    key = image_id if image_id is not None else image_key(img)
    bench_seed = cfg.seed if benchmark_seed is None else benchmark_seed

    chi = encoder.encode_map(img).positions()
    n = chi.shape[0]
    patches = [patch for _, patch in sample_crops(img, cfg, image_id=key)]
    queries = encoder.encode_patch_batch(patches)

    # Column-vectorized form of per-query softmax + kl_energy (the scalar
    # path is the contract; equivalence is pinned by the oracle tests).
    sims = chi @ queries.T  # (N, m)
    shifted = sims - sims.max(axis=0, keepdims=True)
    expd = np.exp(shifted)
    v = expd / expd.sum(axis=0, keepdims=True)
    log_v = np.log(np.maximum(v, PROB_EPS))

    u = uniform_benchmark(n)
    e_uniform = (u[:, None] * (np.log(u)[:, None] - log_v)).sum(axis=0)
    g = np.stack([gaussian_benchmark(bench_seed, i, n) for i in range(cfg.m)], axis=1)
    e_gauss = (g * (np.log(g) - log_v)).sum(axis=0)

    values = np.concatenate([sort_desc(e_uniform), sort_desc(e_gauss)])
    return MembershipFeature("partcrop", values, key, label)


def _augmented_views(image: np.ndarray, aug: AugmentConfig, image_id: str) -> list[np.ndarray]:
    """Seeded random-resized-crop + flip views, resized to the source size."""
    img = as_image(image)
    h, w = img.shape[0], img.shape[1]
    crop_cfg = PartCropConfig(
        m=aug.n_views, scale=aug.scale, aspect=aug.aspect, patch_size=(h, w), seed=aug.seed
    )
    flip_stream = Stream(aug.seed, "view-flips", image_id)
    views = []
    for _, view in sample_crops(img, crop_cfg, image_id=image_id):
        if flip_stream.choice(aug.flip_p):
            view = view[:, ::-1]
        views.append(np.ascontiguousarray(view))
    return views


def encodermi_features(
    encoder: Encoder,
    image: np.ndarray,
    aug: AugmentConfig,
    image_id: str | None = None,
    label: str = "unknown",
) -> MembershipFeature:
    """Ranked pairwise cosine similarities among n augmented views (n(n-1)/2)."""
    if aug.n_views < 2:
        raise InvalidInputError("encodermi needs at least 2 views")
    img = as_image(image)
    key = image_id if image_id is not None else image_key(img)
    views = _augmented_views(img, aug, key)
    maps = encoder.encode_patch_batch(views)
    sims = [
        cosine_sim(maps[i], maps[j])
        for i in range(aug.n_views)
        for j in range(i + 1, aug.n_views)
    ]
    return MembershipFeature("encodermi", sort_desc(np.array(sims)), key, label)


def variance_features(
    encoder: Encoder,
    image: np.ndarray,
    aug: AugmentConfig,
    image_id: str | None = None,
    label: str = "unknown",
) -> MembershipFeature:
    """Channel-wise population variance of pooled features over augmented views."""
    if aug.n_views < 2:
        raise InvalidInputError("variance baseline needs at least 2 views")
    img = as_image(image)
    key = image_id if image_id is not None else image_key(img)
    views = _augmented_views(img, aug, key)
    vecs = encoder.encode_patch_batch(views)
    return MembershipFeature("variance", np.var(vecs, axis=0), key, label)


def supervised_features(
    encoder: Encoder,
    image: np.ndarray,
    image_id: str | None = None,
    label: str = "unknown",
) -> MembershipFeature:
    """Pooled feature vector of the whole image, used directly as attack input."""
    img = as_image(image)
    key = image_id if image_id is not None else image_key(img)
    vec = avgpool_spatial(encoder.encode_map(img).data)
    return MembershipFeature("supervised", vec, key, label)


def image_id_hash(image_id: str) -> int:
    """Stable u64 of an image identifier (BLAKE2b, little-endian)."""
    return int.from_bytes(hashlib.blake2b(image_id.encode("utf-8"), digest_size=8).digest(), "little")


def write_features(features: list[MembershipFeature], path: str | Path) -> None:
    """Binary PCF1 format, bit-exact.

    Layout: magic "PCF1"; u32 kind tag, u32 record count, u32 feature length;
    per record: u64 image-id hash, u8 label tag, feature values as f32le.
    """
    if not features:
        raise InvalidInputError("refusing to write an empty feature file")
    kinds = {f.kind for f in features}
    lengths = {f.values.shape[0] for f in features}
    if len(kinds) != 1 or len(lengths) != 1:
        raise InvalidInputError(f"mixed kinds {kinds} or lengths {lengths} in one file")
    kind = features[0].kind
    length = features[0].values.shape[0]

    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", KIND_TAGS[kind], len(features), length))
        for f in features:
            fh.write(struct.pack("<QB", f.id_hash, LABEL_TAGS[f.label]))
            fh.write(f.values.astype("<f4").tobytes())


def read_features(path: str | Path) -> list[MembershipFeature]:
    """Read a PCF1 file back into MembershipFeature records.

    Original image-id strings are not stored on disk, so loaded records carry
    a hex placeholder id and the verbatim u64 id hash.
    """
    tag_to_kind = {v: k for k, v in KIND_TAGS.items()}
    tag_to_label = {v: k for k, v in LABEL_TAGS.items()}
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise InvalidInputError(f"{path} is not a PCF1 feature file")
        kind_tag, count, length = struct.unpack("<III", fh.read(12))
        if kind_tag not in tag_to_kind:
            raise InvalidInputError(f"unknown kind tag {kind_tag}")
        records = []
        for _ in range(count):
            id_hash, label_tag = struct.unpack("<QB", fh.read(9))
            values = np.frombuffer(fh.read(4 * length), dtype="<f4").astype(np.float64)
            if values.shape[0] != length:
                raise InvalidInputError(f"truncated feature file {path}")
            records.append(
                MembershipFeature(
                    kind=tag_to_kind[kind_tag],
                    values=values,
                    source_image=f"{id_hash:016x}",
                    label=tag_to_label[label_tag],
                    id_hash=id_hash,
                )
            )
    return records


def export_features_csv(features: list[MembershipFeature], path: str | Path) -> None:
    """One row per record: image id, label, then the feature values."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        n = features[0].values.shape[0] if features else 0
        writer.writerow(["image_id", "label"] + [f"v{i}" for i in range(n)])
        for f in features:
            writer.writerow([f.source_image, f.label] + [repr(float(x)) for x in f.values])
