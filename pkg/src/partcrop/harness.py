"""Experiment harness: manifests, splits, metrics, attack runs, defense search.

A dataset manifest lists images with ground-truth membership; experiments
split it into known (attacker training) and unknown (evaluation) halves,
extract membership features through a black-box encoder, train the attacker
on the known half, and report confusion-matrix metrics on the unknown half.
The crop-scale-range defense is evaluated through a sharpness schedule on
the synthetic encoder and tuned with a two-stage coarse-to-fine search.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .attacker import (
    AttackerModel,
    TrainConfig,
    load_model,
    predict_batch,
    quantize_to_f32,
    save_model,
    train_attacker,
)
from .core import bilinear_resize, cosine_sim, sort_desc
from .cropper import CropBox, PartCropConfig
from .encoders import (
    Encoder,
    EncoderBinding,
    SyntheticEncoderConfig,
    build_encoder,
)
from .errors import InvalidInputError
from .features import (
    AugmentConfig,
    MembershipFeature,
    encodermi_features,
    export_features_csv,
    partcrop_features,
    supervised_features,
    variance_features,
    write_features,
)
from .images import as_image, image_key, load_png, quantize_u8, save_png
from .rng import Stream

ATTACK_KINDS = ("partcrop", "encodermi", "variance", "supervised")

# How the crop-scale defense maps onto the synthetic encoder: raising the
# lower bound shrinks the member sharpness toward the non-member sharpness,
# tau_m(lb) = tau_n + (tau_m0 - tau_n) * (1 - lb)^SCSR_SCHEDULE_EXPONENT.
SCSR_SCHEDULE_EXPONENT = 3.0


# ---------------------------------------------------------------------------
# Manifests and synthetic datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    membership: str  # "member" | "nonmember"
    path: str | None = None
    gen: dict | None = None

    def __post_init__(self):
        if self.membership not in ("member", "nonmember"):
            raise InvalidInputError(f"bad membership {self.membership!r}")
        if (self.path is None) == (self.gen is None):
            raise InvalidInputError(f"entry {self.id!r} needs exactly one of path/gen")


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    image_size: tuple[int, int, int]
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise InvalidInputError("manifest image ids must be unique")
        classes = {e.membership for e in self.entries}
        if classes != {"member", "nonmember"}:
            raise InvalidInputError("manifest needs both member and nonmember entries")
        object.__setattr__(self, "entries", tuple(self.entries))

    def by_id(self, image_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.id == image_id:
                return e
        raise KeyError(image_id)

    def ids(self, membership: str) -> list[str]:
        return [e.id for e in self.entries if e.membership == membership]


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    entries = []
    for e in manifest.entries:
        d = {"id": e.id, "membership": e.membership}
        if e.path is not None:
            d["path"] = e.path
        else:
            d["gen"] = e.gen
        entries.append(d)
    return {"name": manifest.name, "image_size": list(manifest.image_size), "entries": entries}


def manifest_from_dict(d: dict) -> DatasetManifest:
    entries = [
        ManifestEntry(
            id=e["id"],
            membership=e["membership"],
            path=e.get("path"),
            gen=e.get("gen"),
        )
        for e in d["entries"]
    ]
    return DatasetManifest(d["name"], tuple(d["image_size"]), tuple(entries))


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest_to_dict(manifest), indent=2) + "\n")


def load_manifest(path: str | Path) -> DatasetManifest:
    return manifest_from_dict(json.loads(Path(path).read_text()))


def manifest_hash(manifest: DatasetManifest) -> str:
    canon = json.dumps(manifest_to_dict(manifest), sort_keys=True, separators=(",", ":"))
    return hashlib.blake2b(canon.encode("utf-8"), digest_size=16).hexdigest()


def render_textured_image(seed: int, index: int, size: tuple[int, int, int]) -> np.ndarray:
    """Procedural image: gradient background, 1-3 textured shapes, noise.

    Values are snapped to the 8-bit grid so in-memory generation and a PNG
    round trip yield bit-identical pixels.
    """
    h, w, c = size
    stream = Stream(seed, "texture-image", index)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    yy /= max(h - 1, 1)
    xx /= max(w - 1, 1)

    col_a = stream.uniform(c)
    col_b = stream.uniform(c)
    angle = float(stream.uniform_range(0, 2 * np.pi, 1)[0])
    t = (np.cos(angle) * xx + np.sin(angle) * yy + 1.0) / 2.0
    img = t[:, :, None] * col_a + (1.0 - t)[:, :, None] * col_b

    n_shapes = int(stream.integers(1, 3, 1)[0])
    for _ in range(n_shapes):
        cy, cx = stream.uniform(2)
        ry, rx = 0.1 + 0.3 * stream.uniform(2)
        color = stream.uniform(c)
        kind = int(stream.integers(0, 1, 1)[0])
        if kind == 0:
            mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        else:
            mask = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
        alpha = float(stream.uniform_range(0.5, 1.0, 1)[0])
        img[mask] = (1.0 - alpha) * img[mask] + alpha * color

    sigma = float(stream.uniform_range(0.02, 0.08, 1)[0])
    img += sigma * stream.normal(h * w * c).reshape(h, w, c)
    return quantize_u8(img)


def load_entry_image(manifest: DatasetManifest, entry: ManifestEntry) -> np.ndarray:
    if entry.path is not None:
        return load_png(entry.path)
    gen = entry.gen
    if gen.get("kind") != "textured":
        raise InvalidInputError(f"unknown generator kind {gen.get('kind')!r}")
    return render_textured_image(int(gen["seed"]), int(gen["index"]), manifest.image_size)


def generate_synthetic_dataset(
    members: int,
    nonmembers: int,
    image_size: tuple[int, int, int] = (32, 32, 3),
    seed: int = 0,
    out_dir: str | Path | None = None,
    name: str = "synthetic",
) -> tuple[DatasetManifest, frozenset[str]]:
    """Procedural dataset plus the member registry for the synthetic encoder.

    The generator never looks at membership, so member and non-member image
    statistics are identical; the membership signal lives only in the
    returned registry of member content keys. With out_dir set, images are
    written as PNGs and entries reference paths; otherwise entries carry
    generator specs and images are rendered on demand.
    """
    if members < 1 or nonmembers < 1:
        raise InvalidInputError("need at least one image per class")
    entries = []
    member_keys = []
    for index in range(members + nonmembers):
        membership = "member" if index < members else "nonmember"
        prefix = "m" if membership == "member" else "n"
        image_id = f"{prefix}_{index:06d}"
        img = render_textured_image(seed, index, image_size)
        if membership == "member":
            member_keys.append(image_key(img))
        if out_dir is not None:
            rel = f"images/{image_id}.png"
            save_png(img, Path(out_dir) / rel)
            entries.append(ManifestEntry(id=image_id, membership=membership, path=str(Path(out_dir) / rel)))
        else:
            entries.append(
                ManifestEntry(
                    id=image_id,
                    membership=membership,
                    gen={"kind": "textured", "seed": seed, "index": index},
                )
            )
    manifest = DatasetManifest(name, tuple(image_size), tuple(entries))
    return manifest, frozenset(member_keys)


# ---------------------------------------------------------------------------
# Splits and metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitPlan:
    known_fraction: float
    seed: int
    known_train: tuple[str, ...]  # known members
    known_test: tuple[str, ...]  # known non-members
    unknown_train: tuple[str, ...]  # held-out members
    unknown_test: tuple[str, ...]  # held-out non-members


def split_dataset(manifest: DatasetManifest, known_fraction: float, seed: int) -> SplitPlan:
    """Stratified seeded split; known sets take floor(fraction * class size)."""
    if not (0.0 < known_fraction < 1.0):
        raise InvalidInputError(f"known_fraction must be in (0, 1), got {known_fraction}")
    out: dict[str, tuple[list[str], list[str]]] = {}
    for membership in ("member", "nonmember"):
        ids = sorted(manifest.ids(membership))
        k = int(known_fraction * len(ids))
        if k < 1 or k >= len(ids):
            raise InvalidInputError(
                f"class {membership!r} with {len(ids)} images cannot be split "
                f"at fraction {known_fraction}"
            )
        perm = Stream(seed, "split", membership).permutation(len(ids))
        shuffled = [ids[i] for i in perm]
        out[membership] = (shuffled[:k], shuffled[k:])
    return SplitPlan(
        known_fraction=known_fraction,
        seed=seed,
        known_train=tuple(out["member"][0]),
        known_test=tuple(out["nonmember"][0]),
        unknown_train=tuple(out["member"][1]),
        unknown_test=tuple(out["nonmember"][1]),
    )


@dataclass
class AttackReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    config: dict = field(default_factory=dict)
    timing_s: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "counts": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "config": self.config,
        }
        if include_timing:
            d["timing_s"] = self.timing_s
        return d


def compute_metrics(predictions: list[str], truth: list[str]) -> AttackReport:
    """Confusion-matrix metrics with "member" as the positive class.

    Ratios with zero denominators are defined as 0 (including F1 when
    precision + recall is 0).
    """
    if len(predictions) != len(truth) or not truth:
        raise InvalidInputError(
            f"prediction/truth length mismatch: {len(predictions)} vs {len(truth)}"
        )
    tp = sum(1 for p, t in zip(predictions, truth) if p == "member" and t == "member")
    fp = sum(1 for p, t in zip(predictions, truth) if p == "member" and t == "nonmember")
    tn = sum(1 for p, t in zip(predictions, truth) if p == "nonmember" and t == "nonmember")
    fn = sum(1 for p, t in zip(predictions, truth) if p == "nonmember" and t == "member")
    total = tp + fp + tn + fn
    if total != len(truth):
        raise InvalidInputError("labels must be 'member' or 'nonmember'")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return AttackReport(
        accuracy=(tp + tn) / total,
        precision=precision,
        recall=recall,
        f1=f1,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )


# ---------------------------------------------------------------------------
# Attack experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttackConfig:
    kind: str = "partcrop"
    crop: PartCropConfig = field(default_factory=PartCropConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    benchmark_seed: int | None = None

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise InvalidInputError(f"unknown attack kind {self.kind!r}")

    def feature_length(self, binding: EncoderBinding) -> int:
        if self.kind == "partcrop":
            return 2 * self.crop.m
        if self.kind == "encodermi":
            return self.augment.n_views * (self.augment.n_views - 1) // 2
        return binding.feature_dim


def extract_features(
    encoder: Encoder,
    manifest: DatasetManifest,
    labeled_ids: list[tuple[str, str]],
    attack: AttackConfig,
    workers: int = 1,
) -> list[MembershipFeature]:
    """Features for (image id, label) pairs, returned in input order."""

    def one(pair: tuple[str, str]) -> MembershipFeature:
        image_id, label = pair
        img = load_entry_image(manifest, manifest.by_id(image_id))
        if attack.kind == "partcrop":
            return partcrop_features(
                encoder, img, attack.crop, benchmark_seed=attack.benchmark_seed, label=label
            )
        if attack.kind == "encodermi":
            return encodermi_features(encoder, img, attack.augment, label=label)
        if attack.kind == "variance":
            return variance_features(encoder, img, attack.augment, label=label)
        return supervised_features(encoder, img, label=label)

    if workers <= 1:
        return [one(p) for p in labeled_ids]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, labeled_ids))


def _labeled(member_ids, nonmember_ids) -> list[tuple[str, str]]:
    return [(i, "member") for i in member_ids] + [(i, "nonmember") for i in nonmember_ids]


def _quantize_features(features: list[MembershipFeature]) -> list[MembershipFeature]:
    """Round values through f32 so in-memory runs match the PCF1 representation."""
    return [
        MembershipFeature(
            kind=f.kind,
            values=f.values.astype(np.float32).astype(np.float64),
            source_image=f.source_image,
            label=f.label,
            id_hash=f.id_hash,
        )
        for f in features
    ]


def _binding_descriptor(binding: EncoderBinding) -> dict:
    d = {
        "kind": binding.kind,
        "feature_dim": binding.feature_dim,
        "map_h": binding.map_h,
        "map_w": binding.map_w,
    }
    if binding.kind == "synthetic":
        cfg = binding.synthetic
        registry_hash = hashlib.blake2b(
            "\n".join(sorted(cfg.member_registry)).encode(), digest_size=16
        ).hexdigest()
        d["synthetic"] = {
            "seed": cfg.seed,
            "member_sharpness": cfg.member_sharpness,
            "nonmember_sharpness": cfg.nonmember_sharpness,
            "proj_scale": cfg.proj_scale,
            "registry_size": len(cfg.member_registry),
            "registry_hash": registry_hash,
        }
    else:
        d["url"] = binding.url
    return d


def _attack_descriptor(attack: AttackConfig) -> dict:
    d = {"kind": attack.kind, "train": asdict(attack.train)}
    if attack.kind == "partcrop":
        d["crop"] = asdict(attack.crop)
        d["benchmark_seed"] = attack.benchmark_seed
    elif attack.kind in ("encodermi", "variance"):
        d["augment"] = asdict(attack.augment)
    return d


def _persist_experiment(
    out_dir: Path,
    known: list[MembershipFeature],
    evaluation: list[MembershipFeature],
    model: AttackerModel,
) -> AttackerModel:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_features(known, out_dir / "features_known.pcf1")
    write_features(evaluation, out_dir / "features_eval.pcf1")
    export_features_csv(evaluation, out_dir / "features_eval.csv")
    save_model(model, out_dir / "attacker.pcat")
    return load_model(out_dir / "attacker.pcat")


def _write_report(out_dir: Path, report: AttackReport) -> None:
    (out_dir / "report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        fh.write("accuracy,precision,recall,f1,tp,fp,tn,fn\n")
        fh.write(
            f"{report.accuracy!r},{report.precision!r},{report.recall!r},"
            f"{report.f1!r},{report.tp},{report.fp},{report.tn},{report.fn}\n"
        )



def _write_predictions(out_dir: Path, evaluation, predictions, probs) -> None:
    with open(out_dir / "predictions.csv", "w", newline="") as fh:
        fh.write("image_id,truth,predicted,member_prob\n")
        for f, pred, prob in zip(evaluation, predictions, probs):
            fh.write(f"{f.source_image},{f.label},{pred},{float(prob)!r}\n")


def run_attack_experiment(
    manifest: DatasetManifest,
    binding: EncoderBinding,
    attack: AttackConfig,
    known_fraction: float = 0.5,
    split_seed: int = 0,
    out_dir: str | Path | None = None,
    workers: int = 1,
) -> AttackReport:
    """Partial-setting attack: train on the known split, evaluate on the rest.

    Persists feature files, the trained model, and the report when out_dir is
    given; evaluation always runs through the f32 on-disk representation of
    the model so staged and end-to-end runs agree bit-for-bit.
    """
    start = time.perf_counter()
    split = split_dataset(manifest, known_fraction, split_seed)
    encoder = build_encoder(binding)

    known = _quantize_features(
        extract_features(
            encoder, manifest, _labeled(split.known_train, split.known_test), attack, workers
        )
    )
    model = train_attacker(known, attack.train)
    evaluation = _quantize_features(
        extract_features(
            encoder, manifest, _labeled(split.unknown_train, split.unknown_test), attack, workers
        )
    )

    if out_dir is not None:
        model = _persist_experiment(Path(out_dir), known, evaluation, model)
    else:
        model = quantize_to_f32(model)

    predictions, probs = predict_batch(model, evaluation)
    truth = [f.label for f in evaluation]
    report = compute_metrics(predictions, truth)
    report.config = {
        "setting": "partial",
        "manifest": {"name": manifest.name, "hash": manifest_hash(manifest)},
        "encoder": _binding_descriptor(binding),
        "attack": _attack_descriptor(attack),
        "split": {"known_fraction": known_fraction, "seed": split_seed},
        "evaluated": len(evaluation),
    }
    report.timing_s = time.perf_counter() - start
    if out_dir is not None:
        _write_report(Path(out_dir), report)
        _write_predictions(Path(out_dir), evaluation, predictions, probs)
    return report


def run_shadow_experiment(
    source_manifest: DatasetManifest,
    source_binding: EncoderBinding,
    target_manifest: DatasetManifest,
    target_binding: EncoderBinding,
    attack: AttackConfig,
    target_attack: AttackConfig | None = None,
    known_fraction: float = 0.5,
    split_seed: int = 0,
    out_dir: str | Path | None = None,
    workers: int = 1,
) -> AttackReport:
    """Shadow-setting attack: train on the source pair, evaluate on the
    target pair's unknown split."""
    start = time.perf_counter()
    target_attack = target_attack if target_attack is not None else attack
    src_len = attack.feature_length(source_binding)
    tgt_len = target_attack.feature_length(target_binding)
    if attack.kind != target_attack.kind or src_len != tgt_len:
        raise InvalidInputError(
            f"source features ({attack.kind}, len {src_len}) are incompatible with "
            f"target features ({target_attack.kind}, len {tgt_len})"
        )

    src_split = split_dataset(source_manifest, known_fraction, split_seed)
    tgt_split = split_dataset(target_manifest, known_fraction, split_seed)
    src_encoder = build_encoder(source_binding)
    tgt_encoder = build_encoder(target_binding)

    known = _quantize_features(
        extract_features(
            src_encoder,
            source_manifest,
            _labeled(src_split.known_train, src_split.known_test),
            attack,
            workers,
        )
    )
    model = train_attacker(known, attack.train)
    evaluation = _quantize_features(
        extract_features(
            tgt_encoder,
            target_manifest,
            _labeled(tgt_split.unknown_train, tgt_split.unknown_test),
            target_attack,
            workers,
        )
    )

    if out_dir is not None:
        model = _persist_experiment(Path(out_dir), known, evaluation, model)
    else:
        model = quantize_to_f32(model)

    predictions, probs = predict_batch(model, evaluation)
    report = compute_metrics(predictions, [f.label for f in evaluation])
    report.config = {
        "setting": "shadow",
        "source_manifest": {"name": source_manifest.name, "hash": manifest_hash(source_manifest)},
        "target_manifest": {"name": target_manifest.name, "hash": manifest_hash(target_manifest)},
        "source_encoder": _binding_descriptor(source_binding),
        "target_encoder": _binding_descriptor(target_binding),
        "attack": _attack_descriptor(attack),
        "split": {"known_fraction": known_fraction, "seed": split_seed},
        "evaluated": len(evaluation),
    }
    report.timing_s = time.perf_counter() - start
    if out_dir is not None:
        _write_report(Path(out_dir), report)
        _write_predictions(Path(out_dir), evaluation, predictions, probs)
    return report


def knowledge_sweep(
    manifest: DatasetManifest,
    binding: EncoderBinding,
    attack: AttackConfig,
    fractions: list[float],
    split_seed: int = 0,
    out_dir: str | Path | None = None,
    workers: int = 1,
) -> list[AttackReport]:
    """One partial experiment per knowledge fraction, shared split seed.

    The shared seed keeps known sets nested as the fraction grows, so sweeps
    measure the effect of knowledge volume rather than resampling noise.
    """
    if not fractions or any(not (0.0 < f < 1.0) for f in fractions):
        raise InvalidInputError("fractions must all lie in (0, 1)")
    reports = []
    for fraction in fractions:
        sub_dir = None
        if out_dir is not None:
            sub_dir = Path(out_dir) / f"fraction_{fraction:.2f}"
        report = run_attack_experiment(
            manifest, binding, attack, fraction, split_seed, sub_dir, workers
        )
        report.config["sweep_fraction"] = fraction
        if sub_dir is not None:
            _write_report(sub_dir, report)
        reports.append(report)
    if out_dir is not None:
        with open(Path(out_dir) / "sweep.csv", "w", newline="") as fh:
            fh.write("fraction,accuracy,precision,recall,f1\n")
            for fraction, r in zip(fractions, reports):
                fh.write(f"{fraction!r},{r.accuracy!r},{r.precision!r},{r.recall!r},{r.f1!r}\n")
    return reports


def part_response_curve(
    encoder: Encoder | EncoderBinding,
    image: np.ndarray,
    part_box: CropBox,
    patch_size: tuple[int, int] = (16, 16),
    csv_path: str | Path | None = None,
) -> np.ndarray:
    """Ranked cosine similarities between one part's vector and the map.

    Crops the part, resizes it to patch_size, pools its feature map into a
    query vector, and returns the descending cosine similarity against each
    of the N feature-map positions.
    """
    if isinstance(encoder, EncoderBinding):
        encoder = build_encoder(encoder)
    img = as_image(image)
    part_box.validate_inside(img.shape[1], img.shape[0])
    part = img[part_box.y : part_box.y + part_box.h, part_box.x : part_box.x + part_box.w]
    patch = bilinear_resize(part.astype(np.float64), patch_size[0], patch_size[1]).astype(np.float32)

    query = encoder.encode_patch_batch([patch])[0]
    positions = encoder.encode_map(img).positions()
    sims = np.array([cosine_sim(query, pos) for pos in positions])
    ranked = sort_desc(sims)
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            fh.write("rank,similarity\n")
            for rank, s in enumerate(ranked):
                fh.write(f"{rank},{float(s)!r}\n")
    return ranked


# ---------------------------------------------------------------------------
# Crop-scale defense search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScsrSearchConfig:
    stage1_candidates: tuple[float, ...] = (0.3, 0.4, 0.5)
    stage2_step: float = 0.02
    evals_per_point: int = 1

    def __post_init__(self):
        cands = tuple(self.stage1_candidates)
        if not cands or any(not (0.0 < c < 1.0) for c in cands):
            raise InvalidInputError("candidates must lie in (0, 1)")
        if list(cands) != sorted(cands) or len(set(cands)) != len(cands):
            raise InvalidInputError("candidates must be strictly ascending")
        if self.stage2_step <= 0:
            raise InvalidInputError("stage2_step must be positive")
        if self.evals_per_point < 1:
            raise InvalidInputError("evals_per_point must be >= 1")
        object.__setattr__(self, "stage1_candidates", cands)


@dataclass(frozen=True)
class ScsrPoint:
    stage: int
    bound: float
    accuracy: float


@dataclass(frozen=True)
class ScsrResult:
    chosen_bound: float
    chosen_accuracy: float
    trace: tuple[ScsrPoint, ...]


def scsr_search(evaluator, cfg: ScsrSearchConfig) -> ScsrResult:
    """Two-stage coarse-to-fine search for the defense lower bound.

    Stage 1 evaluates the coarse candidates; stage 2 grid-evaluates strictly
    between the two best (lowest attack accuracy) at stage2_step. The result
    minimizes evaluated attack accuracy; on ties, stage-2 (refined) bounds
    win over coarse ones, then the smaller bound wins (less utility loss).
    """

    def evaluate(bound: float) -> float:
        accs = [float(evaluator(bound)) for _ in range(cfg.evals_per_point)]
        return float(np.mean(accs))

    trace: list[ScsrPoint] = []
    for bound in cfg.stage1_candidates:
        trace.append(ScsrPoint(stage=1, bound=bound, accuracy=evaluate(bound)))

    if len(cfg.stage1_candidates) > 1:
        best_two = sorted(trace, key=lambda p: (p.accuracy, p.bound))[:2]
        lo, hi = sorted(p.bound for p in best_two)
        k = 1
        while lo + k * cfg.stage2_step < hi - 1e-9:
            bound = round(lo + k * cfg.stage2_step, 10)
            trace.append(ScsrPoint(stage=2, bound=bound, accuracy=evaluate(bound)))
            k += 1

    # stage 2 preferred on ties, then the smaller bound
    winner = min(trace, key=lambda p: (p.accuracy, -p.stage, p.bound))
    return ScsrResult(chosen_bound=winner.bound, chosen_accuracy=winner.accuracy, trace=tuple(trace))


def scsr_sharpness(lower_bound: float, base: SyntheticEncoderConfig) -> float:
    """Member sharpness after defending with the given crop-scale lower bound."""
    if not (0.0 < lower_bound < 1.0):
        raise InvalidInputError(f"lower bound must be in (0, 1), got {lower_bound}")
    gap = base.member_sharpness - base.nonmember_sharpness
    return base.nonmember_sharpness + gap * (1.0 - lower_bound) ** SCSR_SCHEDULE_EXPONENT


def make_scsr_evaluator(
    manifest: DatasetManifest,
    member_keys: frozenset[str],
    base_binding: EncoderBinding,
    attack: AttackConfig,
    known_fraction: float = 0.5,
    split_seed: int = 0,
    workers: int = 1,
):
    """Evaluator mapping a defense lower bound to partial-setting attack accuracy.

    Stands in for retraining the victim encoder with a shrunken crop range:
    the bound shrinks the synthetic encoder's member sharpness toward the
    non-member sharpness through scsr_sharpness, then a fresh attack runs.
    """
    if base_binding.kind != "synthetic":
        raise InvalidInputError("defense evaluation requires a synthetic binding")
    base_cfg = replace(base_binding.synthetic, member_registry=member_keys)

    def evaluate(lower_bound: float) -> float:
        cfg = replace(base_cfg, member_sharpness=scsr_sharpness(lower_bound, base_cfg))
        binding = replace(base_binding, synthetic=cfg)
        report = run_attack_experiment(
            manifest, binding, attack, known_fraction, split_seed, None, workers
        )
        return report.accuracy

    return evaluate
