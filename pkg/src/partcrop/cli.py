"""Command-line interface.

A JSON config file is the single source of truth; flags override the few
knobs that make sense per command. Every run writes its outputs plus a
run_manifest.json (config hash, input hashes, toolkit version) under --out.

Exit codes: 0 success, 1 config/usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .attacker import TrainConfig, load_model, predict_batch, save_model, train_attacker
from .conformance import format_results, run_conformance
from .cropper import CropBox, PartCropConfig, dump_boxes_csv, sample_crops
from .encoders import EncoderBinding, SyntheticEncoderConfig, build_encoder
from .errors import InvalidInputError, PartCropError
from .features import AugmentConfig, export_features_csv, read_features, write_features
from .harness import (
    AttackConfig,
    ScsrSearchConfig,
    compute_metrics,
    extract_features,
    generate_synthetic_dataset,
    knowledge_sweep,
    load_entry_image,
    load_manifest,
    make_scsr_evaluator,
    manifest_hash,
    part_response_curve,
    run_attack_experiment,
    run_shadow_experiment,
    save_manifest,
    scsr_search,
    split_dataset,
)
from .images import load_png
from .server import SyntheticEncoderServer

SEED_ENV = "PARTCROP_SEED"


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        raise ConfigError(f"{message}\n{self.format_usage()}")


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------


def _global_seed(cfg: dict) -> int:
    if "seed" in cfg:
        return int(cfg["seed"])
    env = os.environ.get(SEED_ENV)
    return int(env) if env else 0


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc


def _load_registry(cfg: dict) -> frozenset[str]:
    reg = cfg.get("registry")
    if reg is None:
        return frozenset()
    if isinstance(reg, str):
        try:
            reg = json.loads(Path(reg).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read registry {cfg['registry']!r}: {exc}") from exc
    if not isinstance(reg, list):
        raise ConfigError("registry must be a list of content keys or a path to one")
    return frozenset(str(k) for k in reg)


def _resolve_dataset(cfg: dict, seed: int):
    """Returns (manifest, member_keys or None)."""
    ds = cfg.get("dataset")
    if not isinstance(ds, dict):
        raise ConfigError("config needs a 'dataset' object with 'manifest' or 'generate'")
    if "manifest" in ds:
        try:
            return load_manifest(ds["manifest"]), None
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"cannot load manifest {ds['manifest']!r}: {exc}") from exc
    if "generate" in ds:
        gen = ds["generate"]
        manifest, keys = generate_synthetic_dataset(
            members=int(gen.get("members", 100)),
            nonmembers=int(gen.get("nonmembers", 100)),
            image_size=tuple(gen.get("image_size", (32, 32, 3))),
            seed=int(gen.get("seed", seed)),
            name=gen.get("name", "synthetic"),
        )
        return manifest, keys
    raise ConfigError("'dataset' needs either 'manifest' or 'generate'")


def _resolve_binding(cfg: dict, seed: int, member_keys: frozenset[str] | None) -> EncoderBinding:
    enc = cfg.get("encoder")
    if not isinstance(enc, dict) or "kind" not in enc:
        raise ConfigError("config needs an 'encoder' object with a 'kind'")
    kind = enc["kind"]
    common = {
        "feature_dim": int(enc.get("feature_dim", 32)),
        "map_h": int(enc.get("map_h", 4)),
        "map_w": int(enc.get("map_w", 4)),
    }
    try:
        if kind == "synthetic":
            syn = enc.get("synthetic", {})
            registry = member_keys if member_keys is not None else _load_registry(cfg)
            syn_cfg = SyntheticEncoderConfig(
                seed=int(syn.get("seed", seed)),
                member_sharpness=float(syn.get("member_sharpness", 8.0)),
                nonmember_sharpness=float(syn.get("nonmember_sharpness", 2.0)),
                member_registry=registry,
                proj_scale=float(syn.get("proj_scale", 1.0)),
            )
            return EncoderBinding(kind="synthetic", synthetic=syn_cfg, **common)
        if kind == "remote":
            return EncoderBinding(
                kind="remote",
                url=enc["url"],
                timeout_s=float(enc.get("timeout_s", 10.0)),
                **common,
            )
    except (InvalidInputError, KeyError) as exc:
        raise ConfigError(f"bad encoder config: {exc}") from exc
    raise ConfigError(f"unknown encoder kind {kind!r}")


def _resolve_attack(cfg: dict, seed: int) -> AttackConfig:
    atk = cfg.get("attack", {})
    if not isinstance(atk, dict):
        raise ConfigError("'attack' must be an object")
    try:
        crop = PartCropConfig(
            m=int(atk.get("crops", 128)),
            scale=tuple(atk.get("crop_scale", (0.08, 0.2))),
            aspect=tuple(atk.get("crop_aspect", (0.75, 4.0 / 3.0))),
            patch_size=tuple(atk.get("patch_size", (16, 16))),
            seed=int(atk.get("crop_seed", seed)),
        )
        augment = AugmentConfig(
            n_views=int(atk.get("views", 10)),
            scale=tuple(atk.get("view_scale", (0.2, 1.0))),
            flip_p=float(atk.get("flip_p", 0.5)),
            seed=int(atk.get("augment_seed", seed)),
        )
        tr = atk.get("train", {})
        train = TrainConfig(
            lr=float(tr.get("lr", 0.001)),
            weight_decay=float(tr.get("weight_decay", 0.0005)),
            batch_size=int(tr.get("batch_size", 100)),
            epochs=int(tr.get("epochs", 100)),
            hidden=int(tr.get("hidden", 128)),
            seed=int(tr.get("seed", seed)),
        )
        return AttackConfig(
            kind=atk.get("kind", "partcrop"),
            crop=crop,
            augment=augment,
            train=train,
            benchmark_seed=int(atk.get("benchmark_seed", seed)),
        )
    except (InvalidInputError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad attack config: {exc}") from exc


def _resolve_split(cfg: dict, seed: int) -> tuple[float, int]:
    sp = cfg.get("split", {})
    return float(sp.get("known_fraction", 0.5)), int(sp.get("seed", seed))


def _config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.blake2b(canon.encode("utf-8"), digest_size=16).hexdigest()


def _write_run_manifest(out: Path, command: str, cfg: dict, inputs: dict, outputs: list[str], started: float) -> None:
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "version": __version__,
        "config": cfg,
        "config_hash": _config_hash(cfg),
        "inputs": inputs,
        "outputs": sorted(outputs),
        "timing_s": time.perf_counter() - started,
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cmd_gen_synth(args, cfg: dict) -> int:
    seed = _global_seed(cfg)
    out = Path(args.out)
    ds = cfg.get("dataset", {}).get("generate", {})
    started = time.perf_counter()
    manifest, keys = generate_synthetic_dataset(
        members=int(ds.get("members", args.members)),
        nonmembers=int(ds.get("nonmembers", args.nonmembers)),
        image_size=tuple(ds.get("image_size", (32, 32, 3))),
        seed=int(ds.get("seed", seed)),
        out_dir=out,
        name=ds.get("name", "synthetic"),
    )
    save_manifest(manifest, out / "manifest.json")
    (out / "registry.json").write_text(json.dumps(sorted(keys), indent=2) + "\n")
    _write_run_manifest(
        out, "gen-synth", cfg, {"manifest_hash": manifest_hash(manifest)},
        ["manifest.json", "registry.json", "images/"], started,
    )
    print(f"wrote {len(manifest.entries)} images, manifest and registry to {out}")
    return 0


def _subset_ids(split, subset: str):
    known = [(i, "member") for i in split.known_train] + [(i, "nonmember") for i in split.known_test]
    unknown = [(i, "member") for i in split.unknown_train] + [(i, "nonmember") for i in split.unknown_test]
    if subset == "known":
        return known
    if subset == "unknown":
        return unknown
    return known + unknown


def _cmd_extract_features(args, cfg: dict) -> int:
    seed = _global_seed(cfg)
    started = time.perf_counter()
    manifest, keys = _resolve_dataset(cfg, seed)
    binding = _resolve_binding(cfg, seed, keys)
    attack = _resolve_attack(cfg, seed)
    fraction, split_seed = _resolve_split(cfg, seed)
    split = split_dataset(manifest, fraction, split_seed)
    encoder = build_encoder(binding)
    feats = extract_features(encoder, manifest, _subset_ids(split, args.subset), attack, args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_features(feats, out / "features.pcf1")
    export_features_csv(feats, out / "features.csv")
    _write_run_manifest(
        out, "extract-features", cfg, {"manifest_hash": manifest_hash(manifest)},
        ["features.pcf1", "features.csv"], started,
    )
    print(f"wrote {len(feats)} {attack.kind} features ({args.subset} subset) to {out}")
    return 0


def _cmd_train_attacker(args, cfg: dict) -> int:
    seed = _global_seed(cfg)
    started = time.perf_counter()
    feats = read_features(args.features)
    attack = _resolve_attack(cfg, seed)
    model = train_attacker(feats, attack.train)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "attacker.pcat")
    feat_hash = hashlib.blake2b(Path(args.features).read_bytes(), digest_size=16).hexdigest()
    _write_run_manifest(out, "train-attacker", cfg, {"features_hash": feat_hash}, ["attacker.pcat"], started)
    print(f"trained {attack.train.epochs}-epoch attacker on {len(feats)} features -> {out / 'attacker.pcat'}")
    return 0


def _cmd_evaluate(args, cfg: dict) -> int:
    started = time.perf_counter()
    feats = read_features(args.features)
    unknown = [f for f in feats if f.label == "unknown"]
    if unknown:
        raise InvalidInputError(f"{len(unknown)} evaluation records have no ground-truth label")
    model = load_model(args.model)
    predictions, probs = predict_batch(model, feats)
    report = compute_metrics(predictions, [f.label for f in feats])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    with open(out / "metrics.csv", "w", newline="") as fh:
        fh.write("accuracy,precision,recall,f1,tp,fp,tn,fn\n")
        fh.write(
            f"{report.accuracy!r},{report.precision!r},{report.recall!r},"
            f"{report.f1!r},{report.tp},{report.fp},{report.tn},{report.fn}\n"
        )
    from .plots import plot_report

    plot_report(report, probs, [f.label for f in feats], out / "report.png")
    _write_run_manifest(
        out, "evaluate", cfg,
        {
            "features_hash": hashlib.blake2b(Path(args.features).read_bytes(), digest_size=16).hexdigest(),
            "model_hash": hashlib.blake2b(Path(args.model).read_bytes(), digest_size=16).hexdigest(),
        },
        ["report.json", "metrics.csv", "report.png"], started,
    )
    print(
        f"accuracy={report.accuracy:.4f} precision={report.precision:.4f} "
        f"recall={report.recall:.4f} f1={report.f1:.4f}"
    )
    return 0


def _cmd_attack(args, cfg: dict) -> int:
    seed = _global_seed(cfg)
    started = time.perf_counter()
    manifest, keys = _resolve_dataset(cfg, seed)
    binding = _resolve_binding(cfg, seed, keys)
    attack = _resolve_attack(cfg, seed)
    fraction, split_seed = _resolve_split(cfg, seed)
    out = Path(args.out)
    report = run_attack_experiment(manifest, binding, attack, fraction, split_seed, out, args.workers)

    from .plots import plot_report

    probs, truth = _read_predictions(out / "predictions.csv")
    plot_report(report, probs, truth, out / "report.png")
    _write_run_manifest(
        out, "attack", cfg, {"manifest_hash": manifest_hash(manifest)},
        ["features_known.pcf1", "features_eval.pcf1", "features_eval.csv",
         "attacker.pcat", "report.json", "metrics.csv", "predictions.csv", "report.png"],
        started,
    )
    print(
        f"{attack.kind}: accuracy={report.accuracy:.4f} precision={report.precision:.4f} "
        f"recall={report.recall:.4f} f1={report.f1:.4f} ({report.timing_s:.1f}s)"
    )
    return 0


def _read_predictions(path: Path):
    probs, truth = [], []
    for line in path.read_text().splitlines()[1:]:
        _, t, _, p = line.split(",")
        truth.append(t)
        probs.append(float(p))
    return np.array(probs), truth


def _cmd_shadow_attack(args, cfg: dict) -> int:
    seed = _global_seed(cfg)
    started = time.perf_counter()
    manifest, keys = _resolve_dataset(cfg, seed)
    binding = _resolve_binding(cfg, seed, keys)
    target = cfg.get("target")
    if not isinstance(target, dict):
        raise ConfigError("shadow-attack needs a 'target' object with dataset/encoder")
    tgt_manifest, tgt_keys = _resolve_dataset(target, seed)
    tgt_binding = _resolve_binding(target, seed, tgt_keys)
    attack = _resolve_attack(cfg, seed)
    fraction, split_seed = _resolve_split(cfg, seed)
    out = Path(args.out)
    report = run_shadow_experiment(
        manifest, binding, tgt_manifest, tgt_binding, attack,
        known_fraction=fraction, split_seed=split_seed, out_dir=out, workers=args.workers,
    )
    from .plots import plot_report

    probs, truth = _read_predictions(out / "predictions.csv")
    plot_report(report, probs, truth, out / "report.png")
    _write_run_manifest(
        out, "shadow-attack", cfg,
        {"source_manifest_hash": manifest_hash(manifest), "target_manifest_hash": manifest_hash(tgt_manifest)},
        ["report.json", "metrics.csv", "predictions.csv", "report.png"], started,
    )
    print(
        f"shadow {attack.kind}: accuracy={report.accuracy:.4f} f1={report.f1:.4f} "
        f"({report.timing_s:.1f}s)"
    )
    return 0


def _cmd_sweep_knowledge(args, cfg: dict) -> int:
    seed = _global_seed(cfg)
    started = time.perf_counter()
    manifest, keys = _resolve_dataset(cfg, seed)
    binding = _resolve_binding(cfg, seed, keys)
    attack = _resolve_attack(cfg, seed)
    _, split_seed = _resolve_split(cfg, seed)
    if args.fractions:
        fractions = [float(f) for f in args.fractions.split(",")]
    else:
        fractions = [float(f) for f in cfg.get("sweep_fractions", (0.1, 0.3, 0.5))]
    out = Path(args.out)
    reports = knowledge_sweep(manifest, binding, attack, fractions, split_seed, out, args.workers)

    from .plots import plot_sweep

    plot_sweep(fractions, reports, out / "sweep.png")
    _write_run_manifest(
        out, "sweep-knowledge", cfg, {"manifest_hash": manifest_hash(manifest)},
        ["sweep.csv", "sweep.png"], started,
    )
    for fraction, r in zip(fractions, reports):
        print(f"fraction={fraction:.2f} accuracy={r.accuracy:.4f} f1={r.f1:.4f}")
    return 0


def _cmd_curve(args, cfg: dict) -> int:
    seed = _global_seed(cfg)
    started = time.perf_counter()
    try:
        x, y, w, h = (int(v) for v in args.box.split(","))
    except ValueError as exc:
        raise ConfigError(f"--box must be x,y,w,h integers: {exc}") from exc
    if args.image:
        try:
            image = load_png(args.image)
        except FileNotFoundError as exc:
            raise ConfigError(f"image not found: {args.image}") from exc
        inputs = {"image": args.image}
    else:
        manifest, _ = _resolve_dataset(cfg, seed)
        if not args.image_id:
            raise ConfigError("curve needs --image PATH or --image-id ID with a dataset config")
        image = load_entry_image(manifest, manifest.by_id(args.image_id))
        inputs = {"manifest_hash": manifest_hash(manifest), "image_id": args.image_id}
    keys = _load_registry(cfg) if cfg.get("registry") else None
    binding = _resolve_binding(cfg, seed, keys)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ranked = part_response_curve(
        binding, image, CropBox(x=x, y=y, w=w, h=h),
        patch_size=tuple(cfg.get("attack", {}).get("patch_size", (16, 16))),
        csv_path=out / "curve.csv",
    )
    from .plots import plot_curve

    plot_curve(ranked, out / "curve.png")
    _write_run_manifest(out, "curve", cfg, inputs, ["curve.csv", "curve.png"], started)
    print(f"curve over {len(ranked)} positions: top={ranked[0]:.4f} bottom={ranked[-1]:.4f}")
    return 0


def _cmd_crop_boxes(args, cfg: dict) -> int:
    seed = _global_seed(cfg)
    started = time.perf_counter()
    if args.image:
        try:
            image = load_png(args.image)
        except FileNotFoundError as exc:
            raise ConfigError(f"image not found: {args.image}") from exc
        inputs = {"image": args.image}
    else:
        manifest, _ = _resolve_dataset(cfg, seed)
        if not args.image_id:
            raise ConfigError("crop-boxes needs --image PATH or --image-id ID with a dataset config")
        image = load_entry_image(manifest, manifest.by_id(args.image_id))
        inputs = {"manifest_hash": manifest_hash(manifest), "image_id": args.image_id}
    attack = _resolve_attack(cfg, seed)
    boxes = [box for box, _ in sample_crops(image, attack.crop)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_boxes_csv(boxes, out / "boxes.csv")
    _write_run_manifest(out, "crop-boxes", cfg, inputs, ["boxes.csv"], started)
    print(f"wrote {len(boxes)} crop boxes to {out / 'boxes.csv'}")
    return 0


def _cmd_scsr_search(args, cfg: dict) -> int:
    seed = _global_seed(cfg)
    started = time.perf_counter()
    scsr_cfg = cfg.get("scsr", {})
    candidates = (
        tuple(float(c) for c in args.candidates.split(","))
        if args.candidates
        else tuple(scsr_cfg.get("candidates", (0.3, 0.4, 0.5)))
    )
    step = float(args.step) if args.step is not None else float(scsr_cfg.get("step", 0.02))
    search_cfg = ScsrSearchConfig(stage1_candidates=candidates, stage2_step=step)

    if args.evaluator.startswith("linear:"):
        try:
            _, a, b = args.evaluator.split(":")
            intercept, slope = float(a), float(b)
        except ValueError as exc:
            raise ConfigError("--evaluator linear:<intercept>:<slope> expects two numbers") from exc
        evaluator = lambda bound: intercept - slope * bound
        inputs = {"evaluator": args.evaluator}
    elif args.evaluator == "experiment":
        manifest, keys = _resolve_dataset(cfg, seed)
        if keys is None:
            keys = _load_registry(cfg)
        binding = _resolve_binding(cfg, seed, keys)
        attack = _resolve_attack(cfg, seed)
        fraction, split_seed = _resolve_split(cfg, seed)
        evaluator = make_scsr_evaluator(
            manifest, keys, binding, attack, fraction, split_seed, args.workers
        )
        inputs = {"evaluator": "experiment", "manifest_hash": manifest_hash(manifest)}
    else:
        raise ConfigError(f"unknown evaluator {args.evaluator!r}")

    result = scsr_search(evaluator, search_cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trace.csv", "w", newline="") as fh:
        fh.write("stage,bound,accuracy\n")
        for p in result.trace:
            fh.write(f"{p.stage},{p.bound!r},{p.accuracy!r}\n")
    (out / "chosen.json").write_text(
        json.dumps({"bound": result.chosen_bound, "accuracy": result.chosen_accuracy}, indent=2) + "\n"
    )
    from .plots import plot_scsr

    plot_scsr(result, out / "trace.png")
    _write_run_manifest(out, "scsr-search", cfg, inputs, ["trace.csv", "trace.png", "chosen.json"], started)
    print(result.chosen_bound)
    return 0


def _cmd_serve_synth(args, cfg: dict) -> int:
    seed = _global_seed(cfg)
    manifest_keys = None
    if cfg.get("dataset"):
        _, manifest_keys = _resolve_dataset(cfg, seed)
    binding = _resolve_binding(cfg, seed, manifest_keys)
    if binding.kind != "synthetic":
        raise ConfigError("serve-synth requires a synthetic encoder config")
    encoder = build_encoder(binding)
    server = SyntheticEncoderServer(encoder, host=args.host, port=args.port)
    print(f"serving synthetic encoder on {server.url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def _cmd_conformance(args, cfg: dict) -> int:
    enc = cfg.get("encoder", {})
    results = run_conformance(
        url=args.url or enc.get("url"),
        feature_dim=int(enc.get("feature_dim", 32)),
        map_h=int(enc.get("map_h", 4)),
        map_w=int(enc.get("map_w", 4)),
    )
    print(format_results(results))
    return 0 if all(r.passed for r in results) else 2


# ---------------------------------------------------------------------------
# Parser and dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="partcrop", description=__doc__)
    parser.add_argument("--version", action="version", version=f"partcrop {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default=f"runs/{name}", help="output directory")
        p.add_argument("--seed", type=int, help="override the global seed")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                       help="feature-extraction parallelism (output order is deterministic)")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    p = add("gen-synth", _cmd_gen_synth, help="generate a synthetic PNG dataset + manifest + registry")
    p.add_argument("--members", type=int, default=100)
    p.add_argument("--nonmembers", type=int, default=100)

    p = add("extract-features", _cmd_extract_features, help="extract membership features to a PCF1 file")
    p.add_argument("--subset", choices=("known", "unknown", "all"), default="all")

    p = add("train-attacker", _cmd_train_attacker, help="train the attacker from a PCF1 feature file")
    p.add_argument("--features", required=True, help="PCF1 file with labeled features")

    p = add("evaluate", _cmd_evaluate, help="evaluate a trained attacker on a PCF1 feature file")
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True, help="PCAT model file")

    add("attack", _cmd_attack, help="end-to-end partial-setting attack")

    add("shadow-attack", _cmd_shadow_attack, help="train on one dataset/encoder, attack another")

    p = add("sweep-knowledge", _cmd_sweep_knowledge, help="partial attacks over several known fractions")
    p.add_argument("--fractions", help="comma-separated fractions, e.g. 0.1,0.3,0.5")

    p = add("curve", _cmd_curve, help="ranked part-response similarity curve for one image")
    p.add_argument("--image", help="PNG path (alternative to --image-id)")
    p.add_argument("--image-id", help="image id within the configured dataset")
    p.add_argument("--box", required=True, help="part box as x,y,w,h")

    p = add("crop-boxes", _cmd_crop_boxes, help="dump the seeded crop boxes for one image (debugging)")
    p.add_argument("--image", help="PNG path (alternative to --image-id)")
    p.add_argument("--image-id", help="image id within the configured dataset")

    p = add("scsr-search", _cmd_scsr_search, help="two-stage search for the defense crop-scale lower bound")
    p.add_argument("--candidates", help="comma-separated stage-1 lower bounds")
    p.add_argument("--step", type=float, help="stage-2 grid step")
    p.add_argument("--evaluator", default="experiment",
                   help="'experiment' or 'linear:<intercept>:<slope>' for a dry run")

    p = add("serve-synth", _cmd_serve_synth, help="expose the synthetic encoder over the wire protocol")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8971)

    p = add("conformance", _cmd_conformance, help="run the wire-protocol conformance suite against a service")
    p.add_argument("--url", help="service base url (defaults to encoder.url from config)")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        return args.fn(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except PartCropError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # runtime failures exit 2, not a traceback
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
