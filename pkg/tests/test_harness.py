"""Harness tests: manifests, splits, metrics, experiments, defense search."""

import json

import numpy as np
import pytest

import partcrop as pc
from partcrop.cropper import CropBox
from partcrop.errors import InvalidInputError
from partcrop.harness import (
    AttackConfig,
    DatasetManifest,
    ManifestEntry,
    ScsrSearchConfig,
    compute_metrics,
    generate_synthetic_dataset,
    knowledge_sweep,
    load_entry_image,
    load_manifest,
    make_scsr_evaluator,
    manifest_hash,
    part_response_curve,
    render_textured_image,
    run_attack_experiment,
    run_shadow_experiment,
    save_manifest,
    scsr_search,
    scsr_sharpness,
    split_dataset,
)
from partcrop.images import image_key


def _gen_entry(i, membership, seed=0):
    return ManifestEntry(
        id=f"{membership[0]}{i:05d}", membership=membership,
        gen={"kind": "textured", "seed": seed, "index": i},
    )


def _manifest(members, nonmembers, seed=0, name="test"):
    entries = [_gen_entry(i, "member", seed) for i in range(members)]
    entries += [_gen_entry(members + i, "nonmember", seed) for i in range(nonmembers)]
    return DatasetManifest(name, (32, 32, 3), tuple(entries))


def _small_setup(members=40, nonmembers=40, tau_m=8.0, tau_n=2.0, seed=11):
    manifest, keys = generate_synthetic_dataset(members, nonmembers, (32, 32, 3), seed=seed)
    syn = pc.SyntheticEncoderConfig(
        seed=5, member_sharpness=tau_m, nonmember_sharpness=tau_n, member_registry=keys
    )
    binding = pc.EncoderBinding(kind="synthetic", feature_dim=32, map_h=4, map_w=4, synthetic=syn)
    attack = AttackConfig(
        kind="partcrop",
        crop=pc.PartCropConfig(m=16, seed=1),
        train=pc.TrainConfig(epochs=20, batch_size=20, hidden=32, seed=2),
        benchmark_seed=3,
    )
    return manifest, keys, binding, attack


class TestManifest:
    def test_unique_ids_enforced(self):
        e = _gen_entry(0, "member")
        with pytest.raises(InvalidInputError):
            DatasetManifest("x", (8, 8, 3), (e, e, _gen_entry(1, "nonmember")))

    def test_both_classes_required(self):
        with pytest.raises(InvalidInputError):
            DatasetManifest("x", (8, 8, 3), (_gen_entry(0, "member"),))

    def test_entry_needs_exactly_one_source(self):
        with pytest.raises(InvalidInputError):
            ManifestEntry(id="a", membership="member")
        with pytest.raises(InvalidInputError):
            ManifestEntry(id="a", membership="member", path="x.png", gen={"kind": "textured"})

    def test_json_round_trip(self, tmp_path):
        manifest = _manifest(3, 2)
        path = tmp_path / "manifest.json"
        save_manifest(manifest, path)
        loaded = load_manifest(path)
        assert loaded == manifest
        assert manifest_hash(loaded) == manifest_hash(manifest)
        schema = json.loads(path.read_text())
        assert set(schema) == {"name", "image_size", "entries"}
        assert set(schema["entries"][0]) == {"id", "membership", "gen"}


class TestSyntheticDataset:
    def test_counts_and_unique_ids(self):
        manifest, keys = generate_synthetic_dataset(100, 100, (16, 16, 3), seed=0)
        assert len(manifest.entries) == 200
        assert len({e.id for e in manifest.entries}) == 200
        assert len(keys) == 100

    def test_same_seed_identical_images(self):
        a = render_textured_image(7, 3, (16, 16, 3))
        b = render_textured_image(7, 3, (16, 16, 3))
        assert np.array_equal(a, b)
        assert not np.array_equal(a, render_textured_image(8, 3, (16, 16, 3)))

    def test_png_round_trip_matches_generated(self, tmp_path):
        manifest, keys = generate_synthetic_dataset(2, 2, (16, 16, 3), seed=4, out_dir=tmp_path)
        mem_manifest, mem_keys = generate_synthetic_dataset(2, 2, (16, 16, 3), seed=4)
        assert keys == mem_keys
        for disk, mem in zip(manifest.entries, mem_manifest.entries):
            img_disk = load_entry_image(manifest, disk)
            img_mem = load_entry_image(mem_manifest, mem)
            assert np.array_equal(img_disk, img_mem)
            assert image_key(img_disk) == image_key(img_mem)

    def test_membership_invisible_in_pixels(self):
        # per-pixel mean difference between classes stays small: the signal
        # lives in the encoder registry, not the pixels
        manifest, _ = generate_synthetic_dataset(500, 500, (16, 16, 3), seed=9)
        sums = {"member": 0.0, "nonmember": 0.0}
        for e in manifest.entries:
            sums[e.membership] += float(load_entry_image(manifest, e).mean())
        assert abs(sums["member"] / 500 - sums["nonmember"] / 500) < 0.01


class TestSplitDataset:
    def test_benchmark_scale_counts(self):
        manifest = _manifest(50_000, 10_000)
        split = split_dataset(manifest, 0.5, seed=1)
        assert len(split.known_train) == 25_000
        assert len(split.known_test) == 5_000
        assert len(split.unknown_train) == 25_000
        assert len(split.unknown_test) == 5_000

    def test_small_fraction(self):
        split = split_dataset(_manifest(100, 100), 0.1, seed=1)
        assert len(split.known_train) == 10 and len(split.unknown_train) == 90
        assert len(split.known_test) == 10 and len(split.unknown_test) == 90

    def test_seeded_reproducibility(self):
        manifest = _manifest(50, 50)
        assert split_dataset(manifest, 0.3, seed=2) == split_dataset(manifest, 0.3, seed=2)
        assert split_dataset(manifest, 0.3, seed=2) != split_dataset(manifest, 0.3, seed=3)

    def test_disjoint_and_exhaustive(self):
        manifest = _manifest(37, 23)
        split = split_dataset(manifest, 0.4, seed=5)
        sets = [set(split.known_train), set(split.known_test),
                set(split.unknown_train), set(split.unknown_test)]
        union = set().union(*sets)
        assert sum(len(s) for s in sets) == len(union) == 60

    def test_rejects_bad_fraction_or_tiny_class(self):
        with pytest.raises(InvalidInputError):
            split_dataset(_manifest(10, 10), 1.0, seed=0)
        with pytest.raises(InvalidInputError):
            split_dataset(_manifest(2, 50), 0.1, seed=0)  # floor -> 0 members known


class TestComputeMetrics:
    def test_perfect_predictions(self):
        r = compute_metrics(["member", "nonmember"], ["member", "nonmember"])
        assert (r.accuracy, r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0, 1.0)

    def test_always_member_predictor(self):
        r = compute_metrics(["member"] * 10, ["member"] * 5 + ["nonmember"] * 5)
        assert r.accuracy == 0.5 and r.precision == 0.5 and r.recall == 1.0
        assert r.f1 == pytest.approx(2.0 / 3.0)

    def test_confusion_example(self):
        preds = ["member"] * 3 + ["member"] + ["nonmember"] * 4 + ["nonmember"] * 2
        truth = ["member"] * 3 + ["nonmember"] + ["nonmember"] * 4 + ["member"] * 2
        r = compute_metrics(preds, truth)
        assert (r.tp, r.fp, r.tn, r.fn) == (3, 1, 4, 2)
        assert r.accuracy == pytest.approx(0.7)
        assert r.precision == pytest.approx(0.75)
        assert r.recall == pytest.approx(0.6)
        assert r.f1 == pytest.approx(2 / 3, abs=1e-4)

    def test_identities_hold(self):
        preds = ["member", "nonmember", "member", "member", "nonmember"]
        truth = ["member", "member", "nonmember", "member", "nonmember"]
        r = compute_metrics(preds, truth)
        assert r.accuracy == (r.tp + r.tn) / (r.tp + r.fp + r.tn + r.fn)
        assert r.precision == r.tp / (r.tp + r.fp)
        assert r.recall == r.tp / (r.tp + r.fn)
        assert abs(r.f1 - 2 * r.precision * r.recall / (r.precision + r.recall)) < 1e-12

    def test_zero_denominators(self):
        r = compute_metrics(["nonmember", "nonmember"], ["member", "nonmember"])
        assert r.precision == 0.0 and r.f1 == 0.0

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            compute_metrics(["member"], ["member", "nonmember"])


class TestScsrSearch:
    def test_single_candidate_skips_stage_two(self):
        result = scsr_search(lambda b: 0.9, ScsrSearchConfig(stage1_candidates=(0.3,)))
        assert result.chosen_bound == 0.3
        assert all(p.stage == 1 for p in result.trace)
        assert len(result.trace) == 1

    def test_hand_traced_linear_evaluator(self):
        # acc(b) = 0.8 - 0.3 b over {0.3, 0.4, 0.5}, step 0.02 -> 0.5 wins
        result = scsr_search(lambda b: 0.8 - 0.3 * b, ScsrSearchConfig())
        assert result.chosen_bound == 0.5
        stage2 = [p.bound for p in result.trace if p.stage == 2]
        assert stage2 == pytest.approx([0.42, 0.44, 0.46, 0.48])

    def test_constant_evaluator_returns_smallest_stage2_bound(self):
        result = scsr_search(lambda b: 0.6, ScsrSearchConfig())
        stage2 = [p.bound for p in result.trace if p.stage == 2]
        assert result.chosen_bound == min(stage2)

    def test_trace_invariants(self):
        def bumpy(b):
            return 0.7 + 0.1 * np.sin(17 * b)

        result = scsr_search(bumpy, ScsrSearchConfig(stage1_candidates=(0.2, 0.35, 0.6)))
        stage1 = [p for p in result.trace if p.stage == 1]
        best_two = sorted(stage1, key=lambda p: (p.accuracy, p.bound))[:2]
        lo, hi = sorted(p.bound for p in best_two)
        for p in result.trace:
            if p.stage == 2:
                assert lo < p.bound < hi
        assert all(result.chosen_accuracy <= p.accuracy for p in result.trace)

    def test_evals_per_point_averages(self):
        calls = []

        def noisy(b):
            calls.append(b)
            return 0.5

        scsr_search(noisy, ScsrSearchConfig(stage1_candidates=(0.3, 0.4), evals_per_point=3))
        assert len([c for c in calls if c == 0.3]) == 3

    def test_config_validation(self):
        with pytest.raises(InvalidInputError):
            ScsrSearchConfig(stage1_candidates=(0.5, 0.3))
        with pytest.raises(InvalidInputError):
            ScsrSearchConfig(stage1_candidates=(0.0, 0.3))
        with pytest.raises(InvalidInputError):
            ScsrSearchConfig(stage2_step=0.0)

    def test_sharpness_schedule_monotone(self):
        base = pc.SyntheticEncoderConfig(seed=0, member_sharpness=8.0, nonmember_sharpness=2.0)
        taus = [scsr_sharpness(b, base) for b in (0.1, 0.3, 0.5, 0.7, 0.9)]
        assert all(a > b for a, b in zip(taus, taus[1:]))
        assert all(2.0 < t < 8.0 for t in taus)


class TestExperiments:
    def test_partial_experiment_structure_and_persistence(self, tmp_path):
        manifest, keys, binding, attack = _small_setup()
        out = tmp_path / "run"
        report = run_attack_experiment(manifest, binding, attack, 0.5, 4, out)
        assert report.tp + report.fp + report.tn + report.fn == 40
        assert report.config["setting"] == "partial"
        for name in ("features_known.pcf1", "features_eval.pcf1", "attacker.pcat",
                     "report.json", "metrics.csv", "predictions.csv"):
            assert (out / name).exists(), name
        on_disk = json.loads((out / "report.json").read_text())
        assert on_disk["accuracy"] == report.accuracy
        assert "timing_s" not in on_disk

    def test_rerun_bit_identical(self, tmp_path):
        manifest, keys, binding, attack = _small_setup()
        a, b = tmp_path / "a", tmp_path / "b"
        run_attack_experiment(manifest, binding, attack, 0.5, 4, a)
        run_attack_experiment(manifest, binding, attack, 0.5, 4, b)
        for name in ("features_known.pcf1", "features_eval.pcf1", "attacker.pcat", "report.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_shadow_with_same_pair_matches_partial(self):
        manifest, keys, binding, attack = _small_setup()
        partial = run_attack_experiment(manifest, binding, attack, 0.5, 4)
        shadow = run_shadow_experiment(manifest, binding, manifest, binding, attack,
                                       known_fraction=0.5, split_seed=4)
        assert shadow.accuracy == partial.accuracy
        assert (shadow.tp, shadow.fp, shadow.tn, shadow.fn) == (
            partial.tp, partial.fp, partial.tn, partial.fn
        )

    def test_shadow_transfer_with_signal(self):
        src_manifest, src_keys, src_binding, attack = _small_setup(seed=11)
        tgt_manifest, tgt_keys = generate_synthetic_dataset(40, 40, (32, 32, 3), seed=77)
        tgt_syn = pc.SyntheticEncoderConfig(
            seed=6, member_sharpness=8.0, nonmember_sharpness=2.0, member_registry=tgt_keys
        )
        tgt_binding = pc.EncoderBinding(kind="synthetic", feature_dim=32, map_h=4, map_w=4,
                                        synthetic=tgt_syn)
        report = run_shadow_experiment(src_manifest, src_binding, tgt_manifest, tgt_binding,
                                       attack, known_fraction=0.5, split_seed=4)
        assert report.accuracy >= 0.65
        assert report.config["setting"] == "shadow"

    def test_shadow_feature_length_mismatch_rejected(self):
        manifest, keys, binding, attack = _small_setup()
        from dataclasses import replace
        target_attack = replace(attack, crop=replace(attack.crop, m=8))
        with pytest.raises(InvalidInputError):
            run_shadow_experiment(manifest, binding, manifest, binding, attack,
                                  target_attack=target_attack)

    def test_knowledge_sweep_reports_and_csv(self, tmp_path):
        manifest, keys, binding, attack = _small_setup(members=60, nonmembers=60)
        out = tmp_path / "sweep"
        reports = knowledge_sweep(manifest, binding, attack, [0.2, 0.4, 0.6], 4, out)
        assert len(reports) == 3
        lines = (out / "sweep.csv").read_text().strip().splitlines()
        assert lines[0] == "fraction,accuracy,precision,recall,f1"
        assert len(lines) == 4

    def test_sweep_rejects_bad_fraction(self):
        manifest, keys, binding, attack = _small_setup()
        with pytest.raises(InvalidInputError):
            knowledge_sweep(manifest, binding, attack, [0.5, 1.2])

    def test_sweep_accuracy_does_not_degrade_with_knowledge(self):
        # frozen regression on the strong-separation encoder: more adversary
        # knowledge never costs more than 3 accuracy points
        manifest, keys = generate_synthetic_dataset(200, 200, (32, 32, 3), seed=61)
        syn = pc.SyntheticEncoderConfig(seed=5, member_sharpness=8.0, nonmember_sharpness=2.0,
                                        member_registry=keys)
        binding = pc.EncoderBinding(kind="synthetic", feature_dim=32, map_h=4, map_w=4,
                                    synthetic=syn)
        attack = AttackConfig(
            kind="partcrop",
            crop=pc.PartCropConfig(m=32, seed=1),
            train=pc.TrainConfig(epochs=40, batch_size=20, hidden=64, seed=2),
            benchmark_seed=3,
        )
        low, high = knowledge_sweep(manifest, binding, attack, [0.1, 0.5], split_seed=4)
        assert high.accuracy >= low.accuracy - 0.03


class TestPartResponseCurve:
    def test_length_and_order(self, tmp_path):
        manifest, keys, binding, _ = _small_setup()
        img = load_entry_image(manifest, manifest.entries[0])
        csv_path = tmp_path / "curve.csv"
        ranked = part_response_curve(binding, img, CropBox(6, 6, 14, 14), csv_path=csv_path)
        assert ranked.shape == (16,)
        assert np.all(np.diff(ranked) <= 0)
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "rank,similarity"
        assert len(lines) == 17

    def test_constant_map_encoder_gives_flat_curve(self):
        class ConstantMapEncoder:
            feature_dim = 2

            def encode_map(self, image, image_id=None):
                return pc.FeatureMap(np.tile([1.0, 2.0], (3, 3, 1)))

            def encode_patch_batch(self, patches):
                return np.tile([1.0, 2.0], (len(patches), 1))

        img = np.full((16, 16, 3), 0.25, dtype=np.float32)
        ranked = part_response_curve(ConstantMapEncoder(), img, CropBox(0, 0, 16, 16))
        np.testing.assert_allclose(ranked, ranked[0], atol=1e-12)

    def test_member_curve_steeper_than_unregistered(self):
        # frozen regression at tau 8/2: mean top-10% similarity gap between
        # the registered and unregistered encoding of the same images > 0
        manifest, keys = generate_synthetic_dataset(30, 30, (32, 32, 3), seed=78)
        member_enc = pc.SyntheticEncoder(
            pc.SyntheticEncoderConfig(seed=5, member_sharpness=8.0, nonmember_sharpness=2.0,
                                      member_registry=keys), 32, 4, 4)
        plain_enc = pc.SyntheticEncoder(
            pc.SyntheticEncoderConfig(seed=5, member_sharpness=8.0, nonmember_sharpness=2.0),
            32, 4, 4)
        box = CropBox(6, 6, 14, 14)
        gaps = []
        for e in manifest.entries:
            if e.membership != "member":
                continue
            img = load_entry_image(manifest, e)
            top_k = 2  # 10% of 16 positions, rounded up
            cm = part_response_curve(member_enc, img, box)
            c0 = part_response_curve(plain_enc, img, box)
            gaps.append(float(cm[:top_k].mean() - c0[:top_k].mean()))
        assert np.mean(gaps) > 0.02

    def test_box_outside_image_rejected(self):
        manifest, keys, binding, _ = _small_setup()
        img = load_entry_image(manifest, manifest.entries[0])
        with pytest.raises(InvalidInputError):
            part_response_curve(binding, img, CropBox(30, 30, 10, 10))


class TestScsrEvaluator:
    def test_defense_weakens_attack(self):
        manifest, keys, binding, attack = _small_setup(members=80, nonmembers=80)
        evaluator = make_scsr_evaluator(manifest, keys, binding, attack, 0.5, 4)
        strong = evaluator(0.1)
        weak = evaluator(0.9)
        assert strong > weak

    def test_requires_synthetic_binding(self):
        manifest, keys, binding, attack = _small_setup()
        remote = pc.EncoderBinding(kind="remote", feature_dim=32, map_h=4, map_w=4, url="http://x")
        with pytest.raises(InvalidInputError):
            make_scsr_evaluator(manifest, keys, remote, attack)
