import json

import numpy as np
import pytest

from smdn.data import DatasetBundle, ExampleRecord, LabelSpace, UNKNOWN_LABEL
from smdn.harness import (
    RunManifest,
    emit_run_manifests,
    restrict_bundle,
    run_experiment_preset,
    sample_known_classes,
    train_counts,
)
from smdn.pipeline import PipelineConfig

FAST_CONFIG = PipelineConfig(k=10)


def space_of(n):
    return LabelSpace(class_names=tuple(f"c{i}" for i in range(n)), feature_dim=2)


class TestSampler:
    def test_deterministic_given_seed(self):
        space = space_of(8)
        counts = [5, 10, 20, 40, 80, 160, 320, 640]
        a = sample_known_classes(space, counts, 0.5, seed=123)
        b = sample_known_classes(space, counts, 0.5, seed=123)
        assert a == b
        c = sample_known_classes(space, counts, 0.5, seed=124)
        assert isinstance(c, RunManifest)

    def test_selects_rounded_count(self):
        space = space_of(7)
        counts = [10] * 7
        for ratio, expect in ((0.25, 2), (0.5, 4), (0.75, 5)):
            manifest = sample_known_classes(space, counts, ratio, seed=1)
            assert len(manifest.known_classes) == expect

    def test_degenerate_ratios_rejected(self):
        space = space_of(4)
        counts = [10] * 4
        with pytest.raises(ValueError, match="strict subset"):
            sample_known_classes(space, counts, 0.05, seed=0)
        with pytest.raises(ValueError, match="strict subset"):
            sample_known_classes(space, counts, 0.95, seed=0)
        with pytest.raises(ValueError, match="in \\(0, 1\\)"):
            sample_known_classes(space, counts, 1.0, seed=0)

    def test_uniform_counts_inclusion_frequency(self):
        # every class's empirical inclusion rate within +-3 sigma of ratio
        space = space_of(8)
        counts = [50] * 8
        ratio, draws = 0.5, 10_000
        m = 4
        hits = np.zeros(8)
        for seed in range(draws):
            manifest = sample_known_classes(space, counts, ratio, seed=seed)
            for name in manifest.known_classes:
                hits[space.class_names.index(name)] += 1
        freq = hits / draws
        p = m / 8
        sigma = np.sqrt(p * (1 - p) / draws)
        assert (np.abs(freq - p) <= 3 * sigma).all(), freq

    def test_heavy_class_nearly_always_selected(self):
        space = space_of(8)
        counts = [9900] + [100 // 7] * 7
        chosen = 0
        draws = 2000
        for seed in range(draws):
            manifest = sample_known_classes(space, counts, 0.25, seed=seed)
            if "c0" in manifest.known_classes:
                chosen += 1
        assert chosen / draws > 0.99

    def test_zero_count_rejected(self):
        space = space_of(3)
        with pytest.raises(ValueError, match="positive"):
            sample_known_classes(space, [5, 0, 5], 0.5, seed=0)


def make_bundle():
    space = LabelSpace(class_names=("a", "b", "c", "d"), feature_dim=2)
    records = []
    for i, (split, gold) in enumerate(
        [("train", "a"), ("train", "b"), ("train", "c"), ("train", "d"),
         ("val", "a"), ("val", "b"), ("val", "c"), ("val", "d"),
         ("test", "a"), ("test", "b"), ("test", "c"), ("test", "d"),
         ("test", UNKNOWN_LABEL)]
    ):
        records.append(
            ExampleRecord(
                id=f"r{i}", split=split, gold_label=gold,
                logits=(0.1, 0.2, 0.3, 0.4), features=(0.0, float(i)),
            )
        )
    return DatasetBundle(label_space=space, records=tuple(records))


class TestRestrictBundle:
    def manifest(self, classes, ratio=0.5):
        return RunManifest(run_id="run_000", seed=1, known_ratio=ratio, known_classes=classes)

    def test_drops_train_and_relabels_test(self):
        bundle = make_bundle()
        restricted = restrict_bundle(bundle, self.manifest(("a", "b")))
        assert restricted.requires_reexport
        train_golds = {r.gold_label for r in restricted.split("train")}
        assert train_golds == {"a", "b"}
        val_golds = {r.gold_label for r in restricted.split("val")}
        assert val_golds == {"a", "b"}
        test_golds = [r.gold_label for r in restricted.split("test")]
        assert test_golds == ["a", "b", UNKNOWN_LABEL, UNKNOWN_LABEL, UNKNOWN_LABEL]

    def test_dropped_train_records_absent(self):
        bundle = make_bundle()
        restricted = restrict_bundle(bundle, self.manifest(("a", "c")))
        ids = {r.id for r in restricted.records}
        assert "r1" not in ids  # train record of dropped class b
        assert "r3" not in ids  # train record of dropped class d

    def test_matching_export_is_ready(self):
        space = LabelSpace(class_names=("a", "b"), feature_dim=1)
        records = (
            ExampleRecord(id="x", split="train", gold_label="a", logits=(0.0, 0.1), features=(0.0,)),
            ExampleRecord(id="y", split="test", gold_label=UNKNOWN_LABEL, logits=(0.0, 0.1), features=(0.0,)),
        )
        bundle = DatasetBundle(label_space=space, records=records)
        restricted = restrict_bundle(bundle, self.manifest(("a", "b")))
        assert restricted is bundle
        assert not restricted.requires_reexport

    def test_unknown_manifest_class_rejected(self):
        bundle = make_bundle()
        with pytest.raises(ValueError, match="subset"):
            restrict_bundle(bundle, self.manifest(("a", "z")))

    def test_train_counts(self):
        counts = train_counts(make_bundle())
        assert counts == {"a": 1, "b": 1, "c": 1, "d": 1}


class TestEmitManifests:
    def test_writes_one_manifest_per_run(self, tmp_path):
        bundle = make_bundle()
        manifests = emit_run_manifests(bundle, 0.5, 4, seed=9, out_dir=tmp_path)
        assert len(manifests) == 4
        for r in range(4):
            path = tmp_path / f"run_{r:03d}" / "manifest.json"
            assert path.exists()
            loaded = RunManifest.from_json_dict(json.loads(path.read_text()))
            assert loaded == manifests[r]

    def test_runs_differ_but_rerun_is_identical(self, tmp_path):
        bundle = make_bundle()
        first = emit_run_manifests(bundle, 0.5, 6, seed=9, out_dir=tmp_path / "a")
        second = emit_run_manifests(bundle, 0.5, 6, seed=9, out_dir=tmp_path / "b")
        assert first == second
        assert len({m.known_classes for m in first}) > 1


class TestExperimentPreset:
    def test_aggregate_structure_and_determinism(self, tmp_path):
        kwargs = dict(runs=2, ratio=0.5, seed=5, config=FAST_CONFIG, methods=("softmax_t", "smdn"))
        agg1 = run_experiment_preset("gaussian-3+1", out_dir=tmp_path / "one", **kwargs)
        agg2 = run_experiment_preset("gaussian-3+1", out_dir=tmp_path / "two", **kwargs)
        raw1 = (tmp_path / "one" / "aggregate.json").read_bytes()
        raw2 = (tmp_path / "two" / "aggregate.json").read_bytes()
        assert raw1 == raw2
        assert agg1 == agg2
        smdn_stats = agg1["methods"]["smdn"]["f1_unknown"]
        assert len(smdn_stats["per_run"]) == 2
        assert smdn_stats["ci95"][0] <= smdn_stats["mean"] <= smdn_stats["ci95"][1]
        run_dir = tmp_path / "one" / "run_000"
        assert (run_dir / "manifest.json").exists()
        assert (run_dir / "report.json").exists()
        assert (run_dir / "predictions_smdn.csv").exists()

    def test_ratio_keeping_one_class_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="at least 2 known classes"):
            run_experiment_preset(
                "gaussian-3+1", runs=1, ratio=0.25, seed=1, out_dir=tmp_path,
                config=FAST_CONFIG, methods=("smdn",),
            )

    def test_different_seeds_differ(self, tmp_path):
        agg1 = run_experiment_preset(
            "gaussian-3+1", runs=2, ratio=0.5, seed=5, out_dir=tmp_path / "a",
            config=FAST_CONFIG, methods=("smdn",),
        )
        agg2 = run_experiment_preset(
            "gaussian-3+1", runs=2, ratio=0.5, seed=6, out_dir=tmp_path / "b",
            config=FAST_CONFIG, methods=("smdn",),
        )
        assert agg1 != agg2

    def test_parallel_matches_serial(self, tmp_path):
        kwargs = dict(runs=3, ratio=0.5, seed=2, config=FAST_CONFIG, methods=("smdn",))
        serial = run_experiment_preset("gaussian-3+1", out_dir=tmp_path / "s", jobs=1, **kwargs)
        parallel = run_experiment_preset("gaussian-3+1", out_dir=tmp_path / "p", jobs=2, **kwargs)
        assert (tmp_path / "s" / "aggregate.json").read_bytes() == (
            tmp_path / "p" / "aggregate.json"
        ).read_bytes()
        assert serial == parallel
