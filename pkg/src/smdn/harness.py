"""Known-class sampling protocol and seeded multi-run experiments.

A run keeps a weighted random subset of classes as known, retrains/re-exports
the classifier on them, and mixes everything back at test time with dropped
classes relabeled unknown. Per-run classifier outputs must come from a
re-export (synthetic presets regenerate them analytically); the harness only
emits manifests for bundles it cannot re-derive.

All randomness flows from one seed through numpy's seed-sequence spawning, so
a fixed (inputs, seed) pair reproduces every run byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import fixtures
from .data import DatasetBundle, ExampleRecord, LabelSpace, load_bundle
from .evaluation import EvalReport, evaluate
from .pipeline import FittedPipeline, PipelineConfig, PredictionRow, fit_pipeline, predict_rows
from .thresholds import METHODS

SAMPLER_NAME = "weighted_without_replacement"
PREDICTION_HEADER = ["id", "decision", "p_sm", "p_lof", "p_joint", "confidence"]


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    seed: int
    known_ratio: float
    known_classes: tuple[str, ...]
    sampler: str = SAMPLER_NAME

    def __post_init__(self):
        if not self.known_classes:
            raise ValueError("a run must keep at least one known class")
        if not (0.0 < self.known_ratio < 1.0):
            raise ValueError(f"known_ratio must be in (0, 1), got {self.known_ratio}")

    def to_json_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "seed": self.seed,
            "known_ratio": self.known_ratio,
            "known_classes": list(self.known_classes),
            "sampler": self.sampler,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "RunManifest":
        return cls(
            run_id=str(d["run_id"]),
            seed=int(d["seed"]),
            known_ratio=float(d["known_ratio"]),
            known_classes=tuple(d["known_classes"]),
            sampler=str(d.get("sampler", SAMPLER_NAME)),
        )


def sample_known_classes(
    space: LabelSpace,
    train_counts: Mapping[str, int] | Sequence[int],
    ratio: float,
    seed,
    run_id: str = "run",
) -> RunManifest:
    """Pick round(ratio*N) known classes, frequent classes more likely.

    Weighted sampling without replacement via exponential keys: each class
    draws u~U(0,1) and keeps key u**(1/count); the top keys win. Inclusion
    odds grow with the training count while rare classes keep a chance.
    """
    if not (0.0 < ratio < 1.0):
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    if isinstance(train_counts, Mapping):
        counts = np.array([train_counts[name] for name in space.class_names], dtype=np.float64)
    else:
        counts = np.asarray(train_counts, dtype=np.float64)
    if counts.shape != (space.n_classes,):
        raise ValueError(f"need one training count per class, got shape {counts.shape}")
    if np.any(counts <= 0):
        raise ValueError("training counts must all be positive")

    n = space.n_classes
    m = int(math.floor(ratio * n + 0.5))
    if m < 1 or m >= n:
        raise ValueError(
            f"ratio {ratio} keeps {m} of {n} classes; a run needs a non-empty strict subset"
        )
    rng = np.random.default_rng(seed)
    keys = rng.random(n) ** (1.0 / counts)
    winners = np.argsort(-keys, kind="stable")[:m]
    selected = tuple(space.class_names[i] for i in sorted(winners.tolist()))
    if isinstance(seed, (int, np.integer)):
        seed_int = int(seed)
    else:
        # derived, stable identifier for spawned seed sequences
        seed_int = int(np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key).generate_state(1)[0])
    return RunManifest(run_id=run_id, seed=seed_int, known_ratio=ratio, known_classes=selected)


def restrict_bundle(bundle: DatasetBundle, manifest: RunManifest) -> DatasetBundle:
    """Apply a run manifest: drop unknown-class train/val, relabel their test gold.

    When the bundle's label space already equals the manifest's known classes
    (a per-run re-export), the result is ready to fit. Otherwise the logits
    still span dropped classes, so the result is marked requires-reexport.
    """
    space = bundle.label_space
    known = set(manifest.known_classes)
    if not known.issubset(space.class_names):
        raise ValueError("manifest classes are not a subset of the bundle's label space")
    if known == set(space.class_names):
        already_restricted = tuple(space.class_names) == tuple(manifest.known_classes)
        if not already_restricted:
            raise ValueError("manifest class order does not match the re-exported bundle")
        return bundle
    if len(known) >= space.n_classes:
        raise ValueError("a run must drop at least one class")

    records: list[ExampleRecord] = []
    for rec in bundle.records:
        if rec.gold_label in known or rec.gold_label == space.unknown_label:
            records.append(rec)
        elif rec.split == "test":
            records.append(replace(rec, gold_label=space.unknown_label))
        # train/val records of dropped classes vanish
    return DatasetBundle(label_space=space, records=tuple(records), requires_reexport=True)


def train_counts(bundle: DatasetBundle) -> dict[str, int]:
    counts = {name: 0 for name in bundle.label_space.class_names}
    for rec in bundle.split("train"):
        counts[rec.gold_label] += 1
    return counts


def write_predictions_csv(path, rows: Sequence[PredictionRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PREDICTION_HEADER)
        for r in rows:
            writer.writerow(
                [r.id, r.decision, repr(r.p_sm), repr(r.p_lof), repr(r.p_joint), repr(r.confidence)]
            )


def read_predictions_csv(path) -> dict[str, str]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(PREDICTION_HEADER) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"predictions file {path} is missing columns {sorted(missing)}")
        return {row["id"]: row["decision"] for row in reader}


def evaluate_run(
    bundle: DatasetBundle,
    config: PipelineConfig,
    methods: Sequence[str] = METHODS,
    out_dir=None,
    pipeline: FittedPipeline | None = None,
) -> dict[str, EvalReport]:
    """Fit on a run bundle, predict the test split per method, and score it."""
    if pipeline is None:
        pipeline = fit_pipeline(bundle, config)
    test = bundle.split("test")
    unknown = bundle.label_space.unknown_label
    reports: dict[str, EvalReport] = {}
    for method in methods:
        rows = predict_rows(pipeline, test, method, unknown)
        reports[method] = evaluate({r.id: r.decision for r in rows}, bundle)
        if out_dir is not None:
            write_predictions_csv(Path(out_dir) / f"predictions_{method}.csv", rows)
    if out_dir is not None:
        report_payload = {m: reports[m].to_json_dict() for m in reports}
        (Path(out_dir) / "report.json").write_text(
            json.dumps(report_payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return reports


_METRICS = ("macro_f1_all", "macro_f1_known", "f1_unknown")


def _aggregate(per_run: list[dict[str, EvalReport]], methods: Sequence[str]) -> dict:
    out: dict = {}
    for method in methods:
        method_out = {}
        for metric in _METRICS:
            values = [getattr(run[method], metric) for run in per_run]
            mean = sum(values) / len(values)
            if len(values) > 1:
                var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
                half = 1.96 * math.sqrt(var / len(values))
            else:
                half = 0.0
            method_out[metric] = {
                "mean": mean,
                "ci95": [mean - half, mean + half],
                "per_run": values,
            }
        out[method] = method_out
    return out


def _preset_run(args) -> tuple[str, dict[str, EvalReport]]:
    preset_name, ratio, run_id, class_ss, data_ss, config, methods, run_dir = args
    spec = fixtures.preset(preset_name)
    full_space = LabelSpace(class_names=spec.class_names, feature_dim=spec.feature_dim)
    counts = [spec.train_per_class] * spec.n_known
    manifest = sample_known_classes(full_space, counts, ratio, class_ss, run_id)
    subset = [spec.class_names.index(name) for name in manifest.known_classes]
    bundle = fixtures.generate_bundle(spec, data_ss, subset)
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    reports = evaluate_run(bundle, config, methods, out_dir=run_dir)
    return run_id, reports


def run_experiment_preset(
    preset_name: str,
    runs: int,
    ratio: float,
    seed: int,
    out_dir,
    config: PipelineConfig = PipelineConfig(),
    methods: Sequence[str] = METHODS,
    jobs: int = 1,
) -> dict:
    """Self-contained protocol on a synthetic preset: per-run regeneration
    replaces the re-export step, so no external classifier is needed."""
    if runs < 1:
        raise ValueError("need at least one run")
    spec = fixtures.preset(preset_name)
    kept = int(math.floor(ratio * spec.n_known + 0.5))
    if kept < 2:
        raise ValueError(
            f"ratio {ratio} keeps {kept} of {spec.n_known} classes, but a run bundle "
            f"needs at least 2 known classes; raise the ratio or pick a larger preset"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    root = np.random.SeedSequence(seed)
    children = root.spawn(runs)
    tasks = []
    for r, child in enumerate(children):
        class_ss, data_ss = child.spawn(2)
        run_id = f"run_{r:03d}"
        tasks.append(
            (preset_name, ratio, run_id, class_ss, data_ss, config, tuple(methods), str(out_dir / run_id))
        )
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_preset_run, tasks))
    else:
        results = [_preset_run(t) for t in tasks]
    results.sort(key=lambda rr: rr[0])
    per_run = [reports for _, reports in results]
    aggregate = {
        "preset": preset_name,
        "runs": runs,
        "ratio": ratio,
        "seed": seed,
        "methods": _aggregate(per_run, methods),
    }
    (out_dir / "aggregate.json").write_text(
        json.dumps(aggregate, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return aggregate


def run_experiment_bundles(
    runs_dir,
    out_dir,
    config: PipelineConfig = PipelineConfig(),
    methods: Sequence[str] = METHODS,
) -> dict:
    """Phase-two protocol: evaluate re-exported per-run bundles.

    Each runs_dir/run_*/ must hold manifest.json plus an export/ directory with
    the re-exported manifest.json and records.csv for that run's classes.
    """
    runs_dir = Path(runs_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run_dirs = sorted(p for p in runs_dir.iterdir() if p.is_dir() and p.name.startswith("run_"))
    if not run_dirs:
        raise ValueError(f"no run_* directories under {runs_dir}")
    per_run = []
    for run_dir in run_dirs:
        manifest = RunManifest.from_json_dict(
            json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
        )
        export_dir = run_dir / "export"
        bundle = load_bundle(export_dir / "manifest.json", export_dir / "records.csv")
        bundle = restrict_bundle(bundle, manifest)
        if bundle.requires_reexport:
            raise ValueError(
                f"{run_dir.name}: export does not match the manifest's classes; "
                "re-export the classifier outputs for exactly those classes"
            )
        run_out = out_dir / run_dir.name
        run_out.mkdir(parents=True, exist_ok=True)
        (run_out / "manifest.json").write_text(
            json.dumps(manifest.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        per_run.append(evaluate_run(bundle, config, methods, out_dir=run_out))
    aggregate = {
        "runs": len(per_run),
        "source": "re-exported bundles",
        "methods": _aggregate(per_run, methods),
    }
    (out_dir / "aggregate.json").write_text(
        json.dumps(aggregate, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return aggregate


def emit_run_manifests(
    bundle: DatasetBundle,
    ratio: float,
    runs: int,
    seed: int,
    out_dir,
) -> list[RunManifest]:
    """Phase one of the re-export protocol: write one manifest per run."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    counts = train_counts(bundle)
    root = np.random.SeedSequence(seed)
    manifests = []
    for r, child in enumerate(root.spawn(runs)):
        run_id = f"run_{r:03d}"
        manifest = sample_known_classes(bundle.label_space, counts, ratio, child, run_id)
        run_dir = out_dir / run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "manifest.json").write_text(
            json.dumps(manifest.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        manifests.append(manifest)
    return manifests
