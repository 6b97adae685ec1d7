"""Command-line surface for the open-set post-processing pipeline.

Exit codes: 0 success, 1 validation or pipeline error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import fixtures as fixtures_mod
from . import harness
from .data import BundleValidationError, load_bundle, save_bundle
from .calibration import ece_report, fit_temperature
from .evaluation import evaluate
from .kernels import BACKEND
from .pipeline import FittedPipeline, PipelineConfig, fit_pipeline, predict_rows
from .thresholds import METHODS


def _add_bundle_args(p: argparse.ArgumentParser):
    p.add_argument("--manifest", required=True, help="label-space manifest.json")
    p.add_argument("--records", required=True, help="records.csv with logits and features")


def _add_search_args(p: argparse.ArgumentParser):
    p.add_argument("--t-lo", type=float, default=0.25, help="temperature search lower bound")
    p.add_argument("--t-hi", type=float, default=8.0, help="temperature search upper bound")
    p.add_argument("--tol", type=float, default=1e-4, help="golden-section tolerance on log T")


def _add_fit_args(p: argparse.ArgumentParser):
    p.add_argument("--alpha", type=float, default=2.0, help="std-dev multiplier for thresholds")
    p.add_argument("--k", type=int, default=20, help="neighbor count for the novelty detector")
    p.add_argument("--bins", type=int, default=15, help="reliability bin count for ECE")
    p.add_argument("--fusion-rule", choices=("mean", "max", "either"), default="mean",
                   help="how the two novelty probabilities combine")
    p.add_argument("--stat-split", choices=("train", "val"), default="train",
                   help="split used for the per-class threshold statistics")
    _add_search_args(p)


def _config_from_args(args) -> PipelineConfig:
    return PipelineConfig(
        alpha=args.alpha,
        k=args.k,
        n_bins=args.bins,
        fusion_rule=args.fusion_rule,
        stat_split=args.stat_split,
        t_lo=args.t_lo,
        t_hi=args.t_hi,
        tol=args.tol,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smdn",
        description="Turn an exported closed-set classifier into an open-set one "
        "(calibrated thresholds + feature-space novelty detection).",
    )
    parser.add_argument("--version", action="version", version="%(prog)s 0.1.0")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("calibrate", help="fit the softmax temperature on the val split",
                       formatter_class=fmt)
    _add_bundle_args(p)
    _add_search_args(p)
    p.add_argument("--bins", type=int, default=15, help="reliability bin count for the ECE report")
    p.add_argument("--out", required=True, help="output calib.json")

    p = sub.add_parser("fit", help="fit the full model (thresholds, novelty, fusion)",
                       formatter_class=fmt)
    _add_bundle_args(p)
    _add_fit_args(p)
    p.add_argument("--out-dir", required=True, help="model directory to create")

    p = sub.add_parser("predict", help="write open-set decisions for one method",
                       formatter_class=fmt)
    _add_bundle_args(p)
    p.add_argument("--model-dir", required=True, help="directory written by `fit`")
    p.add_argument("--method", choices=METHODS, default="smdn", help="decision rule")
    p.add_argument("--split", choices=("train", "val", "test"), default="test",
                   help="which split to predict")
    p.add_argument("--out", required=True, help="output predictions CSV")

    p = sub.add_parser("eval", help="score a predictions CSV against gold labels",
                       formatter_class=fmt)
    _add_bundle_args(p)
    p.add_argument("--predictions", required=True, help="CSV from `predict`")
    p.add_argument("--out", required=True, help="output report.json")

    p = sub.add_parser("sample-known", help="emit per-run known-class manifests "
                       "for the re-export protocol", formatter_class=fmt)
    _add_bundle_args(p)
    p.add_argument("--ratio", type=float, required=True, help="fraction of classes kept known")
    p.add_argument("--runs", type=int, default=10, help="number of runs")
    p.add_argument("--seed", type=int, default=0, help="root seed for all sampling")
    p.add_argument("--out-dir", required=True, help="directory for run_*/manifest.json")

    p = sub.add_parser("experiment", help="multi-run protocol with per-run fits and "
                       "an aggregate report", formatter_class=fmt)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(fixtures_mod.PRESETS),
                     help="self-contained synthetic preset")
    src.add_argument("--runs-dir", help="directory of run_*/ with manifests and re-exports")
    p.add_argument("--ratio", type=float, default=0.5, help="fraction of classes kept known")
    p.add_argument("--runs", type=int, default=10, help="number of runs (preset mode)")
    p.add_argument("--seed", type=int, default=0, help="root seed for all sampling")
    p.add_argument("--jobs", type=int, default=1, help="parallel runs (preset mode)")
    p.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS),
                   help="decision rules to evaluate")
    _add_fit_args(p)
    p.add_argument("--out-dir", required=True, help="directory for runs and aggregate.json")

    p = sub.add_parser("fixtures", help="write a deterministic synthetic bundle",
                       formatter_class=fmt)
    p.add_argument("--preset", choices=sorted(fixtures_mod.PRESETS), required=True,
                   help="synthetic dataset preset")
    p.add_argument("--seed", type=int, default=0, help="generation seed")
    p.add_argument("--out-dir", required=True, help="directory for manifest.json + records.csv")

    return parser


def _cmd_calibrate(args) -> int:
    bundle = load_bundle(args.manifest, args.records)
    val = bundle.split("val")
    fit = fit_temperature(val, bundle.label_space, t_lo=args.t_lo, t_hi=args.t_hi, tol=args.tol)
    Path(args.out).write_text(
        json.dumps(fit.to_json_dict(len(val)), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    # validation-only reliability, reported but never gated
    before = ece_report(val, bundle.label_space, temperature=1.0, n_bins=args.bins)
    after = ece_report(val, bundle.label_space, temperature=fit.temperature, n_bins=args.bins)
    print(
        f"temperature={fit.temperature:.6g} nll={fit.final_nll:.6g} "
        f"ece={before.ece:.4%} -> {after.ece:.4%} ({args.bins} bins) -> {args.out}"
    )
    return 0


def _cmd_fit(args) -> int:
    bundle = load_bundle(args.manifest, args.records)
    pipeline = fit_pipeline(bundle, _config_from_args(args))
    pipeline.save(args.out_dir)
    print(
        f"fitted model -> {args.out_dir} "
        f"(T={pipeline.temperature_fit.temperature:.4g}, "
        f"lof threshold={pipeline.smdn.lof_model.threshold:.4g}, backend={BACKEND})"
    )
    return 0


def _cmd_predict(args) -> int:
    bundle = load_bundle(args.manifest, args.records)
    pipeline = FittedPipeline.load(args.model_dir)
    if tuple(pipeline.smdn.class_names) != bundle.label_space.class_names:
        raise ValueError(
            "model classes do not match the bundle's label space; "
            "fit and predict must use the same export"
        )
    records = bundle.split(args.split)
    if not records:
        raise ValueError(f"split {args.split!r} has no records")
    rows = predict_rows(pipeline, records, args.method, bundle.label_space.unknown_label)
    harness.write_predictions_csv(args.out, rows)
    rejected = sum(1 for r in rows if r.decision == bundle.label_space.unknown_label)
    print(f"{len(rows)} predictions ({rejected} rejected as unknown) -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    bundle = load_bundle(args.manifest, args.records)
    decisions = harness.read_predictions_csv(args.predictions)
    report = evaluate(decisions, bundle)
    Path(args.out).write_text(
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"macro_f1_all={report.macro_f1_all:.4f} macro_f1_known={report.macro_f1_known:.4f} "
        f"f1_unknown={report.f1_unknown:.4f} -> {args.out}"
    )
    return 0


def _cmd_sample_known(args) -> int:
    bundle = load_bundle(args.manifest, args.records)
    manifests = harness.emit_run_manifests(bundle, args.ratio, args.runs, args.seed, args.out_dir)
    print(f"{len(manifests)} run manifests -> {args.out_dir}")
    return 0


def _cmd_experiment(args) -> int:
    config = _config_from_args(args)
    if args.preset:
        aggregate = harness.run_experiment_preset(
            args.preset, args.runs, args.ratio, args.seed, args.out_dir,
            config=config, methods=tuple(args.methods), jobs=args.jobs,
        )
    else:
        aggregate = harness.run_experiment_bundles(
            args.runs_dir, args.out_dir, config=config, methods=tuple(args.methods)
        )
    for method, metrics in sorted(aggregate["methods"].items()):
        print(f"{method}: f1_unknown mean={metrics['f1_unknown']['mean']:.4f}")
    print(f"aggregate -> {Path(args.out_dir) / 'aggregate.json'}")
    return 0


def _cmd_fixtures(args) -> int:
    spec = fixtures_mod.preset(args.preset)
    bundle = fixtures_mod.generate_bundle(spec, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_bundle(bundle, out_dir / "manifest.json", out_dir / "records.csv")
    print(f"{len(bundle)} records ({spec.name}, seed {args.seed}) -> {out_dir}")
    return 0


_COMMANDS = {
    "calibrate": _cmd_calibrate,
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "eval": _cmd_eval,
    "sample-known": _cmd_sample_known,
    "experiment": _cmd_experiment,
    "fixtures": _cmd_fixtures,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (BundleValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
