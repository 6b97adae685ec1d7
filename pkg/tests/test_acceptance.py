"""Acceptance gate: one test per release criterion, each printing a verdict line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
PASS/FAIL lines with their measured margins.
"""

import json
import time

import numpy as np
import pytest

from smdn.calibration import fit_temperature_from_logits, softermax, softmax
from smdn.cli import main as cli_main
from smdn.evaluation import evaluate, macro_scores
from smdn.fixtures import generate_bundle, nearest_centroid_rejector, preset
from smdn.harness import evaluate_run
from smdn.lof import fit_lof, lof_scores
from smdn.pipeline import PipelineConfig, fit_pipeline
from smdn.thresholds import class_threshold, fit_thresholds
from smdn.data import ExampleRecord, LabelSpace

from oracles import (
    brute_force_lof,
    direct_ece,
    direct_macro_scores,
    grid_search_temperature_vectorized,
)


def verdict(name: str, ok: bool, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def sampled_label_logits(n, n_classes, seed, scale=2.0):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, n_classes)) * scale
    p = softmax(z)
    u = rng.random(n)
    gold = (p.cumsum(axis=1) < u[:, None]).sum(axis=1).clip(0, n_classes - 1)
    return z, gold


def test_lof_oracle_equivalence():
    """20 random datasets: fitted scores and novelty scores vs the literal
    brute-force reference, 1e-9, under 5 seconds total."""
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    ks = (3, 5, 20)
    for trial in range(20):
        k = ks[trial % 3]
        n = int(rng.integers(max(k + 1, 25), 201))
        d = int(rng.integers(1, 9))
        train = rng.standard_normal((n, d)) * rng.uniform(0.3, 3.0)
        queries = np.vstack(
            [rng.standard_normal((8, d)), rng.standard_normal((4, d)) * 8, train[:3]]
        )
        model = fit_lof(train, k=k, alpha=2.0, calib_features=queries)
        in_sample = brute_force_lof(train.tolist(), k=k)
        novelty = brute_force_lof(train.tolist(), k=k, queries=queries.tolist())
        worst = max(worst, float(np.abs(model.train_lof - in_sample).max()))
        worst = max(worst, float(np.abs(lof_scores(queries, model) - novelty).max()))
    elapsed = time.perf_counter() - t0
    verdict(
        "lof-oracle-equivalence",
        worst <= 1e-9 and elapsed < 5.0,
        f"max |diff| = {worst:.3g} (tol 1e-9), {elapsed:.2f}s (< 5s)",
    )


def test_temperature_recovery():
    """Sampled-label bundles recover T~1; scaled logits recover c*T; the
    golden-section fit agrees with the exhaustive grid to 1e-3."""
    z, gold = sampled_label_logits(2000, 4, seed=101)
    details = []
    ok = True
    for c in (1.0, 1.5, 2.0, 3.0):
        fit = fit_temperature_from_logits(z * c, gold)
        grid_t, _ = grid_search_temperature_vectorized(z * c, gold)
        agree = abs(fit.temperature - grid_t) <= 1e-3
        if c == 1.0:
            in_range = 0.95 <= fit.temperature <= 1.05
        else:
            in_range = abs(fit.temperature - c) <= 0.05 * c
        ok = ok and agree and in_range
        details.append(f"c={c}: T={fit.temperature:.4f} grid={grid_t:.4f}")
    verdict("temperature-recovery", ok, "; ".join(details))


def test_argmax_invariance():
    """Temperature scaling never changes the argmax: 10,000 vectors x 4 T's."""
    rng = np.random.default_rng(7)
    z = rng.standard_normal((10_000, 6)) * rng.uniform(0.5, 5.0, size=(10_000, 1))
    base = softmax(z).argmax(axis=1)
    mismatches = 0
    for t in (0.5, 1.0, 1.44, 5.0):
        mismatches += int((softermax(z, t).argmax(axis=1) != base).sum())
    verdict(
        "argmax-invariance",
        mismatches == 0,
        f"{mismatches} mismatches over 40,000 checks",
    )


def test_threshold_law():
    """Fuzzed (mu, sigma, alpha) triples and fitted models always satisfy
    t = max(0.5, mu - alpha*sigma) >= 0.5."""
    rng = np.random.default_rng(12)
    bad = 0
    for _ in range(10_000):
        mu = float(rng.uniform(0, 1))
        sigma = float(rng.uniform(0, 1))
        alpha = float(rng.uniform(0, 8))
        t = class_threshold(mu, sigma, alpha)
        if t != max(0.5, mu - alpha * sigma) or t < 0.5:
            bad += 1
    # fitted models store recomputable stats
    space = LabelSpace(class_names=("a", "b", "c"), feature_dim=1)
    records = tuple(
        ExampleRecord(
            id=f"r{i}", split="train", gold_label=space.class_names[i % 3],
            logits=tuple(rng.standard_normal(3) * 3), features=(0.0,),
        )
        for i in range(90)
    )
    for alpha in (0.0, 1.0, 2.0, 4.0):
        model = fit_thresholds(records, space, temperature=1.3, alpha=alpha)
        for c in model.per_class:
            if c.t != max(0.5, c.mu - alpha * c.sigma) or c.t < 0.5:
                bad += 1
    verdict("threshold-law", bad == 0, f"{bad} violations over 10,012 thresholds")


def test_boundary_anchoring():
    """Both fitted Platt scalers map their decision boundary to 0.5 +- 1e-12."""
    worst = 0.0
    for name in ("gaussian-3+1", "gaussian-5+2"):
        bundle = generate_bundle(preset(name), 7)
        pipe = fit_pipeline(bundle, PipelineConfig())
        p_sm = pipe.smdn.platt_sm.transform(0.0)
        p_lof = pipe.smdn.platt_lof.transform(pipe.smdn.lof_model.threshold)
        worst = max(worst, abs(p_sm - 0.5), abs(p_lof - 0.5))
    verdict("boundary-anchoring", worst <= 1e-12, f"max |P(boundary) - 0.5| = {worst:.3g}")


def test_metric_oracle():
    """Macro precision/recall/F1 on 50 random confusion matrices match the
    direct formula evaluation exactly; ECE matches direct summation to 1e-12."""
    rng = np.random.default_rng(31)
    mismatches = 0
    for _ in range(50):
        n = int(rng.integers(2, 10))
        conf = rng.integers(0, 30, size=(n, n))
        if rng.random() < 0.3:
            conf[int(rng.integers(0, n))] = 0
        if macro_scores(conf) != direct_macro_scores(conf.tolist()):
            mismatches += 1

    from smdn.calibration import ece_report

    worst_ece = 0.0
    space = LabelSpace(class_names=("a", "b", "c"), feature_dim=1)
    for seed in range(5):
        z = np.random.default_rng(seed).standard_normal((300, 3)) * 2
        gold = np.random.default_rng(seed + 100).integers(0, 3, size=300)
        records = tuple(
            ExampleRecord(
                id=f"e{i}", split="val", gold_label=space.class_names[g],
                logits=tuple(float(v) for v in row), features=(0.0,),
            )
            for i, (row, g) in enumerate(zip(z, gold))
        )
        report = ece_report(records, space, temperature=1.44, n_bins=15)
        p = softermax(z, 1.44)
        direct = direct_ece(p.max(axis=1).tolist(), (p.argmax(axis=1) == gold).tolist(), 15)
        worst_ece = max(worst_ece, abs(report.ece - direct))
    verdict(
        "metric-oracle",
        mismatches == 0 and worst_ece <= 1e-12,
        f"{mismatches} macro-F1 mismatches; max ECE diff = {worst_ece:.3g}",
    )


@pytest.fixture(scope="module")
def fixture_suite_reports():
    out = {}
    for name in ("gaussian-3+1", "gaussian-5+2"):
        spec = preset(name)
        bundle = generate_bundle(spec, 7)
        out[name] = (spec, bundle, evaluate_run(bundle, PipelineConfig()))
    return out


def test_end_to_end_separable(fixture_suite_reports):
    """gaussian-3+1: joint prediction's unknown F1 >= 0.90, beats the plain
    softmax baseline, and the nearest-centroid reference clears 0.95."""
    t0 = time.perf_counter()
    spec, bundle, reports = fixture_suite_reports["gaussian-3+1"]
    oracle_f1 = evaluate(nearest_centroid_rejector(spec, bundle), bundle).f1_unknown
    smdn_f1 = reports["smdn"].f1_unknown
    base_f1 = reports["softmax_t"].f1_unknown
    elapsed = time.perf_counter() - t0
    verdict(
        "end-to-end-separable",
        smdn_f1 >= 0.90 and smdn_f1 >= base_f1 and oracle_f1 >= 0.95 and elapsed < 30,
        f"smdn={smdn_f1:.4f} (>= 0.90), softmax_t={base_f1:.4f}, "
        f"nearest-centroid={oracle_f1:.4f} (>= 0.95), {elapsed:.1f}s (< 30s)",
    )


def test_method_ordering(fixture_suite_reports):
    """Unknown-F1 of the joint prediction stays within 0.05 of the best
    sub-method on every bundled fixture."""
    ok = True
    details = []
    for name, (_, _, reports) in fixture_suite_reports.items():
        smdn_f1 = reports["smdn"].f1_unknown
        best_sub = max(reports["softermax"].f1_unknown, reports["lof"].f1_unknown)
        ok = ok and smdn_f1 >= best_sub - 0.05
        details.append(f"{name}: smdn={smdn_f1:.4f} vs best-sub={best_sub:.4f}")
    verdict("method-ordering", ok, "; ".join(details))


def test_experiment_determinism(tmp_path):
    """Two identical experiment invocations produce byte-identical aggregates."""
    args = [
        "experiment", "--preset", "gaussian-3+1", "--runs", "2", "--ratio", "0.5",
        "--seed", "11", "--k", "10", "--methods", "softmax_t", "lof", "smdn",
    ]
    raws = []
    for sub in ("one", "two"):
        out = tmp_path / sub
        assert cli_main(args + ["--out-dir", str(out)]) == 0
        raws.append((out / "aggregate.json").read_bytes())
    identical = raws[0] == raws[1]
    payload = json.loads(raws[0])
    verdict(
        "experiment-determinism",
        identical,
        f"aggregate.json identical across invocations "
        f"({len(raws[0])} bytes, {payload['runs']} runs)",
    )
