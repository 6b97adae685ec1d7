"""End-to-end fitting of the open-set post-processor and batch prediction.

Fitting order: temperature on validation NLL, per-class thresholds on the
statistics split (at the fitted temperature, and again at T=1 for the
uncalibrated-threshold baseline), the novelty detector on training features
with its threshold from validation scores, then the two Platt slopes on
validation scores. The result is saved as a model directory bundling the
sub-model files under a single smdn-model.json.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import lof as lof_mod
from .calibration import TemperatureFit, fit_temperature
from .data import DatasetBundle, ExampleRecord, features_matrix, logits_matrix
from .fusion import (
    FUSION_RULES,
    PlattScaler,
    SmdnModel,
    fit_platt,
    novelty_probability,
    predict_smdn,
)
from .thresholds import (
    METHODS,
    OpenSetPrediction,
    SofterMaxModel,
    confidence_score,
    fit_thresholds,
    predict_open_set,
)

MODEL_FILE = "smdn-model.json"


@dataclass(frozen=True)
class PipelineConfig:
    alpha: float = 2.0
    k: int = 20
    n_bins: int = 15
    fusion_rule: str = "mean"
    stat_split: str = "train"
    t_lo: float = 0.25
    t_hi: float = 8.0
    tol: float = 1e-4

    def __post_init__(self):
        if self.fusion_rule not in FUSION_RULES:
            raise ValueError(f"fusion rule must be one of {FUSION_RULES}")
        if self.stat_split not in ("train", "val"):
            raise ValueError("stat_split must be 'train' or 'val'")


@dataclass(frozen=True)
class FittedPipeline:
    """Everything `fit` produces: the joint model plus the T=1 baseline."""

    temperature_fit: TemperatureFit
    smdn: SmdnModel
    doc_model: SofterMaxModel
    n_val: int

    @property
    def softermax_model(self) -> SofterMaxModel:
        return self.smdn.softermax_model

    def save(self, model_dir) -> None:
        model_dir = Path(model_dir)
        model_dir.mkdir(parents=True, exist_ok=True)
        (model_dir / "calib.json").write_text(
            json.dumps(self.temperature_fit.to_json_dict(self.n_val), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        (model_dir / "thresholds.json").write_text(
            json.dumps(self.softermax_model.to_json_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        (model_dir / "thresholds_t1.json").write_text(
            json.dumps(self.doc_model.to_json_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        self.smdn.lof_model.save(model_dir / "lof.json")
        payload = {
            "fusion_rule": self.smdn.fusion_rule,
            "joint_threshold": self.smdn.joint_threshold,
            "platt_sm": self.smdn.platt_sm.to_json_dict(),
            "platt_lof": self.smdn.platt_lof.to_json_dict(),
            "files": {
                "calib": "calib.json",
                "thresholds": "thresholds.json",
                "thresholds_t1": "thresholds_t1.json",
                "lof": "lof.json",
            },
        }
        (model_dir / MODEL_FILE).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, model_dir) -> "FittedPipeline":
        model_dir = Path(model_dir)
        top_path = model_dir / MODEL_FILE
        if not top_path.exists():
            raise FileNotFoundError(f"no fitted model at {top_path}")
        top = json.loads(top_path.read_text(encoding="utf-8"))
        files = top["files"]
        calib = json.loads((model_dir / files["calib"]).read_text(encoding="utf-8"))
        softermax_model = SofterMaxModel.from_json_dict(
            json.loads((model_dir / files["thresholds"]).read_text(encoding="utf-8"))
        )
        doc_model = SofterMaxModel.from_json_dict(
            json.loads((model_dir / files["thresholds_t1"]).read_text(encoding="utf-8"))
        )
        lof_model = lof_mod.LofModel.load(model_dir / files["lof"])
        smdn = SmdnModel(
            softermax_model=softermax_model,
            lof_model=lof_model,
            platt_sm=PlattScaler.from_json_dict(top["platt_sm"]),
            platt_lof=PlattScaler.from_json_dict(top["platt_lof"]),
            fusion_rule=top["fusion_rule"],
            joint_threshold=float(top["joint_threshold"]),
        )
        fit = TemperatureFit(
            temperature=float(calib["temperature"]),
            final_nll=float(calib["final_nll"]),
            search_trace=(),
        )
        return cls(temperature_fit=fit, smdn=smdn, doc_model=doc_model, n_val=int(calib["n_val"]))


def fit_pipeline(bundle: DatasetBundle, config: PipelineConfig = PipelineConfig()) -> FittedPipeline:
    """Fit temperature, thresholds, novelty detector, and Platt slopes."""
    if bundle.requires_reexport:
        raise ValueError(
            "bundle is marked requires-reexport: its logits still span dropped classes; "
            "re-export the classifier outputs for the selected classes first"
        )
    space = bundle.label_space
    train = bundle.split("train")
    val = bundle.split("val")
    if not train or not val:
        raise ValueError("fitting needs non-empty train and val splits")

    temp_fit = fit_temperature(val, space, t_lo=config.t_lo, t_hi=config.t_hi, tol=config.tol)

    stat_records = train if config.stat_split == "train" else val
    softermax_model = fit_thresholds(
        stat_records, space, temp_fit.temperature, config.alpha, stat_split=config.stat_split
    )
    doc_model = fit_thresholds(stat_records, space, 1.0, config.alpha, stat_split=config.stat_split)

    lof_model = lof_mod.fit_lof(
        features_matrix(train), k=config.k, alpha=config.alpha, calib_features=features_matrix(val)
    )

    val_logits = logits_matrix(val)
    val_conf = np.array(
        [confidence_score(val_logits[i], softermax_model)[0] for i in range(val_logits.shape[0])]
    )
    platt_sm = fit_platt(val_conf, boundary=0.0, source="softermax")
    val_lof = lof_mod.lof_scores(features_matrix(val), lof_model)
    platt_lof = fit_platt(val_lof, boundary=lof_model.threshold, source="lof")

    smdn = SmdnModel(
        softermax_model=softermax_model,
        lof_model=lof_model,
        platt_sm=platt_sm,
        platt_lof=platt_lof,
        fusion_rule=config.fusion_rule,
    )
    return FittedPipeline(temperature_fit=temp_fit, smdn=smdn, doc_model=doc_model, n_val=len(val))


@dataclass(frozen=True)
class PredictionRow:
    """One predictions-CSV row: the decision plus the novelty diagnostics."""

    id: str
    decision: str
    p_sm: float
    p_lof: float
    p_joint: float
    confidence: float


def predict_method(
    pipeline: FittedPipeline, record: ExampleRecord, method: str, unknown_label: str
) -> OpenSetPrediction:
    if method == "smdn":
        return predict_smdn(record, pipeline.smdn, unknown_label)
    if method == "lof":
        return lof_mod.predict_lof(
            record, pipeline.smdn.lof_model, pipeline.smdn.class_names, unknown_label
        )
    if method == "doc_softmax":
        return predict_open_set(record, pipeline.doc_model, method, unknown_label)
    if method in ("softmax_t", "softermax"):
        return predict_open_set(record, pipeline.softermax_model, method, unknown_label)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def predict_rows(
    pipeline: FittedPipeline,
    records: Sequence[ExampleRecord],
    method: str,
    unknown_label: str,
) -> list[PredictionRow]:
    """Decisions for one method, always carrying the fused novelty diagnostics."""
    rows = []
    for rec in records:
        pred = predict_method(pipeline, rec, method, unknown_label)
        p_sm, p_lof, p_joint = novelty_probability(rec, pipeline.smdn)
        rows.append(
            PredictionRow(
                id=rec.id,
                decision=pred.decision,
                p_sm=p_sm,
                p_lof=p_lof,
                p_joint=p_joint,
                confidence=pred.confidence_score,
            )
        )
    return rows
