"""Platt scaling of the two rejection scores and the joint open-set decision.

Each sub-method's raw score is shifted so its decision boundary lands at 0
with larger values meaning "more novel", then mapped through a one-parameter
logistic 1/(1 + exp(a*s)) with a < 0. The intercept stays 0, so a score
exactly on the boundary always maps to probability 0.5 — only the slope is
fitted. The joint prediction rejects when the fused novelty probability
exceeds 0.5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from .calibration import softermax
from .data import ExampleRecord, UNKNOWN_LABEL
from .lof import LofModel, lof_score
from .optimize import golden_section_minimize
from .thresholds import OpenSetPrediction, SofterMaxModel, confidence_score

FUSION_RULES = ("mean", "max", "either")
JOINT_THRESHOLD = 0.5

_SLOPE_LO = 1e-6
_SLOPE_HI = 1e6
_SLOPE_TOL = 1e-6


@dataclass(frozen=True)
class PlattScaler:
    """Monotone map from a raw rejection score to a novelty probability.

    ``source`` fixes the shift: "softermax" scores get more novel as they
    decrease (s = boundary - raw), "lof" scores as they increase
    (s = raw - boundary). After shifting, direction is always higher-is-novel.
    """

    a: float
    b: float
    source: str
    boundary: float
    direction: str = "higher_is_novel"

    def __post_init__(self):
        if self.source not in ("softermax", "lof"):
            raise ValueError(f"unknown score source {self.source!r}")
        if self.a >= 0:
            raise ValueError(f"slope must be negative for an increasing map, got {self.a}")
        if self.b != 0.0:
            raise ValueError("intercept is pinned at 0 so the boundary maps to 0.5")

    def shift(self, raw) -> np.ndarray:
        raw = np.asarray(raw, dtype=np.float64)
        if self.source == "softermax":
            return self.boundary - raw
        return raw - self.boundary

    def transform(self, raw) -> np.ndarray | float:
        """Novelty probability for raw sub-method score(s)."""
        s = self.shift(raw)
        with np.errstate(over="ignore"):
            p = 1.0 / (1.0 + np.exp(self.a * s + self.b))
        return float(p) if np.ndim(p) == 0 else p

    def to_json_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "source": self.source,
            "boundary": self.boundary,
            "direction": self.direction,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "PlattScaler":
        return cls(
            a=float(d["a"]),
            b=float(d["b"]),
            source=str(d["source"]),
            boundary=float(d["boundary"]),
            direction=str(d.get("direction", "higher_is_novel")),
        )


def _platt_nll(slopes: np.ndarray, s: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Cross-entropy of p = 1/(1+exp(a*s)) against smoothed targets, per slope."""
    x = slopes[:, None] * s[None, :]
    log_p = -np.logaddexp(0.0, x)
    log_1mp = x + log_p
    return -(targets[None, :] * log_p + (1.0 - targets[None, :]) * log_1mp).sum(axis=1)


def fit_platt(scores, boundary: float, source: str) -> PlattScaler:
    """Fit the logistic slope on boundary-shifted scores.

    Pseudo-labels call a sample novel exactly when the sub-method already
    rejects it (shifted score > 0); the classic smoothed targets
    (n+ + 1)/(n+ + 2) and 1/(n- + 2) keep the separable fit finite. With no
    rejected samples at all there is nothing to fit against, so the slope
    falls back to -1/std(shifted scores).
    """
    raw = np.asarray(scores, dtype=np.float64)
    if raw.size == 0:
        raise ValueError("fit_platt needs a non-empty score vector")
    probe = PlattScaler(a=-1.0, b=0.0, source=source, boundary=boundary)
    s = probe.shift(raw)

    novel = s > 0
    n_pos = int(novel.sum())
    n_neg = int(raw.size - n_pos)
    if n_pos == 0:
        sigma = float(s.std())
        slope = -1.0 / sigma if sigma > 0 else -1.0
        return PlattScaler(a=slope, b=0.0, source=source, boundary=boundary)

    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    targets = np.where(novel, hi, lo)

    def objective(u: float) -> float:
        return float(_platt_nll(np.array([-math.exp(u)]), s, targets)[0])

    u_best, _ = golden_section_minimize(
        objective, math.log(_SLOPE_LO), math.log(_SLOPE_HI), _SLOPE_TOL
    )
    return PlattScaler(a=-math.exp(u_best), b=0.0, source=source, boundary=boundary)


@dataclass(frozen=True)
class SmdnModel:
    """The deployable bundle: thresholds, novelty detector, and fused decision."""

    softermax_model: SofterMaxModel
    lof_model: LofModel
    platt_sm: PlattScaler
    platt_lof: PlattScaler
    fusion_rule: str = "mean"
    joint_threshold: float = JOINT_THRESHOLD

    def __post_init__(self):
        if self.fusion_rule not in FUSION_RULES:
            raise ValueError(f"fusion rule must be one of {FUSION_RULES}, got {self.fusion_rule!r}")
        if self.joint_threshold != JOINT_THRESHOLD:
            raise ValueError(f"the joint prediction threshold is fixed at {JOINT_THRESHOLD}")

    @property
    def class_names(self) -> tuple[str, ...]:
        return self.softermax_model.class_names


def novelty_probability(record: ExampleRecord, model: SmdnModel) -> tuple[float, float, float]:
    """(p_sm, p_lof, p_joint) novelty probabilities for one record."""
    conf, _ = confidence_score(np.asarray(record.logits, dtype=np.float64), model.softermax_model)
    p_sm = float(model.platt_sm.transform(conf))
    score = lof_score(np.asarray(record.features, dtype=np.float64), model.lof_model)
    p_lof = float(model.platt_lof.transform(score))
    if model.fusion_rule == "mean":
        p_joint = 0.5 * (p_sm + p_lof)
    else:  # max and either share the fused value; either differs only as a decision rule
        p_joint = max(p_sm, p_lof)
    return p_sm, p_lof, p_joint


def predict_smdn(
    record: ExampleRecord, model: SmdnModel, unknown_label: str = UNKNOWN_LABEL
) -> OpenSetPrediction:
    """Joint prediction: unknown when the fused novelty probability exceeds 0.5."""
    p_sm, p_lof, p_joint = novelty_probability(record, model)
    if model.fusion_rule == "either":
        reject = p_sm > model.joint_threshold or p_lof > model.joint_threshold
    else:
        reject = p_joint > model.joint_threshold
    if reject:
        decision = unknown_label
    else:
        probs = softermax(np.asarray(record.logits, dtype=np.float64), model.softermax_model.temperature)
        decision = model.class_names[int(np.argmax(probs))]
    return OpenSetPrediction(
        id=record.id,
        decision=decision,
        confidence_score=float(model.joint_threshold - p_joint),
        method="smdn",
    )
