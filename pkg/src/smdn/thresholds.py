"""Per-class probability thresholds over calibrated outputs and rejection rules.

Each known class gets the threshold max(0.5, mu - alpha*sigma), where mu/sigma
are the mean and population standard deviation of the calibrated probability
the model assigns to that class on its own examples. A record whose calibrated
probability beats no class threshold is rejected as unknown; the margin
max_i(p_i - t_i) doubles as a comparable per-example confidence score.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .calibration import softermax
from .data import ExampleRecord, LabelSpace, UNKNOWN_LABEL, gold_indices, logits_matrix

DEFAULT_ALPHA = 2.0

METHODS = ("softmax_t", "doc_softmax", "softermax", "lof", "smdn")
THRESHOLD_METHODS = ("softmax_t", "doc_softmax", "softermax")


def class_threshold(mu: float, sigma: float, alpha: float) -> float:
    """Threshold rule: alpha standard deviations below the class mean, floored at 0.5."""
    return max(0.5, mu - alpha * sigma)


@dataclass(frozen=True)
class ClassStats:
    label: str
    mu: float
    sigma: float
    t: float


@dataclass(frozen=True)
class OpenSetPrediction:
    id: str
    decision: str
    confidence_score: float
    method: str


@dataclass(frozen=True)
class SofterMaxModel:
    """Fitted temperature plus one (mu, sigma, t) triple per known class."""

    temperature: float
    alpha: float
    per_class: tuple[ClassStats, ...]
    stat_split: str = "train"

    def __post_init__(self):
        if not (self.temperature > 0):
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")
        for c in self.per_class:
            if not 0.5 <= c.t <= 1.0:
                raise ValueError(f"class {c.label!r}: threshold {c.t} outside [0.5, 1]")

    @property
    def class_names(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.per_class)

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([c.t for c in self.per_class], dtype=np.float64)

    def to_json_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "alpha": self.alpha,
            "stat_split": self.stat_split,
            "sigma_estimator": "population",
            "per_class": [
                {"label": c.label, "mu": c.mu, "sigma": c.sigma, "t": c.t} for c in self.per_class
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SofterMaxModel":
        per_class = tuple(
            ClassStats(label=c["label"], mu=c["mu"], sigma=c["sigma"], t=c["t"])
            for c in d["per_class"]
        )
        return cls(
            temperature=float(d["temperature"]),
            alpha=float(d["alpha"]),
            per_class=per_class,
            stat_split=d.get("stat_split", "train"),
        )


def fit_thresholds(
    stat_records: Sequence[ExampleRecord],
    space: LabelSpace,
    temperature: float,
    alpha: float = DEFAULT_ALPHA,
    stat_split: str = "train",
) -> SofterMaxModel:
    """Fit per-class thresholds from class-conditional calibrated probabilities.

    All records whose gold label is class i contribute p(class i) to that
    class's statistics, right or wrong. Sigma is the population standard
    deviation, so a single-record class simply gets sigma = 0.
    """
    if not stat_records:
        raise ValueError("fit_thresholds needs a non-empty statistics slice")
    probs = softermax(logits_matrix(stat_records), temperature)
    gold = gold_indices(stat_records, space)
    per_class = []
    for i, label in enumerate(space.class_names):
        own = probs[gold == i, i]
        if own.size == 0:
            raise ValueError(f"class {label!r} has no records in the statistics slice")
        mu = float(own.mean())
        sigma = float(own.std())
        per_class.append(ClassStats(label=label, mu=mu, sigma=sigma, t=class_threshold(mu, sigma, alpha)))
    return SofterMaxModel(
        temperature=temperature, alpha=alpha, per_class=tuple(per_class), stat_split=stat_split
    )


def confidence_score(logits, model: SofterMaxModel) -> tuple[float, int]:
    """Best margin over the per-class thresholds and the class achieving it.

    Returns ``(max_i(p_i - t_i), argmax_i(p_i - t_i))`` with p the calibrated
    probabilities. Negative scores mean every class fell below its threshold
    and the example should be rejected.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] != len(model.per_class):
        raise ValueError(
            f"expected {len(model.per_class)} logits, got shape {z.shape}"
        )
    margins = softermax(z, model.temperature) - model.thresholds
    best = int(np.argmax(margins))
    return float(margins[best]), best


def predict_open_set(
    record: ExampleRecord,
    model: SofterMaxModel,
    method: str,
    unknown_label: str = UNKNOWN_LABEL,
) -> OpenSetPrediction:
    """Open-set decision for one record under a threshold-based method.

    softmax_t ignores the fitted thresholds and temperature: it rejects when no
    plain softmax probability exceeds 0.5. doc_softmax and softermax both apply
    the per-class thresholds; they differ only in the temperature the supplied
    model was fitted at (1 vs the calibrated value).
    """
    if method in ("lof", "smdn"):
        raise ValueError(
            f"method {method!r} is not threshold-based; use the novelty/fusion predictors"
        )
    if method not in THRESHOLD_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")

    z = np.asarray(record.logits, dtype=np.float64)
    if method == "softmax_t":
        from .calibration import softmax

        p = softmax(z)
        best = int(np.argmax(p))
        score = float(p[best] - 0.5)
        accepted = p[best] > 0.5
    else:
        score, best = confidence_score(z, model)
        accepted = score >= 0
    decision = model.class_names[best] if accepted else unknown_label
    return OpenSetPrediction(id=record.id, decision=decision, confidence_score=score, method=method)
