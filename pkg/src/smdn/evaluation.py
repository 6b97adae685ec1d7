"""Open-set evaluation: confusion matrix and macro F1 views.

The macro F1 here is the harmonic mean of macro-averaged precision and
macro-averaged recall (averaged over classes first, then combined) — not the
more common mean of per-class F1s, so the generic sklearn reduction is not a
substitute. Classes with a zero denominator contribute 0 to the averages.
Reports always carry the confusion matrix, and every reported value is exactly
recomputable from it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import DatasetBundle, ExampleRecord
from .thresholds import OpenSetPrediction


@dataclass(frozen=True)
class ClassScore:
    label: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    """Metrics over known classes, the unknown class, and their union."""

    macro_f1_all: float
    macro_f1_known: float
    f1_unknown: float
    per_class: tuple[ClassScore, ...]
    confusion: np.ndarray
    labels: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "macro_f1_all": self.macro_f1_all,
            "macro_f1_known": self.macro_f1_known,
            "f1_unknown": self.f1_unknown,
            "per_class": [
                {
                    "label": c.label,
                    "precision": c.precision,
                    "recall": c.recall,
                    "f1": c.f1,
                    "support": c.support,
                }
                for c in self.per_class
            ],
            "labels": list(self.labels),
            "confusion": self.confusion.tolist(),
        }


def confusion_matrix(gold_idx: Sequence[int], pred_idx: Sequence[int], n_labels: int) -> np.ndarray:
    """Count matrix with gold on rows and predictions on columns."""
    conf = np.zeros((n_labels, n_labels), dtype=np.int64)
    for g, p in zip(gold_idx, pred_idx, strict=True):
        conf[g, p] += 1
    return conf


def precision_recall(conf: np.ndarray, cls: int) -> tuple[float, float]:
    """Per-class precision and recall; zero denominators yield 0."""
    tp = int(conf[cls, cls])
    fp = int(conf[:, cls].sum()) - tp
    fn = int(conf[cls, :].sum()) - tp
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    return precision, recall


def macro_scores(conf: np.ndarray, class_subset: Sequence[int] | None = None) -> tuple[float, float, float]:
    """(precision_macro, recall_macro, f1_macro) over the given classes.

    Precision and recall are averaged over classes first; the macro F1 is the
    harmonic mean of those two averages.
    """
    if conf.ndim != 2 or conf.shape[0] != conf.shape[1]:
        raise ValueError(f"confusion matrix must be square, got shape {conf.shape}")
    subset = list(range(conf.shape[0])) if class_subset is None else list(class_subset)
    if not subset:
        raise ValueError("class subset must be non-empty")
    precisions = []
    recalls = []
    for cls in subset:
        p, r = precision_recall(conf, cls)
        precisions.append(p)
        recalls.append(r)
    precision_macro = sum(precisions) / len(subset)
    recall_macro = sum(recalls) / len(subset)
    if precision_macro + recall_macro == 0:
        return precision_macro, recall_macro, 0.0
    f1 = 2.0 * recall_macro * precision_macro / (recall_macro + precision_macro)
    return precision_macro, recall_macro, f1


def macro_f1(conf: np.ndarray, class_subset: Sequence[int] | None = None) -> float:
    return macro_scores(conf, class_subset)[2]


def report_from_confusion(conf: np.ndarray, labels: Sequence[str]) -> EvalReport:
    """Build the three F1 views treating the last label as the unknown class."""
    n_all = conf.shape[0]
    known = list(range(n_all - 1))
    per_class = []
    for i, label in enumerate(labels):
        p, r = precision_recall(conf, i)
        f1 = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
        per_class.append(
            ClassScore(label=label, precision=p, recall=r, f1=f1, support=int(conf[i].sum()))
        )
    return EvalReport(
        macro_f1_all=macro_f1(conf),
        macro_f1_known=macro_f1(conf, known),
        f1_unknown=macro_f1(conf, [n_all - 1]),
        per_class=tuple(per_class),
        confusion=conf,
        labels=tuple(labels),
    )


def evaluate(
    predictions: Sequence[OpenSetPrediction] | Mapping[str, str],
    gold_records: Sequence[ExampleRecord] | DatasetBundle,
    class_names: Sequence[str] | None = None,
    unknown_label: str | None = None,
) -> EvalReport:
    """Score predictions against gold test records.

    Prediction ids must exactly cover the gold ids — no extras, no misses.
    """
    if isinstance(gold_records, DatasetBundle):
        space = gold_records.label_space
        class_names = space.class_names
        unknown_label = space.unknown_label
        gold_records = gold_records.split("test")
    if class_names is None or unknown_label is None:
        raise ValueError("class_names and unknown_label are required with raw record lists")

    if isinstance(predictions, Mapping):
        decision_by_id = dict(predictions)
    else:
        decision_by_id = {}
        for p in predictions:
            if p.id in decision_by_id:
                raise ValueError(f"duplicate prediction id {p.id!r}")
            decision_by_id[p.id] = p.decision

    gold_ids = [r.id for r in gold_records]
    missing = [i for i in gold_ids if i not in decision_by_id]
    extra = sorted(set(decision_by_id) - set(gold_ids))
    if missing or extra:
        raise ValueError(
            f"prediction ids must exactly cover gold ids "
            f"({len(missing)} missing, {len(extra)} extra; first missing: {missing[:3]})"
        )

    labels = tuple(class_names) + (unknown_label,)
    index = {label: i for i, label in enumerate(labels)}
    gold_idx = [index[r.gold_label] for r in gold_records]
    pred_idx = [index[decision_by_id[r.id]] for r in gold_records]
    conf = confusion_matrix(gold_idx, pred_idx, len(labels))
    return report_from_confusion(conf, labels)
