"""Confidence calibration: temperature-scaled softmax, NLL fitting, and ECE.

The temperature is fitted by minimizing mean validation NLL with a
golden-section search on log T. Dividing logits by T>1 flattens the
probabilities toward uniform without ever changing the argmax, so calibration
cannot flip a known-class prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import ExampleRecord, LabelSpace, gold_indices, logits_matrix
from .optimize import golden_section_minimize

DEFAULT_T_LO = 0.25
DEFAULT_T_HI = 8.0
DEFAULT_TOL = 1e-4
DEFAULT_N_BINS = 15


def softmax(logits) -> np.ndarray:
    """Probability vector(s) from logits, max-subtracted for overflow safety.

    Accepts a single vector or a batch with classes on the last axis.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.shape[-1] < 1:
        raise ValueError("logits must have length >= 1")
    if not np.isfinite(z).all():
        raise ValueError("logits must be finite")
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softermax(logits, temperature: float) -> np.ndarray:
    """softmax(logits / T); equals plain softmax at T=1, uniform as T grows."""
    if not (temperature > 0):
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = np.asarray(logits, dtype=np.float64)
    return softmax(z / temperature)


def nll(logits, gold_idx, temperature: float = 1.0) -> float:
    """Mean negative log-likelihood of the gold classes at the given temperature.

    Computed as logsumexp(z/T) - (z/T)[gold], which is -log of the scaled
    softmax probability without forming it.
    """
    if not (temperature > 0):
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64)) / temperature
    gold = np.asarray(gold_idx, dtype=np.intp)
    if z.shape[0] == 0:
        raise ValueError("nll needs at least one example")
    m = z.max(axis=1)
    lse = m + np.log(np.exp(z - m[:, None]).sum(axis=1))
    per_example = lse - z[np.arange(len(gold)), gold]
    return float(per_example.mean())


def nll_records(records: Sequence[ExampleRecord], space: LabelSpace, temperature: float = 1.0) -> float:
    if not records:
        raise ValueError("nll needs a non-empty record slice")
    return nll(logits_matrix(records), gold_indices(records, space), temperature)


@dataclass(frozen=True)
class TemperatureFit:
    """Result of the NLL temperature search."""

    temperature: float
    final_nll: float
    search_trace: tuple[tuple[float, float], ...]
    bracket: tuple[float, float] | None = None

    def __post_init__(self):
        if not (self.temperature > 0):
            raise ValueError(f"fitted temperature must be positive, got {self.temperature}")

    @property
    def hit_bound(self) -> bool:
        """True when the minimizer landed on (or hugs) a bracket end."""
        if self.bracket is None:
            return False
        t_lo, t_hi = self.bracket
        span = math.log(t_hi / t_lo)
        edge = 2.0 * DEFAULT_TOL * span
        return (
            math.log(self.temperature / t_lo) <= edge
            or math.log(t_hi / self.temperature) <= edge
        )

    def to_json_dict(self, n_val: int) -> dict:
        return {"temperature": self.temperature, "final_nll": self.final_nll, "n_val": n_val}


def fit_temperature(
    val_records: Sequence[ExampleRecord],
    space: LabelSpace,
    t_lo: float = DEFAULT_T_LO,
    t_hi: float = DEFAULT_T_HI,
    tol: float = DEFAULT_TOL,
) -> TemperatureFit:
    """Fit the temperature minimizing mean NLL on known-class validation records.

    The search runs on log T (temperature acts multiplicatively); T=1 is always
    evaluated when inside the bracket, so the fit can never report a worse NLL
    than the uncalibrated model.
    """
    if not val_records:
        raise ValueError("fit_temperature needs a non-empty validation slice")
    if not (0 < t_lo < t_hi):
        raise ValueError(f"need 0 < t_lo < t_hi, got [{t_lo}, {t_hi}]")
    z = logits_matrix(val_records)
    gold = gold_indices(val_records, space)
    return fit_temperature_from_logits(z, gold, t_lo=t_lo, t_hi=t_hi, tol=tol)


def fit_temperature_from_logits(
    logits: np.ndarray,
    gold_idx: np.ndarray,
    t_lo: float = DEFAULT_T_LO,
    t_hi: float = DEFAULT_T_HI,
    tol: float = DEFAULT_TOL,
) -> TemperatureFit:
    if not (0 < t_lo < t_hi):
        raise ValueError(f"need 0 < t_lo < t_hi, got [{t_lo}, {t_hi}]")
    trace: list[tuple[float, float]] = []

    def objective(u: float) -> float:
        t = math.exp(u)
        value = nll(logits, gold_idx, t)
        trace.append((t, value))
        return value

    u_best, f_best = golden_section_minimize(objective, math.log(t_lo), math.log(t_hi), tol)
    t_best = math.exp(u_best)
    if t_lo <= 1.0 <= t_hi:
        f_one = objective(0.0)
        if f_one < f_best:
            t_best, f_best = 1.0, f_one
    return TemperatureFit(
        temperature=t_best,
        final_nll=f_best,
        search_trace=tuple(trace),
        bracket=(t_lo, t_hi),
    )


@dataclass(frozen=True)
class ReliabilityBin:
    lo: float
    hi: float
    fraction: float
    accuracy: float
    mean_confidence: float

    @property
    def gap(self) -> float:
        return abs(self.accuracy - self.mean_confidence)


@dataclass(frozen=True)
class ReliabilityReport:
    bins: tuple[ReliabilityBin, ...]
    ece: float
    n_examples: int = field(default=0, compare=False)

    def recompute_ece(self) -> float:
        return sum(b.fraction * b.gap for b in self.bins)


def ece_report(
    records: Sequence[ExampleRecord],
    space: LabelSpace,
    temperature: float = 1.0,
    n_bins: int = DEFAULT_N_BINS,
) -> ReliabilityReport:
    """Expected calibration error of the temperature-scaled confidences.

    Confidence is the max calibrated probability; bins are equal-width over
    [0, 1], a confidence exactly on an edge goes to the higher bin, and the
    last bin is closed at 1. Empty bins contribute nothing.
    """
    if not records:
        raise ValueError("ece needs a non-empty record slice")
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    probs = softermax(logits_matrix(records), temperature)
    gold = gold_indices(records, space)
    confidence = probs.max(axis=1)
    correct = probs.argmax(axis=1) == gold

    idx = np.minimum(np.floor(confidence * n_bins).astype(np.intp), n_bins - 1)
    total = len(records)
    bins = []
    ece = 0.0
    for b in range(n_bins):
        mask = idx == b
        count = int(mask.sum())
        if count == 0:
            bins.append(ReliabilityBin(b / n_bins, (b + 1) / n_bins, 0.0, 0.0, 0.0))
            continue
        frac = count / total
        acc = float(correct[mask].mean())
        conf = float(confidence[mask].mean())
        ece += frac * abs(acc - conf)
        bins.append(ReliabilityBin(b / n_bins, (b + 1) / n_bins, frac, acc, conf))
    return ReliabilityReport(bins=tuple(bins), ece=ece, n_examples=total)
