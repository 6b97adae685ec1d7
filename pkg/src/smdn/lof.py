"""Local outlier factor over classifier feature vectors, in novelty mode.

The detector retains the training feature matrix and, for every training
point, its k-distance and local reachability density (lrd). A query is scored
against training neighbors only: its lrd is the inverse mean reachability
distance to its k-nearest training points, and the score is the mean ratio of
the neighbors' lrd to its own. Scores sit near 1 inside homogeneous regions
and grow with isolation; scores above the fitted threshold are rejected.

Neighborhoods are tie-inclusive: every point at distance <= the k-distance is
a neighbor, so |N_k| >= k. Reachability sums are floored at LRD_FLOOR before
inversion so exact duplicates produce large-but-finite densities instead of
dividing by zero; coincident points then still score ~1 against each other.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import ExampleRecord, UNKNOWN_LABEL
from .kernels import pairwise_dists
from .thresholds import OpenSetPrediction

DEFAULT_K = 20
DEFAULT_ALPHA = 2.0
LRD_FLOOR = 1e-12
_BLOCK = 512


@dataclass(frozen=True)
class ThresholdStats:
    mu: float
    sigma: float
    alpha: float
    n_calib: int


@dataclass(frozen=True)
class LofModel:
    train_features: np.ndarray
    k: int
    train_kdist: np.ndarray
    train_lrd: np.ndarray
    train_lof: np.ndarray
    threshold: float
    threshold_stats: ThresholdStats

    def __post_init__(self):
        m = self.train_features.shape[0]
        if not self.k < m:
            raise ValueError(f"k={self.k} must be smaller than the training size {m}")
        if not np.all((self.train_lrd > 0) & np.isfinite(self.train_lrd)):
            raise ValueError("training lrd values must be positive and finite")

    @property
    def feature_dim(self) -> int:
        return int(self.train_features.shape[1])

    def save(self, json_path, array_dir=None) -> None:
        """Write lof.json plus the retained arrays as sibling .npy files."""
        json_path = Path(json_path)
        array_dir = Path(array_dir) if array_dir is not None else json_path.parent
        features_ref = "lof_train_features.npy"
        stats_ref = "lof_train_stats.npy"
        np.save(array_dir / features_ref, self.train_features)
        np.save(array_dir / stats_ref, np.vstack([self.train_kdist, self.train_lrd, self.train_lof]))
        payload = {
            "k": self.k,
            "alpha": self.threshold_stats.alpha,
            "threshold": self.threshold,
            "threshold_stats": {
                "mu": self.threshold_stats.mu,
                "sigma": self.threshold_stats.sigma,
                "alpha": self.threshold_stats.alpha,
                "n_calib": self.threshold_stats.n_calib,
            },
            "train_ref": features_ref,
            "train_stats_ref": stats_ref,
        }
        json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, json_path) -> "LofModel":
        json_path = Path(json_path)
        d = json.loads(json_path.read_text(encoding="utf-8"))
        features = np.load(json_path.parent / d["train_ref"])
        stats = np.load(json_path.parent / d["train_stats_ref"])
        ts = d["threshold_stats"]
        return cls(
            train_features=features,
            k=int(d["k"]),
            train_kdist=stats[0],
            train_lrd=stats[1],
            train_lof=stats[2],
            threshold=float(d["threshold"]),
            threshold_stats=ThresholdStats(
                mu=float(ts["mu"]),
                sigma=float(ts["sigma"]),
                alpha=float(ts["alpha"]),
                n_calib=int(ts["n_calib"]),
            ),
        )


def _neighbor_stats(dists: np.ndarray, kdist_all: np.ndarray, k: int, self_offset: int | None):
    """Per-row neighborhood size, reachability sum, and neighbor column indices.

    ``self_offset`` marks the column of row 0's own entry for in-sample blocks
    (the diagonal walks one column right per row); None for out-of-sample
    queries, whose own distance-zero matches are legitimate neighbors.
    """
    d = dists.copy()
    rows = d.shape[0]
    if self_offset is not None:
        d[np.arange(rows), np.arange(rows) + self_offset] = np.inf
    kth = np.partition(d, k - 1, axis=1)[:, k - 1]
    counts = np.empty(rows, dtype=np.intp)
    reach_sums = np.empty(rows, dtype=np.float64)
    neighbor_idx: list[np.ndarray] = []
    for i in range(rows):
        mask = d[i] <= kth[i]
        idx = np.flatnonzero(mask)
        counts[i] = idx.size
        reach_sums[i] = np.maximum(kdist_all[idx], d[i, idx]).sum()
        neighbor_idx.append(idx)
    return kth, counts, reach_sums, neighbor_idx


def _train_kdist(train: np.ndarray, k: int) -> np.ndarray:
    m = train.shape[0]
    kdist = np.empty(m, dtype=np.float64)
    for start in range(0, m, _BLOCK):
        stop = min(start + _BLOCK, m)
        d = pairwise_dists(train[start:stop], train)
        d[np.arange(stop - start), np.arange(start, stop)] = np.inf
        kdist[start:stop] = np.partition(d, k - 1, axis=1)[:, k - 1]
    return kdist


def fit_lof(
    train_features,
    k: int = DEFAULT_K,
    alpha: float = DEFAULT_ALPHA,
    calib_features=None,
) -> LofModel:
    """Precompute training neighbor statistics and a score threshold.

    The threshold is mean + alpha*std (population) of the scores the fitted
    detector assigns to ``calib_features`` — held-out known-class data, so the
    threshold tracks how inliers score rather than the training points
    themselves.
    """
    train = np.ascontiguousarray(train_features, dtype=np.float64)
    if train.ndim != 2:
        raise ValueError("training features must be a 2-D matrix")
    m = train.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if m < k + 1:
        raise ValueError(f"need at least k+1={k + 1} training points, got {m}")
    calib = np.ascontiguousarray(calib_features, dtype=np.float64)
    if calib.ndim != 2 or calib.shape[0] == 0:
        raise ValueError("calibration features must be a non-empty 2-D matrix")

    kdist = _train_kdist(train, k)

    counts = np.empty(m, dtype=np.intp)
    lrd = np.empty(m, dtype=np.float64)
    neighbors: list[np.ndarray] = []
    for start in range(0, m, _BLOCK):
        stop = min(start + _BLOCK, m)
        d = pairwise_dists(train[start:stop], train)
        _, cnt, reach, nbr = _neighbor_stats(d, kdist, k, self_offset=start)
        counts[start:stop] = cnt
        lrd[start:stop] = cnt / np.maximum(reach, LRD_FLOOR)
        neighbors.extend(nbr)

    train_lof = np.empty(m, dtype=np.float64)
    for i, idx in enumerate(neighbors):
        train_lof[i] = lrd[idx].mean() / lrd[i]

    base = LofModel(
        train_features=train,
        k=k,
        train_kdist=kdist,
        train_lrd=lrd,
        train_lof=train_lof,
        threshold=np.inf,
        threshold_stats=ThresholdStats(mu=0.0, sigma=0.0, alpha=alpha, n_calib=0),
    )
    calib_scores = lof_scores(calib, base)
    mu = float(calib_scores.mean())
    sigma = float(calib_scores.std())
    return LofModel(
        train_features=train,
        k=k,
        train_kdist=kdist,
        train_lrd=lrd,
        train_lof=train_lof,
        threshold=mu + alpha * sigma,
        threshold_stats=ThresholdStats(mu=mu, sigma=sigma, alpha=alpha, n_calib=len(calib_scores)),
    )


def lof_scores(queries, model: LofModel) -> np.ndarray:
    """Novelty scores for query feature vectors against the training set."""
    q = np.atleast_2d(np.ascontiguousarray(queries, dtype=np.float64))
    if q.shape[1] != model.feature_dim:
        raise ValueError(f"expected feature dimension {model.feature_dim}, got {q.shape[1]}")
    out = np.empty(q.shape[0], dtype=np.float64)
    for start in range(0, q.shape[0], _BLOCK):
        stop = min(start + _BLOCK, q.shape[0])
        d = pairwise_dists(q[start:stop], model.train_features)
        _, counts, reach, neighbors = _neighbor_stats(d, model.train_kdist, model.k, self_offset=None)
        lrd_q = counts / np.maximum(reach, LRD_FLOOR)
        for i, idx in enumerate(neighbors):
            out[start + i] = model.train_lrd[idx].mean() / lrd_q[i]
    return out


def lof_score(query, model: LofModel) -> float:
    """Novelty score of a single query vector."""
    return float(lof_scores(np.atleast_2d(query), model)[0])


def predict_lof(
    record: ExampleRecord,
    model: LofModel,
    class_names: Sequence[str],
    unknown_label: str = UNKNOWN_LABEL,
) -> OpenSetPrediction:
    """Reject when the novelty score strictly exceeds the threshold.

    Accepted records take the classifier's plain argmax class; a score exactly
    at the threshold is accepted.
    """
    score = lof_score(np.asarray(record.features, dtype=np.float64), model)
    if score > model.threshold:
        decision = unknown_label
    else:
        decision = class_names[int(np.argmax(record.logits))]
    return OpenSetPrediction(
        id=record.id,
        decision=decision,
        confidence_score=float(model.threshold - score),
        method="lof",
    )
