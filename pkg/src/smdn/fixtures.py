"""Deterministic synthetic bundles: Gaussian feature clusters with logits from
a linear map of the features.

Each known class is an isotropic Gaussian cluster; logits are the class
posteriors of that mixture up to a softness divisor (z_i = (f.c_i - |c_i|^2/2)
/ tau), so they are an affine function of the features. Gold labels are
sampled from softmax(z), which makes the bundles calibrated by construction
(the NLL-optimal temperature is 1). Held-out clusters appear only in the test
split, labeled unknown.

A preset can be generated restricted to a subset of its known classes, which
plays the role of retraining the classifier on that subset: dropped clusters
vanish from train/val, their test records come back labeled unknown, and the
logit columns span only the kept classes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .calibration import softmax
from .data import DatasetBundle, ExampleRecord, LabelSpace, UNKNOWN_LABEL


@dataclass(frozen=True)
class GaussianSpec:
    name: str
    n_known: int
    feature_dim: int
    known_centroids: tuple[tuple[float, ...], ...]
    unknown_centroids: tuple[tuple[float, ...], ...]
    sigma: float
    tau: float
    train_per_class: int
    val_per_class: int
    test_per_class: int
    test_unknown_total: int

    @property
    def class_names(self) -> tuple[str, ...]:
        return tuple(f"intent_{i:02d}" for i in range(self.n_known))


def _axis_centroids(count: int, dim: int, scale: float, start_axis: int = 0) -> tuple[tuple[float, ...], ...]:
    out = []
    for i in range(count):
        c = [0.0] * dim
        c[start_axis + i] = scale
        out.append(tuple(c))
    return tuple(out)


def _preset_gaussian_3_1() -> GaussianSpec:
    scale = 8.0
    # Unknown cluster sits past cluster 0 along its axis, nudged off-axis: far
    # in feature space yet classified with high confidence, so probability
    # thresholds alone cannot reject it.
    unknown = (1.75 * scale, 0.0, 0.0, 0.75 * scale)
    return GaussianSpec(
        name="gaussian-3+1",
        n_known=3,
        feature_dim=4,
        known_centroids=_axis_centroids(3, 4, scale),
        unknown_centroids=(unknown,),
        sigma=1.0,
        tau=16.0,
        train_per_class=200,
        val_per_class=60,
        test_per_class=80,
        test_unknown_total=120,
    )


def _preset_gaussian_5_2() -> GaussianSpec:
    scale = 8.0
    return GaussianSpec(
        name="gaussian-5+2",
        n_known=5,
        feature_dim=8,
        known_centroids=_axis_centroids(5, 8, scale),
        unknown_centroids=_axis_centroids(2, 8, scale, start_axis=5),
        sigma=1.0,
        tau=16.0,
        train_per_class=150,
        val_per_class=40,
        test_per_class=60,
        test_unknown_total=150,
    )


PRESETS = {
    "gaussian-3+1": _preset_gaussian_3_1,
    "gaussian-5+2": _preset_gaussian_5_2,
}


def preset(name: str) -> GaussianSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None


def _logit_map(centroids: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """(weights, bias) such that z = f @ weights.T + bias."""
    weights = centroids / tau
    bias = -0.5 * np.einsum("ij,ij->i", centroids, centroids) / tau
    return weights, bias


def generate_bundle(
    spec: GaussianSpec,
    seed,
    known_subset: Sequence[int] | None = None,
) -> DatasetBundle:
    """Generate a bundle, optionally restricted to a subset of known classes.

    ``seed`` may be an int or a numpy SeedSequence. Identical arguments always
    produce an identical bundle.
    """
    rng = np.random.default_rng(seed)
    selected = sorted(range(spec.n_known)) if known_subset is None else sorted(set(known_subset))
    if not selected or any(i < 0 or i >= spec.n_known for i in selected):
        raise ValueError(f"known_subset must be a non-empty subset of range({spec.n_known})")

    all_names = spec.class_names
    space = LabelSpace(
        class_names=tuple(all_names[i] for i in selected),
        feature_dim=spec.feature_dim,
    )
    known_c = np.asarray(spec.known_centroids, dtype=np.float64)
    weights, bias = _logit_map(known_c[selected], spec.tau)

    records: list[ExampleRecord] = []

    def emit(split: str, feats: np.ndarray, gold: list[str]):
        base = len([r for r in records if r.split == split])
        z = feats @ weights.T + bias
        for i in range(feats.shape[0]):
            records.append(
                ExampleRecord(
                    id=f"{split}-{base + i:05d}",
                    split=split,
                    gold_label=gold[i],
                    logits=tuple(float(v) for v in z[i]),
                    features=tuple(float(v) for v in feats[i]),
                )
            )

    def sample_cluster(centroid: np.ndarray, count: int) -> np.ndarray:
        return centroid + spec.sigma * rng.standard_normal((count, spec.feature_dim))

    def sampled_gold(feats: np.ndarray) -> list[str]:
        probs = softmax(feats @ weights.T + bias)
        u = rng.random(feats.shape[0])
        choices = (probs.cumsum(axis=1) < u[:, None]).sum(axis=1)
        return [space.class_names[min(c, space.n_classes - 1)] for c in choices]

    for split, per_class in (("train", spec.train_per_class), ("val", spec.val_per_class)):
        for ci in selected:
            feats = sample_cluster(known_c[ci], per_class)
            emit(split, feats, sampled_gold(feats))

    # Test keeps every known cluster; dropped ones come back as unknowns.
    for ci in range(spec.n_known):
        feats = sample_cluster(known_c[ci], spec.test_per_class)
        if ci in selected:
            emit("test", feats, sampled_gold(feats))
        else:
            emit("test", feats, [UNKNOWN_LABEL] * feats.shape[0])
    unknown_c = np.asarray(spec.unknown_centroids, dtype=np.float64)
    per_unknown = spec.test_unknown_total // len(unknown_c)
    for ui in range(len(unknown_c)):
        count = per_unknown if ui < len(unknown_c) - 1 else spec.test_unknown_total - per_unknown * (len(unknown_c) - 1)
        feats = sample_cluster(unknown_c[ui], count)
        emit("test", feats, [UNKNOWN_LABEL] * feats.shape[0])

    return DatasetBundle(label_space=space, records=tuple(records))


def nearest_centroid_rejector(
    spec: GaussianSpec, bundle: DatasetBundle, radius_sigmas: float = 4.0
) -> dict[str, str]:
    """Reference rejector: assign the nearest known centroid, reject beyond a radius.

    Ignores logits entirely; used to certify that a fixture is separable enough
    for the stated end-to-end targets.
    """
    names = spec.class_names
    selected = [i for i, n in enumerate(names) if n in bundle.label_space.class_names]
    centroids = np.asarray(spec.known_centroids, dtype=np.float64)[selected]
    cutoff = radius_sigmas * spec.sigma
    out: dict[str, str] = {}
    for rec in bundle.split("test"):
        f = np.asarray(rec.features)
        dists = np.sqrt(((centroids - f) ** 2).sum(axis=1))
        best = int(np.argmin(dists))
        if dists[best] > cutoff:
            out[rec.id] = bundle.label_space.unknown_label
        else:
            out[rec.id] = bundle.label_space.class_names[best]
    return out
