"""Interchange data model: label space, classifier-output records, and CSV/JSON I/O.

A dataset is exchanged as two files: ``manifest.json`` describing the label
space and dimensions, and a ``records.csv`` with one row per example holding
the exported logits and feature vector. Everything is validated on load;
malformed files always raise :class:`BundleValidationError` with the offending
row, never produce a partially-loaded bundle.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

UNKNOWN_LABEL = "__unknown__"
SPLITS = ("train", "val", "test")


class BundleValidationError(ValueError):
    """Raised when a manifest or records file violates the interchange contract."""


@dataclass(frozen=True)
class LabelSpace:
    """Ordered known-class labels plus the dimensions of the exported vectors."""

    class_names: tuple[str, ...]
    feature_dim: int
    unknown_label: str = UNKNOWN_LABEL

    def __post_init__(self):
        names = self.class_names
        if len(names) < 2:
            raise BundleValidationError(f"need at least 2 classes, got {len(names)}")
        if len(set(names)) != len(names):
            raise BundleValidationError("class names must be unique")
        if any(not n for n in names):
            raise BundleValidationError("class names must be non-empty")
        if self.unknown_label in names:
            raise BundleValidationError(
                f"class names must not include the reserved unknown label {self.unknown_label!r}"
            )
        if self.feature_dim < 1:
            raise BundleValidationError(f"feature_dim must be >= 1, got {self.feature_dim}")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def index_of(self, label: str) -> int:
        return self.class_names.index(label)

    def to_json_dict(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "feature_dim": self.feature_dim,
            "class_names": list(self.class_names),
            "unknown_label": self.unknown_label,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "LabelSpace":
        try:
            names = tuple(str(n) for n in d["class_names"])
            feature_dim = int(d["feature_dim"])
            n_classes = int(d["n_classes"])
            unknown = str(d.get("unknown_label", UNKNOWN_LABEL))
        except (KeyError, TypeError, ValueError) as exc:
            raise BundleValidationError(f"bad manifest: {exc}") from exc
        if n_classes != len(names):
            raise BundleValidationError(
                f"manifest n_classes={n_classes} does not match {len(names)} class names"
            )
        return cls(class_names=names, feature_dim=feature_dim, unknown_label=unknown)


@dataclass(frozen=True)
class ExampleRecord:
    """One example's exported classifier outputs."""

    id: str
    split: str
    gold_label: str
    logits: tuple[float, ...]
    features: tuple[float, ...]

    def __post_init__(self):
        if self.split not in SPLITS:
            raise BundleValidationError(
                f"record {self.id!r}: split must be one of {SPLITS}, got {self.split!r}"
            )


@dataclass(frozen=True)
class DatasetBundle:
    """A validated label space plus records, ready for the pipeline.

    ``requires_reexport`` marks a bundle whose records were restricted to a
    known-class subset without re-exporting the classifier outputs: its logits
    still span the original label space, so it is only an intermediate for the
    re-export protocol, not valid input for fitting.
    """

    label_space: LabelSpace
    records: tuple[ExampleRecord, ...]
    requires_reexport: bool = field(default=False, compare=False)

    def __post_init__(self):
        validate_records(self.label_space, self.records)

    def split(self, name: str) -> tuple[ExampleRecord, ...]:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return tuple(r for r in self.records if r.split == name)

    def __len__(self) -> int:
        return len(self.records)


def validate_records(space: LabelSpace, records: Sequence[ExampleRecord]) -> None:
    """Check every bundle invariant, reporting the first offending record."""
    seen_ids: set[str] = set()
    known = set(space.class_names)
    for row, rec in enumerate(records, start=1):
        where = f"row {row} (id {rec.id!r})"
        if rec.id in seen_ids:
            raise BundleValidationError(f"{where}: duplicate id")
        seen_ids.add(rec.id)
        if len(rec.logits) != space.n_classes:
            raise BundleValidationError(
                f"{where}: expected {space.n_classes} logits, got {len(rec.logits)}"
            )
        if len(rec.features) != space.feature_dim:
            raise BundleValidationError(
                f"{where}: expected {space.feature_dim} features, got {len(rec.features)}"
            )
        if not all(math.isfinite(v) for v in rec.logits):
            raise BundleValidationError(f"{where}: non-finite logit value")
        if not all(math.isfinite(v) for v in rec.features):
            raise BundleValidationError(f"{where}: non-finite feature value")
        if rec.gold_label == space.unknown_label:
            if rec.split != "test":
                raise BundleValidationError(
                    f"{where}: unknown-labeled records are only allowed in the test split; "
                    f"train/val must contain known classes only"
                )
        elif rec.gold_label not in known:
            raise BundleValidationError(
                f"{where}: gold label {rec.gold_label!r} not in the label space"
            )


def logits_matrix(records: Iterable[ExampleRecord]) -> np.ndarray:
    return np.array([r.logits for r in records], dtype=np.float64)


def features_matrix(records: Iterable[ExampleRecord]) -> np.ndarray:
    return np.array([r.features for r in records], dtype=np.float64)


def gold_indices(records: Iterable[ExampleRecord], space: LabelSpace) -> np.ndarray:
    """Label-space indices of the gold labels; unknown-labeled records are rejected."""
    idx = []
    for r in records:
        if r.gold_label == space.unknown_label:
            raise ValueError(f"record {r.id!r} has the unknown label; known-class slice required")
        idx.append(space.index_of(r.gold_label))
    return np.array(idx, dtype=np.intp)


def _format_real(v: float) -> str:
    # repr gives the shortest decimal string that round-trips in binary64
    return repr(float(v))


def _csv_header(space: LabelSpace) -> list[str]:
    return (
        ["id", "split", "gold_label"]
        + [f"logit_{i}" for i in range(space.n_classes)]
        + [f"feat_{i}" for i in range(space.feature_dim)]
    )


def save_bundle(bundle: DatasetBundle, manifest_path, records_path) -> None:
    """Write manifest.json and records.csv (UTF-8, LF line endings)."""
    manifest_path = Path(manifest_path)
    records_path = Path(records_path)
    manifest_path.write_text(
        json.dumps(bundle.label_space.to_json_dict(), indent=2) + "\n", encoding="utf-8"
    )
    with open(records_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_csv_header(bundle.label_space))
        for rec in bundle.records:
            writer.writerow(
                [rec.id, rec.split, rec.gold_label]
                + [_format_real(v) for v in rec.logits]
                + [_format_real(v) for v in rec.features]
            )


def load_bundle(manifest_path, records_path) -> DatasetBundle:
    """Load and fully validate a bundle; errors name the offending row."""
    manifest_path = Path(manifest_path)
    records_path = Path(records_path)
    if not manifest_path.exists():
        raise BundleValidationError(f"manifest not found: {manifest_path}")
    if not records_path.exists():
        raise BundleValidationError(f"records file not found: {records_path}")

    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BundleValidationError(f"manifest does not parse as JSON: {exc}") from exc
    space = LabelSpace.from_json_dict(manifest)

    expected_header = _csv_header(space)
    records: list[ExampleRecord] = []
    with open(records_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise BundleValidationError("records file is empty (missing header)") from None
        if header != expected_header:
            raise BundleValidationError(
                f"records header {header[:4]}... does not match the manifest "
                f"(expected {len(expected_header)} columns for N={space.n_classes}, "
                f"D={space.feature_dim})"
            )
        n, d = space.n_classes, space.feature_dim
        for row, cells in enumerate(reader, start=1):
            if len(cells) != len(expected_header):
                raise BundleValidationError(
                    f"row {row}: expected {len(expected_header)} columns, got {len(cells)}"
                )
            rec_id, split, gold = cells[0], cells[1], cells[2]
            try:
                logits = tuple(float(c) for c in cells[3 : 3 + n])
                feats = tuple(float(c) for c in cells[3 + n : 3 + n + d])
            except ValueError as exc:
                raise BundleValidationError(f"row {row}: unparseable real value ({exc})") from exc
            try:
                records.append(
                    ExampleRecord(id=rec_id, split=split, gold_label=gold, logits=logits, features=feats)
                )
            except BundleValidationError as exc:
                raise BundleValidationError(f"row {row}: {exc}") from exc

    return DatasetBundle(label_space=space, records=tuple(records))
