"""Open-set post-processing for pre-trained classifiers.

Turns exported logits and feature vectors into an open-set classifier:
temperature-calibrated per-class probability thresholds, a feature-space
local-outlier-factor novelty detector, and a Platt-scaled joint decision.
"""

from .calibration import (
    ReliabilityReport,
    TemperatureFit,
    ece_report,
    fit_temperature,
    nll,
    softermax,
    softmax,
)
from .data import (
    BundleValidationError,
    DatasetBundle,
    ExampleRecord,
    LabelSpace,
    UNKNOWN_LABEL,
    load_bundle,
    save_bundle,
)
from .evaluation import EvalReport, confusion_matrix, evaluate, macro_f1, macro_scores
from .fusion import PlattScaler, SmdnModel, fit_platt, novelty_probability, predict_smdn
from .harness import RunManifest, restrict_bundle, sample_known_classes
from .kernels import BACKEND
from .lof import LofModel, fit_lof, lof_score, lof_scores, predict_lof
from .pipeline import FittedPipeline, PipelineConfig, fit_pipeline
from .thresholds import (
    OpenSetPrediction,
    SofterMaxModel,
    confidence_score,
    fit_thresholds,
    predict_open_set,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BundleValidationError",
    "DatasetBundle",
    "EvalReport",
    "ExampleRecord",
    "FittedPipeline",
    "LabelSpace",
    "LofModel",
    "OpenSetPrediction",
    "PipelineConfig",
    "PlattScaler",
    "ReliabilityReport",
    "RunManifest",
    "SmdnModel",
    "SofterMaxModel",
    "TemperatureFit",
    "UNKNOWN_LABEL",
    "confidence_score",
    "confusion_matrix",
    "ece_report",
    "evaluate",
    "fit_lof",
    "fit_pipeline",
    "fit_platt",
    "fit_temperature",
    "fit_thresholds",
    "load_bundle",
    "lof_score",
    "lof_scores",
    "macro_f1",
    "macro_scores",
    "nll",
    "novelty_probability",
    "predict_lof",
    "predict_open_set",
    "predict_smdn",
    "restrict_bundle",
    "sample_known_classes",
    "save_bundle",
    "softermax",
    "softmax",
]
