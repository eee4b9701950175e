# models/__init__.py

"""
Models package for the eye-biomarker study.
"""

from .image_model import AblationMode, Ellipse, EllipseAnnotation
from .patient_model import (
    Analyte,
    Cohort,
    Eye,
    ImageRecord,
    MatchedValue,
    MatchMethod,
    Measurement,
    Patient,
    RaceEthnicity,
    Sex,
    Visit,
)
from .baseline_model import FeatureSchema, FeatureSpec, LogisticModel
from .result_model import (
    AdjustedRow,
    AucEstimate,
    BootstrapResult,
    EvalResult,
    PairedComparison,
    PpvResult,
    PpvRow,
    RocPoint,
    RunManifest,
    SkipRecord,
    SubgroupRow,
)
from .score_model import EnsembledScore, ScoredSample, ScoreSet
from .target_model import ClassLabel, Direction, TargetSpec

__all__ = [
    "AblationMode",
    "AdjustedRow",
    "AucEstimate",
    "BootstrapResult",
    "EvalResult",
    "FeatureSchema",
    "FeatureSpec",
    "LogisticModel",
    "PairedComparison",
    "PpvResult",
    "PpvRow",
    "RocPoint",
    "RunManifest",
    "SkipRecord",
    "SubgroupRow",
    "Analyte",
    "ClassLabel",
    "Cohort",
    "Direction",
    "Ellipse",
    "EllipseAnnotation",
    "EnsembledScore",
    "Eye",
    "ImageRecord",
    "MatchedValue",
    "MatchMethod",
    "Measurement",
    "Patient",
    "RaceEthnicity",
    "ScoredSample",
    "ScoreSet",
    "Sex",
    "TargetSpec",
    "Visit",
]
