# models/score_model.py

"""
Score models: raw per-image model scores, ensembled visit scores and the
(unit, score, label) samples the ROC statistics operate on.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import pandas as pd

from utils.exceptions import ValidationError

SCORE_COLUMNS: Tuple[str, ...] = (
    "image_id",
    "visit_id",
    "patient_id",
    "eye",
    "model_member",
    "target_name",
    "score",
)


@dataclass(frozen=True)
class ScoreSet:
    """Per-image predicted likelihoods keyed by (visit, image, member, target)"""

    frame: pd.DataFrame

    def __post_init__(self):
        missing = [c for c in SCORE_COLUMNS if c not in self.frame.columns]
        if missing:
            raise ValidationError(f"score set is missing columns: {', '.join(missing)}")

    @classmethod
    def empty(cls) -> "ScoreSet":
        return cls(pd.DataFrame({name: pd.Series(dtype=object) for name in SCORE_COLUMNS}))

    def __len__(self) -> int:
        return len(self.frame)

    def to_frame(self) -> pd.DataFrame:
        return self.frame.copy()

    def targets(self) -> Tuple[str, ...]:
        return tuple(sorted(self.frame["target_name"].unique()))


@dataclass(frozen=True)
class EnsembledScore:
    patient_id: str
    visit_id: str
    target: str
    score: float
    n_models: int
    n_eyes: int

    def to_dict(self):
        return {
            "patient_id": self.patient_id,
            "visit_id": self.visit_id,
            "target": self.target,
            "score": self.score,
            "n_models": self.n_models,
            "n_eyes": self.n_eyes,
        }


@dataclass(frozen=True)
class ScoredSample:
    unit_id: str
    score: float
    label: bool

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValidationError(f"score for {self.unit_id} must be finite")
