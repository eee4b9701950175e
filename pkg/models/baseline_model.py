# models/baseline_model.py

"""
Baseline model data: feature schema and fitted logistic regression.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from utils.exceptions import ValidationError

SCALAR = "scalar"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str = SCALAR
    levels: Tuple[str, ...] = ()
    reference_level: Optional[str] = None
    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        if self.kind not in (SCALAR, CATEGORICAL):
            raise ValidationError(f"feature {self.name}: unknown kind {self.kind!r}")
        if self.kind == SCALAR and not (math.isfinite(self.std) and self.std > 0):
            raise ValidationError(f"feature {self.name} is constant on the training rows")
        if self.kind == CATEGORICAL and self.reference_level not in self.levels:
            raise ValidationError(f"feature {self.name}: reference level must be a known level")

    @property
    def columns(self) -> List[str]:
        if self.kind == SCALAR:
            return [self.name]
        return [f"{self.name}={level}" for level in self.levels if level != self.reference_level]

    def to_dict(self):
        return {
            "name": self.name,
            "kind": self.kind,
            "levels": list(self.levels),
            "reference_level": self.reference_level,
            "mean": self.mean,
            "std": self.std,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "FeatureSpec":
        return cls(
            name=data["name"],
            kind=data["kind"],
            levels=tuple(data.get("levels", ())),
            reference_level=data.get("reference_level"),
            mean=float(data.get("mean", 0.0)),
            std=float(data.get("std", 1.0)),
        )


@dataclass(frozen=True)
class FeatureSchema:
    features: Tuple[FeatureSpec, ...]

    @property
    def columns(self) -> List[str]:
        return [column for feature in self.features for column in feature.columns]

    @property
    def names(self) -> List[str]:
        return [feature.name for feature in self.features]

    def to_dict(self):
        return {"features": [feature.to_dict() for feature in self.features]}

    @classmethod
    def from_dict(cls, data: Dict) -> "FeatureSchema":
        return cls(tuple(FeatureSpec.from_dict(item) for item in data["features"]))


@dataclass(frozen=True)
class LogisticModel:
    coefficients: Tuple[float, ...]
    intercept: float
    objective: float
    converged: bool
    iterations: int
    gradient_norm: float = 0.0
    history: Tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not all(math.isfinite(c) for c in self.coefficients) or not math.isfinite(
            self.intercept
        ):
            raise ValidationError("logistic coefficients must be finite")

    def to_dict(self):
        return {
            "coefficients": list(self.coefficients),
            "intercept": self.intercept,
            "objective": self.objective,
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "LogisticModel":
        return cls(
            coefficients=tuple(float(c) for c in data["coefficients"]),
            intercept=float(data["intercept"]),
            objective=float(data["objective"]),
            converged=bool(data["converged"]),
            iterations=int(data["iterations"]),
            gradient_norm=float(data.get("gradient_norm", 0.0)),
        )
