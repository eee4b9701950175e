# models/target_model.py

"""
Target model: one thresholded lab/vital classification task.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Tuple

from models.patient_model import Analyte
from utils.exceptions import ValidationError

MAX_CUTOFFS = 4


class Direction(Enum):
    ABOVE_IS_POSITIVE = "AboveIsPositive"
    BELOW_IS_POSITIVE = "BelowIsPositive"


@dataclass(frozen=True)
class TargetSpec:
    """
    A classification target. ``cutoffs`` holds every cutoff of the
    multiclass head the target belongs to; ``headline`` is the one that
    defines the binary label.
    """

    name: str
    analyte: Analyte
    cutoffs: Tuple[float, ...]
    headline: float
    direction: Direction
    inclusive: Tuple[bool, ...]
    primary: bool
    unit: str

    def __post_init__(self):
        if not 1 <= len(self.cutoffs) <= MAX_CUTOFFS:
            raise ValidationError(f"{self.name}: 1 to {MAX_CUTOFFS} cutoffs required")
        if any(b <= a for a, b in zip(self.cutoffs, self.cutoffs[1:])):
            raise ValidationError(f"{self.name}: cutoffs must be strictly increasing")
        if len(self.inclusive) != len(self.cutoffs):
            raise ValidationError(f"{self.name}: one inclusive flag per cutoff")
        if self.headline not in self.cutoffs:
            raise ValidationError(f"{self.name}: headline cutoff must be one of the cutoffs")

    @property
    def n_classes(self) -> int:
        return len(self.cutoffs) + 1

    @property
    def headline_index(self) -> int:
        return self.cutoffs.index(self.headline)

    @property
    def operator(self) -> str:
        inclusive = self.inclusive[self.headline_index]
        if self.direction is Direction.ABOVE_IS_POSITIVE:
            return ">=" if inclusive else ">"
        return "<=" if inclusive else "<"

    @property
    def display_name(self) -> str:
        """'ACR ≥ 300.0' as printed in result tables"""
        symbol = {">=": "≥", ">": ">", "<=": "≤", "<": "<"}[self.operator]
        return f"{self.analyte.value} {symbol} {self.headline:.1f}"

    def to_dict(self):
        return {
            "name": self.name,
            "analyte": self.analyte.value,
            "cutoffs": list(self.cutoffs),
            "headline": self.headline,
            "direction": self.direction.value,
            "inclusive": list(self.inclusive),
            "primary": self.primary,
            "unit": self.unit,
        }


@dataclass(frozen=True)
class ClassLabel:
    class_index: int
    binary_positive: bool
