# models/image_model.py

"""
Image annotation model: axis-aligned pupil and iris ellipses.
"""

import math
from dataclasses import dataclass
from enum import Enum

from utils.exceptions import ValidationError


class AblationMode(Enum):
    NONE = "None"
    GRAY = "Gray"
    NO_PUPIL = "NoPupil"
    NO_IRIS = "NoIris"
    ONLY_PUPIL = "OnlyPupil"
    ONLY_IRIS = "OnlyIris"

    @property
    def needs_annotation(self) -> bool:
        return self not in (AblationMode.NONE, AblationMode.GRAY)


@dataclass(frozen=True)
class Ellipse:
    """Axis-aligned ellipse in pixel coordinates; width/height are full axes"""

    cx: float
    cy: float
    width: float
    height: float

    def __post_init__(self):
        for name in ("cx", "cy", "width", "height"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"ellipse {name} must be finite")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("ellipse width and height must be positive")

    def contains(self, x: float, y: float) -> bool:
        dx = (x - self.cx) / (self.width / 2)
        dy = (y - self.cy) / (self.height / 2)
        return dx * dx + dy * dy <= 1.0

    @property
    def mean_diameter(self) -> float:
        return (self.width + self.height) / 2


@dataclass(frozen=True)
class EllipseAnnotation:
    pupil: Ellipse
    iris: Ellipse

    def __post_init__(self):
        if not self.iris.contains(self.pupil.cx, self.pupil.cy):
            raise ValidationError("pupil center must lie inside the iris ellipse")

    def to_dict(self):
        return {
            "pupil_cx": self.pupil.cx,
            "pupil_cy": self.pupil.cy,
            "pupil_w": self.pupil.width,
            "pupil_h": self.pupil.height,
            "iris_cx": self.iris.cx,
            "iris_cy": self.iris.cy,
            "iris_w": self.iris.width,
            "iris_h": self.iris.height,
        }
