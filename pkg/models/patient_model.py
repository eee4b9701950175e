# models/patient_model.py

"""
Cohort data model: patients, visits, images, measurements and matched values.
"""

import math
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from types import MappingProxyType
from typing import Dict, Mapping, Optional, Tuple

from models.image_model import EllipseAnnotation
from models.score_model import ScoreSet
from utils.date_utils import years_between
from utils.exceptions import ValidationError


class Sex(Enum):
    FEMALE = "Female"
    MALE = "Male"
    UNKNOWN = "Unknown"


class RaceEthnicity(Enum):
    HISPANIC = "Hispanic"
    WHITE = "White"
    BLACK = "Black"
    ASIAN_PACIFIC_ISLANDER = "AsianPacificIslander"
    NATIVE_AMERICAN = "NativeAmerican"
    OTHER = "Other"
    UNKNOWN = "Unknown"


class Eye(Enum):
    LEFT = "Left"
    RIGHT = "Right"
    UNKNOWN = "Unknown"


class MatchMethod(Enum):
    CLOSEST = "Closest"
    WINDOW_AVERAGE = "WindowAverage"


class Analyte(Enum):
    ACR = "ACR"
    ALBUMIN = "Albumin"
    ALT = "ALT"
    AST = "AST"
    BMI = "BMI"
    BUN = "BUN"
    CALCIUM = "Calcium"
    CREATININE = "Creatinine"
    DIASTOLIC_BP = "DiastolicBP"
    EGFR = "eGFR"
    HBA1C = "HbA1c"
    HCT = "HCT"
    HDL = "HDL"
    HGB = "Hgb"
    INR = "INR"
    LDL = "LDL"
    MEAN_ARTERIAL_PRESSURE = "MeanArterialPressure"
    NON_HDL = "NonHDL"
    PLATELET = "Platelet"
    POTASSIUM = "Potassium"
    PULSE_PRESSURE = "PulsePressure"
    RDW = "RDW"
    SODIUM = "Sodium"
    SYSTOLIC_BP = "SystolicBP"
    TOTAL_BILIRUBIN = "TotalBilirubin"
    TOTAL_CHOLESTEROL = "TotalCholesterol"
    TRIGLYCERIDES = "Triglycerides"
    TSH = "TSH"
    WBC = "WBC"
    WEIGHT = "Weight"
    HEIGHT = "Height"


DATASET_IDS = ("DevTrain", "DevTune", "ValA", "ValB", "ValC")

# One canonical unit per analyte; ingestion rejects anything else.
CANONICAL_UNITS: Dict[Analyte, str] = {
    Analyte.ACR: "mg/g",
    Analyte.ALBUMIN: "g/dL",
    Analyte.ALT: "U/L",
    Analyte.AST: "U/L",
    Analyte.BMI: "kg/m²",
    Analyte.BUN: "mg/dL",
    Analyte.CALCIUM: "mg/dL",
    Analyte.CREATININE: "mg/dL",
    Analyte.DIASTOLIC_BP: "mmHg",
    Analyte.EGFR: "mL/min/1.73 m²",
    Analyte.HBA1C: "%",
    Analyte.HCT: "%",
    Analyte.HDL: "mg/dL",
    Analyte.HGB: "g/dL",
    Analyte.INR: "ratio",
    Analyte.LDL: "mg/dL",
    Analyte.MEAN_ARTERIAL_PRESSURE: "mmHg",
    Analyte.NON_HDL: "mg/dL",
    Analyte.PLATELET: "10³/μL",
    Analyte.POTASSIUM: "mEq/L",
    Analyte.PULSE_PRESSURE: "mmHg",
    Analyte.RDW: "%",
    Analyte.SODIUM: "mEq/L",
    Analyte.SYSTOLIC_BP: "mmHg",
    Analyte.TOTAL_BILIRUBIN: "mg/dL",
    Analyte.TOTAL_CHOLESTEROL: "mg/dL",
    Analyte.TRIGLYCERIDES: "mg/dL",
    Analyte.TSH: "mU/L",
    Analyte.WBC: "10³/μL",
    Analyte.WEIGHT: "kg",
    Analyte.HEIGHT: "m",
}

DEFAULT_MATCH_WINDOW = 180
MATCH_WINDOWS: Dict[Analyte, int] = {Analyte.INR: 30, Analyte.HBA1C: 90}

AVERAGING_WINDOWS: Dict[Analyte, int] = {
    Analyte.SYSTOLIC_BP: 90,
    Analyte.DIASTOLIC_BP: 90,
    Analyte.WEIGHT: 90,
    Analyte.HEIGHT: 365,
}


def match_window(analyte: Analyte) -> int:
    if analyte in AVERAGING_WINDOWS:
        return AVERAGING_WINDOWS[analyte]
    return MATCH_WINDOWS.get(analyte, DEFAULT_MATCH_WINDOW)


@dataclass(frozen=True)
class Patient:
    patient_id: str
    sex: Sex = Sex.UNKNOWN
    race_ethnicity: RaceEthnicity = RaceEthnicity.UNKNOWN
    age: Optional[float] = None
    years_with_diabetes: Optional[float] = None
    diabetic: Optional[bool] = None
    dataset_id: str = "Custom"

    def __post_init__(self):
        if not self.patient_id:
            raise ValidationError("patient_id is required")
        if self.age is not None and (not math.isfinite(self.age) or self.age < 0):
            raise ValidationError(f"age must be >= 0, got {self.age}")
        if self.years_with_diabetes is not None and self.years_with_diabetes < 0:
            raise ValidationError(
                f"years_with_diabetes must be >= 0, got {self.years_with_diabetes}"
            )

    def to_dict(self):
        return {
            "patient_id": self.patient_id,
            "sex": self.sex.value,
            "race_ethnicity": self.race_ethnicity.value,
            "age": self.age,
            "years_with_diabetes": self.years_with_diabetes,
            "diabetic": self.diabetic,
            "dataset_id": self.dataset_id,
        }


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    visit_id: str
    eye: Eye = Eye.UNKNOWN
    width: int = 587
    height: int = 587
    annotation: Optional[EllipseAnnotation] = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"image {self.image_id} dimensions must be positive")


@dataclass(frozen=True)
class Visit:
    visit_id: str
    patient_id: str
    visit_time: date
    images: Tuple[ImageRecord, ...] = ()
    cataract_present: Optional[bool] = None
    intraocular_lens: Optional[bool] = None

    def __post_init__(self):
        for image in self.images:
            if image.visit_id != self.visit_id:
                raise ValidationError(
                    f"image {image.image_id} belongs to {image.visit_id}, not {self.visit_id}"
                )


@dataclass(frozen=True)
class Measurement:
    patient_id: str
    analyte: Analyte
    value: float
    measured_time: date

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValidationError(f"{self.analyte.value} value must be finite")

    @property
    def unit(self) -> str:
        return CANONICAL_UNITS[self.analyte]


@dataclass(frozen=True)
class MatchedValue:
    analyte: Analyte
    value: float
    day_gap: int
    method: MatchMethod = MatchMethod.CLOSEST


@dataclass(frozen=True)
class Cohort:
    """Immutable, cross-linked cohort"""

    patients: Mapping[str, Patient]
    visits: Mapping[str, Visit]
    measurements: Mapping[Tuple[str, Analyte], Tuple[Measurement, ...]]
    scores: ScoreSet = field(default_factory=ScoreSet.empty)

    def __post_init__(self):
        for name in ("patients", "visits", "measurements"):
            value = getattr(self, name)
            if not isinstance(value, MappingProxyType):
                object.__setattr__(self, name, MappingProxyType(dict(value)))
        by_patient: Dict[str, list] = {}
        for visit in self.visits.values():
            by_patient.setdefault(visit.patient_id, []).append(visit)
        ordered = {
            patient_id: tuple(sorted(visits, key=lambda v: (v.visit_time, v.visit_id)))
            for patient_id, visits in by_patient.items()
        }
        object.__setattr__(self, "_visits_by_patient", MappingProxyType(ordered))

    def visits_of(self, patient_id: str) -> Tuple[Visit, ...]:
        return self._visits_by_patient.get(patient_id, ())

    def series(self, patient_id: str, analyte: Analyte) -> Tuple[Measurement, ...]:
        return self.measurements.get((patient_id, analyte), ())

    def reference_date(self, patient_id: str) -> Optional[date]:
        visits = self.visits_of(patient_id)
        return visits[0].visit_time if visits else None

    def age_at_visit(self, visit: Visit) -> Optional[float]:
        """Age at the patient's earliest visit plus the years elapsed since"""
        patient = self.patients[visit.patient_id]
        if patient.age is None:
            return None
        return patient.age + years_between(self.reference_date(visit.patient_id), visit.visit_time)

    @property
    def n_measurements(self) -> int:
        return sum(len(series) for series in self.measurements.values())

    def summary(self) -> Dict[str, int]:
        return {
            "patients": len(self.patients),
            "visits": len(self.visits),
            "images": sum(len(v.images) for v in self.visits.values()),
            "measurements": self.n_measurements,
            "scores": len(self.scores),
        }
