#services/cohort_service.py

"""
Cohort Service
Ingestion of the cohort files, temporal lab/vital matching, derived
quantities (eGFR, BMI, blood-pressure composites) and per-patient visit
sampling.
"""

import json
import logging
import math
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from models.image_model import Ellipse, EllipseAnnotation
from models.patient_model import (
    AVERAGING_WINDOWS,
    CANONICAL_UNITS,
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
    match_window,
)
from models.score_model import SCORE_COLUMNS, ScoreSet
from models.target_model import TargetSpec
from services.ablation_service import normalized_pupil_size
from utils.date_utils import day_gap, within_window
from utils.exceptions import DataNotFoundError, IngestionError, ValidationError
from utils.seeding import make_rng
from utils.validation import (
    parse_date,
    parse_enum,
    parse_float,
    parse_optional_bool,
    parse_optional_float,
    require_columns,
    require_positive,
    require_text,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PATIENT_COLUMNS = (
    "patient_id",
    "sex",
    "race_ethnicity",
    "age",
    "years_with_diabetes",
    "diabetic",
    "dataset_id",
)
VISIT_COLUMNS = ("visit_id", "patient_id", "visit_date", "cataract", "iol")
MEASUREMENT_COLUMNS = ("patient_id", "analyte", "value", "measured_date")
ANNOTATION_COLUMNS = (
    "image_id",
    "pupil_cx",
    "pupil_cy",
    "pupil_w",
    "pupil_h",
    "iris_cx",
    "iris_cy",
    "iris_w",
    "iris_h",
)

DERIVED_BASE_COLUMNS = (
    "patient_id",
    "visit_id",
    "visit_date",
    "dataset_id",
    "age",
    "sex",
    "race_ethnicity",
    "years_with_diabetes",
    "diabetic",
    "cataract",
    "iol",
    "pupil_size",
)
DERIVED_ANALYTES = (
    Analyte.EGFR,
    Analyte.BMI,
    Analyte.MEAN_ARTERIAL_PRESSURE,
    Analyte.PULSE_PRESSURE,
)


def gap_column(analyte: Analyte) -> str:
    return f"{analyte.value}_gap"


DERIVED_COLUMNS = DERIVED_BASE_COLUMNS + tuple(
    name for analyte in Analyte for name in (analyte.value, gap_column(analyte))
)


# --------------------------------------------------------------------------
# Ingestion
# --------------------------------------------------------------------------


def _read_table(path: PathLike, required: Sequence[str]) -> pd.DataFrame:
    """
    Read a CSV or JSONL file as strings. The returned frame carries a
    ``_line`` column with the 1-based source line of every row.
    """
    path = Path(path)
    if not path.exists():
        raise DataNotFoundError(f"input file not found: {path}")

    if path.suffix.lower() in (".jsonl", ".ndjson"):
        records, lines = [], []
        with open(path, encoding="utf-8") as handle:
            for line_no, text in enumerate(handle, start=1):
                if not text.strip():
                    continue
                try:
                    record = json.loads(text)
                except json.JSONDecodeError as e:
                    raise IngestionError(f"invalid JSON: {e.msg}", path, line_no)
                if not isinstance(record, dict):
                    raise IngestionError("each line must be a JSON object", path, line_no)
                records.append({k: "" if v is None else str(v) for k, v in record.items()})
                lines.append(line_no)
        frame = pd.DataFrame.from_records(records).fillna("")
        frame["_line"] = lines
    else:
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
        except (pd.errors.ParserError, UnicodeDecodeError) as e:
            raise IngestionError(f"cannot parse file: {e}", path)
        frame["_line"] = np.arange(len(frame)) + 2

    try:
        require_columns(frame.columns, required, str(path))
    except ValidationError as e:
        raise IngestionError(e.message, path)
    return frame


@contextmanager
def _located(path: PathLike, line: int):
    """Re-raise row validation failures with their file and line"""
    try:
        yield
    except IngestionError:
        raise
    except ValidationError as e:
        raise IngestionError(e.message, path, line) from e


def _rows(frame: pd.DataFrame):
    return frame.to_dict("records")


def _load_patients(path: PathLike) -> Dict[str, Patient]:
    patients: Dict[str, Patient] = {}
    for row in _rows(_read_table(path, PATIENT_COLUMNS)):
        with _located(path, row["_line"]):
            patient_id = require_text(row["patient_id"], "patient_id")
            if patient_id in patients:
                raise ValidationError(f"duplicate patient_id {patient_id}")
            age = parse_optional_float(row["age"], "age")
            patients[patient_id] = Patient(
                patient_id=patient_id,
                sex=parse_enum(row["sex"] or "Unknown", Sex, "sex"),
                race_ethnicity=parse_enum(
                    row["race_ethnicity"] or "Unknown", RaceEthnicity, "race_ethnicity"
                ),
                age=age,
                years_with_diabetes=parse_optional_float(
                    row["years_with_diabetes"], "years_with_diabetes"
                ),
                diabetic=parse_optional_bool(row["diabetic"], "diabetic"),
                dataset_id=(row["dataset_id"] or "Custom").strip(),
            )
    return patients


def _load_visit_rows(path: PathLike, patients: Dict[str, Patient]) -> Dict[str, dict]:
    visits: Dict[str, dict] = {}
    for row in _rows(_read_table(path, VISIT_COLUMNS)):
        with _located(path, row["_line"]):
            visit_id = require_text(row["visit_id"], "visit_id")
            if visit_id in visits:
                raise ValidationError(f"duplicate visit_id {visit_id}")
            patient_id = require_text(row["patient_id"], "patient_id")
            if patient_id not in patients:
                raise ValidationError(f"visit {visit_id} references unknown patient {patient_id}")
            visits[visit_id] = {
                "visit_id": visit_id,
                "patient_id": patient_id,
                "visit_time": parse_date(row["visit_date"], "visit_date"),
                "cataract_present": parse_optional_bool(row["cataract"], "cataract"),
                "intraocular_lens": parse_optional_bool(row["iol"], "iol"),
            }
    return visits


def _load_measurements(
    path: PathLike, patients: Dict[str, Patient]
) -> Dict[Tuple[str, Analyte], Tuple[Measurement, ...]]:
    """Same-day repeats of one analyte collapse into their mean"""
    frame = _read_table(path, MEASUREMENT_COLUMNS)
    has_unit = "unit" in frame.columns
    daily: Dict[tuple, List[float]] = {}
    for row in _rows(frame):
        with _located(path, row["_line"]):
            patient_id = require_text(row["patient_id"], "patient_id")
            if patient_id not in patients:
                raise ValidationError(f"measurement references unknown patient {patient_id}")
            analyte = parse_enum(row["analyte"], Analyte, "analyte")
            if has_unit and row["unit"].strip() and row["unit"].strip() != CANONICAL_UNITS[analyte]:
                raise ValidationError(
                    f"{analyte.value} must be given in {CANONICAL_UNITS[analyte]}, "
                    f"got {row['unit'].strip()}"
                )
            measured = parse_date(row["measured_date"], "measured_date")
            value = parse_float(row["value"], "value")
            daily.setdefault((patient_id, analyte, measured), []).append(value)

    repeats = sum(len(values) - 1 for values in daily.values())
    if repeats:
        logger.info(f"Averaged {repeats} same-day repeat measurement(s) in {Path(path).name}")
    grouped: Dict[Tuple[str, Analyte], List[Measurement]] = {}
    for (patient_id, analyte, measured), values in daily.items():
        grouped.setdefault((patient_id, analyte), []).append(
            Measurement(patient_id, analyte, float(np.mean(values)), measured)
        )
    return {
        key: tuple(sorted(series, key=lambda m: m.measured_time)) for key, series in grouped.items()
    }


def _load_scores(path: PathLike, visits: Dict[str, dict]) -> ScoreSet:
    frame = _read_table(path, SCORE_COLUMNS)

    def fail(mask: pd.Series, message: str):
        if mask.any():
            row = frame.loc[mask.idxmax()]
            raise IngestionError(message.format(**row.to_dict()), path, int(row["_line"]))

    for name in ("image_id", "visit_id", "patient_id", "model_member", "target_name"):
        frame[name] = frame[name].str.strip()
        fail(frame[name] == "", f"{name} is required")

    scores = pd.to_numeric(frame["score"], errors="coerce")
    fail(scores.isna() | (scores < 0) | (scores > 1), "score must lie in [0, 1], got {score!r}")
    frame["score"] = scores.astype(float)

    eyes = {eye.value.lower(): eye.value for eye in Eye}
    normalized = frame["eye"].str.strip().str.lower().replace("", "unknown")
    fail(~normalized.isin(list(eyes)), "eye {eye!r} is not one of: Left, Right, Unknown")
    frame["eye"] = normalized.map(eyes)

    owners = {visit_id: row["patient_id"] for visit_id, row in visits.items()}
    owner = frame["visit_id"].map(owners)
    fail(owner.isna(), "score references unknown visit {visit_id}")
    fail(owner != frame["patient_id"], "visit {visit_id} does not belong to patient {patient_id}")

    fail(
        frame.duplicated(["image_id", "model_member", "target_name"]),
        "duplicate score for image {image_id}, member {model_member}, target {target_name}",
    )
    fail(
        frame.groupby("image_id")["visit_id"].transform("nunique") > 1,
        "image {image_id} is attached to more than one visit",
    )
    return ScoreSet(frame[list(SCORE_COLUMNS)].reset_index(drop=True))


def _load_annotations(
    path: PathLike, image_visits: Optional[Dict[str, str]] = None
) -> Dict[str, Tuple[EllipseAnnotation, Optional[str], Optional[Tuple[int, int]]]]:
    frame = _read_table(path, ANNOTATION_COLUMNS)
    annotations = {}
    for row in _rows(frame):
        with _located(path, row["_line"]):
            image_id = require_text(row["image_id"], "image_id")
            if image_id in annotations:
                raise ValidationError(f"duplicate annotation for image {image_id}")
            visit_id = (row.get("visit_id") or "").strip() or (image_visits or {}).get(image_id)
            if visit_id is None and image_visits is not None:
                raise ValidationError(f"annotation references unknown image {image_id}")
            values = {name: parse_float(row[name], name) for name in ANNOTATION_COLUMNS[1:]}
            annotation = EllipseAnnotation(
                pupil=Ellipse(
                    values["pupil_cx"], values["pupil_cy"], values["pupil_w"], values["pupil_h"]
                ),
                iris=Ellipse(
                    values["iris_cx"], values["iris_cy"], values["iris_w"], values["iris_h"]
                ),
            )
            dims = None
            if (row.get("image_width") or "").strip():
                dims = (
                    int(parse_float(row["image_width"], "image_width")),
                    int(parse_float(row["image_height"], "image_height")),
                )
            annotations[image_id] = (annotation, visit_id, dims)
    return annotations


def load_annotations(path: PathLike) -> Dict[str, EllipseAnnotation]:
    """Pupil/iris annotations keyed by image id, without cohort cross-checks"""
    return {image_id: entry[0] for image_id, entry in _load_annotations(path).items()}


def ingest_cohort(
    patient_file: PathLike,
    visit_file: PathLike,
    measurement_file: PathLike,
    score_file: Optional[PathLike] = None,
    annotation_file: Optional[PathLike] = None,
) -> Cohort:
    """Read, validate and cross-link the cohort files"""
    patients = _load_patients(patient_file)
    visit_rows = _load_visit_rows(visit_file, patients)
    measurements = _load_measurements(measurement_file, patients)
    scores = _load_scores(score_file, visit_rows) if score_file else ScoreSet.empty()

    image_frame = scores.frame.drop_duplicates("image_id")[["image_id", "visit_id", "eye"]]
    images = {
        row.image_id: {"visit_id": row.visit_id, "eye": Eye(row.eye)}
        for row in image_frame.itertuples(index=False)
    }
    if annotation_file:
        loaded = _load_annotations(
            annotation_file, {image_id: item["visit_id"] for image_id, item in images.items()}
        )
        for image_id, (annotation, visit_id, dims) in loaded.items():
            if visit_id not in visit_rows:
                raise IngestionError(
                    f"annotation for {image_id} references unknown visit {visit_id}",
                    annotation_file,
                )
            entry = images.setdefault(image_id, {"visit_id": visit_id, "eye": Eye.UNKNOWN})
            entry["annotation"] = annotation
            if dims:
                entry["width"], entry["height"] = dims

    by_visit: Dict[str, List[ImageRecord]] = {}
    for image_id in sorted(images):
        entry = images[image_id]
        by_visit.setdefault(entry["visit_id"], []).append(
            ImageRecord(
                image_id=image_id,
                visit_id=entry["visit_id"],
                eye=entry["eye"],
                width=entry.get("width", 587),
                height=entry.get("height", 587),
                annotation=entry.get("annotation"),
            )
        )
    visits = {
        visit_id: Visit(images=tuple(by_visit.get(visit_id, ())), **row)
        for visit_id, row in visit_rows.items()
    }

    cohort = Cohort(patients=patients, visits=visits, measurements=measurements, scores=scores)
    logger.info(f"Ingested cohort: {cohort.summary()}")
    return cohort


def slice_cohort(cohort: Cohort, dataset_id: Optional[str]) -> Cohort:
    """Restrict a cohort to the patients of one dataset split"""
    if not dataset_id:
        return cohort
    patients = {pid: p for pid, p in cohort.patients.items() if p.dataset_id == dataset_id}
    if not patients:
        raise DataNotFoundError(f"no patients in dataset {dataset_id}")
    visits = {vid: v for vid, v in cohort.visits.items() if v.patient_id in patients}
    measurements = {key: s for key, s in cohort.measurements.items() if key[0] in patients}
    frame = cohort.scores.frame
    scores = ScoreSet(frame[frame["patient_id"].isin(list(patients))].reset_index(drop=True))
    return Cohort(patients=patients, visits=visits, measurements=measurements, scores=scores)


# --------------------------------------------------------------------------
# Matching and derived quantities
# --------------------------------------------------------------------------


def _check_series(series: Sequence[Measurement], analyte: Analyte) -> None:
    mixed = {m.analyte for m in series if m.analyte is not analyte}
    if mixed:
        names = ", ".join(sorted(a.value for a in mixed))
        raise ValidationError(f"series for {analyte.value} also contains {names}")


def match_measurement(
    visit_time: date,
    series: Sequence[Measurement],
    analyte: Analyte,
    window: Optional[int] = None,
) -> Optional[MatchedValue]:
    """
    The measurement closest in time to the visit, if it lies within the
    analyte's window. Equidistant candidates resolve to the earlier date.
    """
    _check_series(series, analyte)
    window = match_window(analyte) if window is None else window
    best = None
    for measurement in series:
        gap = day_gap(measurement.measured_time, visit_time)
        if gap > window:
            continue
        key = (gap, measurement.measured_time)
        if best is None or key < best[0]:
            best = (key, measurement)
    if best is None:
        return None
    (gap, _), measurement = best
    return MatchedValue(analyte, measurement.value, gap, MatchMethod.CLOSEST)


def window_average(
    visit_time: date,
    series: Sequence[Measurement],
    analyte: Analyte,
    window: Optional[int] = None,
) -> Optional[MatchedValue]:
    """Mean of every measurement within the averaging window"""
    if analyte not in AVERAGING_WINDOWS:
        raise ValidationError(f"{analyte.value} is not averaged over a window")
    _check_series(series, analyte)
    window = AVERAGING_WINDOWS[analyte] if window is None else window
    included = [
        (day_gap(m.measured_time, visit_time), m.value)
        for m in series
        if within_window(m.measured_time, visit_time, window)
    ]
    if not included:
        return None
    gaps, values = zip(*included)
    return MatchedValue(analyte, float(np.mean(values)), min(gaps), MatchMethod.WINDOW_AVERAGE)


def compute_egfr_2021(serum_creatinine: float, age: float, sex: Sex) -> float:
    """Race-free CKD-EPI 2021 creatinine equation, mL/min/1.73 m²"""
    require_positive(serum_creatinine, "serum creatinine")
    require_positive(age, "age")
    if sex is Sex.FEMALE:
        kappa, alpha, factor = 0.7, -0.241, 1.012
    elif sex is Sex.MALE:
        kappa, alpha, factor = 0.9, -0.302, 1.0
    else:
        raise ValidationError("eGFR requires a known sex")
    ratio = serum_creatinine / kappa
    return (
        142.0
        * min(ratio, 1.0) ** alpha
        * max(ratio, 1.0) ** -1.200
        * 0.9938**age
        * factor
    )


def compute_bmi(weight: float, height: float) -> float:
    require_positive(weight, "weight")
    require_positive(height, "height")
    return weight / height**2


# --------------------------------------------------------------------------
# Derived per-visit table
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DerivedCohort:
    """One row per visit with demographics and matched analyte values"""

    frame: pd.DataFrame
    exclusions: Dict[str, int] = field(default_factory=dict)
    max_gap: Optional[int] = None

    def __len__(self) -> int:
        return len(self.frame)

    def available(self, analyte: Analyte) -> pd.DataFrame:
        return self.frame[self.frame[analyte.value].notna()]


def _capped(window: int, max_gap: Optional[int]) -> int:
    return window if max_gap is None else min(window, max_gap)


def _visit_pupil_size(visit: Visit) -> float:
    sizes = [normalized_pupil_size(i.annotation) for i in visit.images if i.annotation]
    return float(np.mean(sizes)) if sizes else math.nan


def _derive_visit(
    cohort: Cohort, visit: Visit, max_gap: Optional[int], exclusions: Counter
) -> dict:
    patient = cohort.patients[visit.patient_id]
    age = cohort.age_at_visit(visit)
    row = {
        "patient_id": patient.patient_id,
        "visit_id": visit.visit_id,
        "visit_date": visit.visit_time.isoformat(),
        "dataset_id": patient.dataset_id,
        "age": age,
        "sex": patient.sex.value,
        "race_ethnicity": patient.race_ethnicity.value,
        "years_with_diabetes": patient.years_with_diabetes,
        "diabetic": patient.diabetic,
        "cataract": visit.cataract_present,
        "iol": visit.intraocular_lens,
        "pupil_size": _visit_pupil_size(visit),
    }

    def series(analyte):
        return cohort.series(patient.patient_id, analyte)

    matched: Dict[Analyte, Optional[MatchedValue]] = {}
    for analyte in Analyte:
        if analyte in DERIVED_ANALYTES:
            continue
        window = _capped(match_window(analyte), max_gap)
        if analyte in AVERAGING_WINDOWS:
            matched[analyte] = window_average(visit.visit_time, series(analyte), analyte, window)
        else:
            matched[analyte] = match_measurement(
                visit.visit_time, series(analyte), analyte, window
            )

    def fallback(analyte):
        window = _capped(match_window(analyte), max_gap)
        return match_measurement(visit.visit_time, series(analyte), analyte, window)

    creatinine = matched[Analyte.CREATININE]
    if creatinine is None:
        matched[Analyte.EGFR] = fallback(Analyte.EGFR)
    elif patient.sex is Sex.UNKNOWN:
        exclusions["egfr_unknown_sex"] += 1
        matched[Analyte.EGFR] = None
    elif age is None or age <= 0:
        # the equation is defined for positive ages only
        exclusions["egfr_missing_age" if age is None else "egfr_nonpositive_age"] += 1
        matched[Analyte.EGFR] = None
    else:
        egfr = compute_egfr_2021(creatinine.value, age, patient.sex)
        matched[Analyte.EGFR] = MatchedValue(Analyte.EGFR, egfr, creatinine.day_gap)

    weight, height = matched[Analyte.WEIGHT], matched[Analyte.HEIGHT]
    if weight is not None and height is not None:
        matched[Analyte.BMI] = MatchedValue(
            Analyte.BMI,
            compute_bmi(weight.value, height.value),
            max(weight.day_gap, height.day_gap),
            MatchMethod.WINDOW_AVERAGE,
        )
    else:
        matched[Analyte.BMI] = fallback(Analyte.BMI)

    systolic, diastolic = matched[Analyte.SYSTOLIC_BP], matched[Analyte.DIASTOLIC_BP]
    if systolic is not None and diastolic is not None:
        gap = max(systolic.day_gap, diastolic.day_gap)
        mean_pressure = (systolic.value + 2 * diastolic.value) / 3
        matched[Analyte.MEAN_ARTERIAL_PRESSURE] = MatchedValue(
            Analyte.MEAN_ARTERIAL_PRESSURE, mean_pressure, gap, MatchMethod.WINDOW_AVERAGE
        )
        matched[Analyte.PULSE_PRESSURE] = MatchedValue(
            Analyte.PULSE_PRESSURE,
            systolic.value - diastolic.value,
            gap,
            MatchMethod.WINDOW_AVERAGE,
        )
    else:
        matched[Analyte.MEAN_ARTERIAL_PRESSURE] = fallback(Analyte.MEAN_ARTERIAL_PRESSURE)
        matched[Analyte.PULSE_PRESSURE] = fallback(Analyte.PULSE_PRESSURE)

    for analyte in Analyte:
        value = matched[analyte]
        row[analyte.value] = value.value if value else math.nan
        row[gap_column(analyte)] = value.day_gap if value else math.nan
    return row


def derive_cohort(cohort: Cohort, max_gap: Optional[int] = None) -> DerivedCohort:
    """
    Build the per-visit table. ``max_gap`` caps every matching and
    averaging window.
    """
    exclusions: Counter = Counter()
    visits = sorted(cohort.visits.values(), key=lambda v: (v.patient_id, v.visit_time, v.visit_id))
    rows = [_derive_visit(cohort, visit, max_gap, exclusions) for visit in visits]
    frame = pd.DataFrame(rows, columns=list(DERIVED_COLUMNS))
    numeric = ["age", "years_with_diabetes", "pupil_size"] + list(DERIVED_COLUMNS[12:])
    frame[numeric] = frame[numeric].apply(pd.to_numeric).astype(float)
    if exclusions:
        logger.warning(f"eGFR exclusions: {dict(exclusions)}")
    logger.info(f"Derived {len(frame)} visits (max_gap={max_gap})")
    return DerivedCohort(frame=frame, exclusions=dict(exclusions), max_gap=max_gap)


# --------------------------------------------------------------------------
# Visit sampling
# --------------------------------------------------------------------------


def sample_visits(candidates: pd.DataFrame, target_name: str, seed: int) -> pd.DataFrame:
    """
    Pick one candidate row per patient, uniformly at random. Each patient
    draws from its own generator seeded by (seed, target, patient) over its
    visits in date order, so the result does not depend on row order.
    """
    if candidates.empty:
        return candidates.copy()
    ordered = candidates.sort_values(["patient_id", "visit_date", "visit_id"], kind="mergesort")
    picks = []
    for patient_id, group in ordered.groupby("patient_id", sort=True):
        rng = make_rng(seed, target_name, patient_id)
        picks.append(group.index[int(rng.integers(len(group)))])
    return ordered.loc[picks].reset_index(drop=True)


def sample_one_visit_per_patient(
    cohort: Cohort,
    target: TargetSpec,
    seed: int,
    derived: Optional[DerivedCohort] = None,
) -> List[Tuple[str, str]]:
    """(patient_id, visit_id) pairs, one per patient with a matched value for the target"""
    derived = derived if derived is not None else derive_cohort(cohort)
    chosen = sample_visits(derived.available(target.analyte), target.name, seed)
    return list(zip(chosen["patient_id"], chosen["visit_id"]))
