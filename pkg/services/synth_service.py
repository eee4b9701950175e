# services/synth_service.py

"""
Synth Service
Seeded synthetic cohorts with planted effects.

Every patient carries one latent severity factor. A planted target's
patient-level label is a thresholded mix of that factor and private
noise; every measurement of the planted analyte is then drawn from the
analyte's log-normal marginal on the side of the cutoff the label calls
for, so the derived label reproduces the planted one. DLS scores follow
the binormal model: latent = delta * label + N(0, 1) with
delta = sqrt(2) * Phi^-1(AUC), and each image score is Phi(latent + a
fixed member/eye offset), which leaves the ranking (and so the AUC) of
the ensembled visit score unchanged.
"""

import json
import logging
import math
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import norm

from models.patient_model import Analyte, Cohort, Sex
from models.score_model import SCORE_COLUMNS, ScoreSet
from models.target_model import Direction, TargetSpec
from services.cohort_service import (
    ANNOTATION_COLUMNS,
    MEASUREMENT_COLUMNS,
    PATIENT_COLUMNS,
    VISIT_COLUMNS,
    ingest_cohort,
)
from services.target_service import PRIMARY_TARGETS, TargetRegistry
from utils.date_utils import years_between
from utils.exceptions import ConfigurationError, ValidationError
from utils.seeding import GENERATOR_NAME, make_rng

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.10g"
SYNTH_FILES = {
    "patients": "patients.csv",
    "visits": "visits.csv",
    "measurements": "measurements.csv",
    "scores": "scores.csv",
    "annotations": "annotations.csv",
}
MANIFEST_FILE = "manifest.json"

# Quantile-space distance kept from a cutoff and from the distribution tails.
_QUANTILE_MARGIN = 1e-6

# (median, log-scale sd) of each analyte's log-normal marginal.
DEFAULT_MARGINALS: Dict[str, Tuple[float, float]] = {
    "ACR": (15.0, 1.3),
    "Albumin": (4.0, 0.1),
    "ALT": (25.0, 0.45),
    "AST": (24.0, 0.4),
    "BUN": (16.0, 0.35),
    "Calcium": (9.3, 0.05),
    "Creatinine": (0.95, 0.3),
    "DiastolicBP": (77.0, 0.12),
    "eGFR": (85.0, 0.3),
    "HbA1c": (7.0, 0.2),
    "HCT": (41.0, 0.1),
    "HDL": (45.0, 0.25),
    "Height": (1.70, 0.05),
    "Hgb": (13.5, 0.12),
    "INR": (1.05, 0.12),
    "LDL": (100.0, 0.3),
    "NonHDL": (130.0, 0.3),
    "Platelet": (230.0, 0.28),
    "Potassium": (4.3, 0.1),
    "RDW": (13.8, 0.08),
    "Sodium": (139.0, 0.02),
    "SystolicBP": (132.0, 0.12),
    "TotalBilirubin": (0.6, 0.45),
    "TotalCholesterol": (175.0, 0.2),
    "Triglycerides": (150.0, 0.5),
    "TSH": (1.8, 0.6),
    "WBC": (7.2, 0.3),
    "Weight": (88.0, 0.2),
}

# eGFR is never written; it is derived from creatinine at ingestion.
MEASURED_ANALYTES: Tuple[Analyte, ...] = tuple(
    Analyte(name) for name in sorted(DEFAULT_MARGINALS) if name != Analyte.EGFR.value
)
_DERIVED_ONLY = (Analyte.BMI, Analyte.MEAN_ARTERIAL_PRESSURE, Analyte.PULSE_PRESSURE)


@dataclass(frozen=True)
class PlantedEffect:
    """True AUCs of the DLS score and of the baseline factor for one target"""

    dls_auc: float = 0.80
    baseline_auc: float = 0.5
    prevalence: Optional[float] = None

    def __post_init__(self):
        for name in ("dls_auc", "baseline_auc"):
            value = getattr(self, name)
            if not 0.5 <= value < 1.0:
                raise ConfigurationError(f"planted {name} must lie in [0.5, 1), got {value}")
        if self.prevalence is not None and not 0.0 < self.prevalence < 1.0:
            raise ConfigurationError(f"planted prevalence must lie in (0, 1), got {self.prevalence}")


def default_plants() -> Dict[str, PlantedEffect]:
    plants = {name: PlantedEffect() for name in PRIMARY_TARGETS}
    plants["ACR>=300.0"] = PlantedEffect(dls_auc=0.80, baseline_auc=0.65, prevalence=0.092)
    return plants


def _proportions(value) -> Tuple[Tuple[str, float], ...]:
    items = value.items() if isinstance(value, Mapping) else value
    return tuple((str(key), float(share)) for key, share in items)


@dataclass(frozen=True)
class SynthConfig:
    n_patients: int = 2000
    seed: int = 0
    visit_counts: Tuple[float, ...] = (0.6, 0.3, 0.1)
    datasets: Tuple[Tuple[str, float], ...] = (("DevTrain", 0.5), ("ValA", 0.5))
    age_mean: float = 55.0
    age_sd: float = 12.0
    sex_proportions: Tuple[Tuple[str, float], ...] = (
        ("Female", 0.49),
        ("Male", 0.49),
        ("Unknown", 0.02),
    )
    race_proportions: Tuple[Tuple[str, float], ...] = (
        ("Hispanic", 0.35),
        ("White", 0.30),
        ("Black", 0.15),
        ("AsianPacificIslander", 0.12),
        ("NativeAmerican", 0.01),
        ("Other", 0.04),
        ("Unknown", 0.03),
    )
    diabetic_rate: float = 0.8
    diabetes_years_mean: float = 8.0
    diabetes_years_missing: float = 0.05
    cataract_rate: float = 0.15
    iol_rate: float = 0.05
    measurement_rate: float = 0.9
    gap_scale: float = 60.0
    gap_cap: int = 500
    visit_spacing: int = 1100
    n_members: int = 5
    severity_loading: float = 0.5
    start_date: str = "2015-01-01"
    marginals: Dict[str, Tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_MARGINALS)
    )
    plants: Dict[str, PlantedEffect] = field(default_factory=default_plants)

    def __post_init__(self):
        if self.n_patients < 1:
            raise ConfigurationError("n_patients must be at least 1")
        for name in ("datasets", "sex_proportions", "race_proportions"):
            object.__setattr__(self, name, _proportions(getattr(self, name)))
        object.__setattr__(self, "visit_counts", tuple(float(p) for p in self.visit_counts))
        for name, shares in (
            ("visit_counts", self.visit_counts),
            ("datasets", [s for _, s in self.datasets]),
            ("sex_proportions", [s for _, s in self.sex_proportions]),
            ("race_proportions", [s for _, s in self.race_proportions]),
        ):
            if any(s < 0 for s in shares) or not math.isclose(sum(shares), 1.0, abs_tol=1e-9):
                raise ConfigurationError(f"{name} must be non-negative and sum to 1")
        sexes = {sex.value for sex in Sex}
        unknown = [key for key, _ in self.sex_proportions if key not in sexes]
        if unknown:
            raise ConfigurationError(f"unknown sex values: {', '.join(unknown)}")
        for rate in ("diabetic_rate", "diabetes_years_missing", "cataract_rate", "iol_rate",
                     "measurement_rate"):
            if not 0.0 <= getattr(self, rate) <= 1.0:
                raise ConfigurationError(f"{rate} must lie in [0, 1]")
        if self.gap_scale <= 0 or self.gap_cap < 0:
            raise ConfigurationError("gap_scale must be positive and gap_cap non-negative")
        if self.visit_spacing <= 2 * self.gap_cap:
            raise ConfigurationError("visit_spacing must exceed twice the gap cap")
        if not 0.0 <= self.severity_loading < 1.0:
            raise ConfigurationError("severity_loading must lie in [0, 1)")
        if self.n_members < 1:
            raise ConfigurationError("n_members must be at least 1")
        missing = [a.value for a in MEASURED_ANALYTES if a.value not in self.marginals]
        if missing or Analyte.EGFR.value not in self.marginals:
            raise ConfigurationError(f"marginals missing for: {', '.join(missing or ['eGFR'])}")
        for name, (median, log_sd) in self.marginals.items():
            if median <= 0 or log_sd <= 0:
                raise ConfigurationError(f"marginal for {name} needs a positive median and sd")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SynthConfig":
        values = dict(data)
        if "plants" in values:
            values["plants"] = {
                name: PlantedEffect(**effect) for name, effect in values["plants"].items()
            }
        if "marginals" in values:
            marginals = dict(DEFAULT_MARGINALS)
            marginals.update({k: tuple(v) for k, v in values["marginals"].items()})
            values["marginals"] = marginals
        if "visit_counts" in values:
            values["visit_counts"] = tuple(values["visit_counts"])
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigurationError(f"invalid [synth] configuration: {e}")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for name in ("datasets", "sex_proportions", "race_proportions"):
            data[name] = {key: share for key, share in getattr(self, name)}
        data["visit_counts"] = list(self.visit_counts)
        data["marginals"] = {k: list(v) for k, v in sorted(self.marginals.items())}
        data["plants"] = {k: asdict(v) for k, v in sorted(self.plants.items())}
        return data

    def expected_gap_fraction(self, days: int) -> float:
        """Probability that a generated measurement lies more than ``days`` from its visit"""
        if days >= self.gap_cap:
            return 0.0
        return math.exp(-(days + 1) / self.gap_scale)


# --------------------------------------------------------------------------
# Closed-form pieces
# --------------------------------------------------------------------------


def binormal_delta(auc: float) -> float:
    """Mean shift of unit-variance normals whose AUC is ``auc``"""
    if not 0.5 <= auc < 1.0:
        raise ValidationError(f"AUC must lie in [0.5, 1), got {auc}")
    return math.sqrt(2.0) * norm.ppf(auc)


def draw_binormal_scores(labels, auc: float, rng: np.random.Generator) -> np.ndarray:
    labels = np.asarray(labels, dtype=float)
    return binormal_delta(auc) * labels + rng.standard_normal(len(labels))


def marginal_cdf(value: float, marginal: Tuple[float, float]) -> float:
    median, log_sd = marginal
    return float(norm.cdf((math.log(value) - math.log(median)) / log_sd))


def _marginal_value(q, marginal: Tuple[float, float]):
    median, log_sd = marginal
    return np.exp(math.log(median) + log_sd * norm.ppf(q))


def creatinine_for_egfr(egfr: float, age: float, sex: Sex) -> float:
    """Serum creatinine at which the CKD-EPI 2021 equation returns ``egfr``"""
    if sex is Sex.FEMALE:
        kappa, alpha, factor = 0.7, -0.241, 1.012
    elif sex is Sex.MALE:
        kappa, alpha, factor = 0.9, -0.302, 1.0
    else:
        raise ValidationError("eGFR inversion requires a known sex")
    scaled = egfr / (142.0 * 0.9938**age * factor)
    exponent = 1.0 / alpha if scaled >= 1.0 else 1.0 / -1.200
    return kappa * scaled**exponent


@dataclass(frozen=True)
class _Plant:
    spec: TargetSpec
    effect: PlantedEffect
    prevalence: float
    prevalence_source: str
    threshold: float
    positive_band: Tuple[float, float]
    negative_band: Tuple[float, float]

    @property
    def analyte(self) -> Analyte:
        return self.spec.analyte


def _resolve_plants(config: SynthConfig, registry: TargetRegistry) -> List[_Plant]:
    plants, seen = [], {}
    drivers = [n for n, e in config.plants.items() if e.baseline_auc > 0.5]
    if len(drivers) > 1:
        raise ConfigurationError(
            f"only one target can drive the baseline factor, got {', '.join(sorted(drivers))}"
        )
    for name in sorted(config.plants):
        spec = registry.get(name)
        if spec.analyte in _DERIVED_ONLY:
            raise ConfigurationError(f"cannot plant {name}: {spec.analyte.value} is derived")
        measured = Analyte.CREATININE if spec.analyte is Analyte.EGFR else spec.analyte
        if measured in seen:
            raise ConfigurationError(f"{name} and {seen[measured]} both drive {measured.value}")
        seen[measured] = name

        marginal = config.marginals[spec.analyte.value]
        q_cut = marginal_cdf(spec.headline, marginal)
        above = spec.direction is Direction.ABOVE_IS_POSITIVE
        if not 2 * _QUANTILE_MARGIN < q_cut < 1 - 2 * _QUANTILE_MARGIN:
            raise ConfigurationError(
                f"cannot plant {name}: cutoff {spec.headline} lies outside the marginal support"
            )
        lower = (_QUANTILE_MARGIN, q_cut - _QUANTILE_MARGIN)
        upper = (q_cut + _QUANTILE_MARGIN, 1 - _QUANTILE_MARGIN)
        effect = config.plants[name]
        if effect.prevalence is not None:
            prevalence, source = effect.prevalence, "planted"
        else:
            prevalence, source = (1.0 - q_cut) if above else q_cut, "marginal"
        if not 1e-4 < prevalence < 1 - 1e-4:
            raise ConfigurationError(f"cannot plant {name}: prevalence {prevalence:.2g} is infeasible")
        plants.append(
            _Plant(
                spec=spec,
                effect=effect,
                prevalence=prevalence,
                prevalence_source=source,
                threshold=float(norm.ppf(1.0 - prevalence)),
                positive_band=upper if above else lower,
                negative_band=lower if above else upper,
            )
        )
    return plants


# --------------------------------------------------------------------------
# Generation
# --------------------------------------------------------------------------


def _choice(rng: np.random.Generator, options: Tuple[Tuple[str, float], ...]) -> str:
    names = [name for name, _ in options]
    shares = np.array([share for _, share in options])
    return names[int(rng.choice(len(names), p=shares / shares.sum()))]


def _flag(value: Optional[bool]) -> str:
    if value is None:
        return ""
    return "true" if value else "false"


def _patient_id(index: int) -> str:
    return f"P{index:06d}"


class _Generator:
    def __init__(self, config: SynthConfig, registry: TargetRegistry):
        self.config = config
        self.plants = _resolve_plants(config, registry)
        self.by_measured = {
            (Analyte.CREATININE if p.analyte is Analyte.EGFR else p.analyte): p
            for p in self.plants
        }
        self.driver = next((p for p in self.plants if p.effect.baseline_auc > 0.5), None)
        self.start = date.fromisoformat(config.start_date)
        self.patients: List[dict] = []
        self.visits: List[dict] = []
        self.measurements: List[tuple] = []
        self.annotations: List[dict] = []
        self.visit_labels: Dict[str, List[bool]] = {p.spec.name: [] for p in self.plants}

    def run(self) -> None:
        for index in range(self.config.n_patients):
            self._patient(_patient_id(index))

    def _patient(self, patient_id: str) -> None:
        config = self.config
        rng = make_rng(config.seed, "synth", patient_id)
        loading = config.severity_loading
        private = math.sqrt(1.0 - loading**2)

        dataset = _choice(rng, config.datasets)
        sex = Sex(_choice(rng, config.sex_proportions))
        race = _choice(rng, config.race_proportions)
        severity = rng.standard_normal()
        labels = {
            p.spec.name: bool(loading * severity + private * rng.standard_normal() > p.threshold)
            for p in self.plants
        }

        age_z = rng.standard_normal()
        if self.driver is not None:
            delta = binormal_delta(self.driver.effect.baseline_auc)
            age_z += delta * (labels[self.driver.spec.name] - self.driver.prevalence)
        age = round(float(np.clip(config.age_mean + config.age_sd * age_z, 18.0, 95.0)), 1)

        diabetic = bool(rng.random() < config.diabetic_rate)
        years = round(float(rng.exponential(config.diabetes_years_mean)), 1) if diabetic else 0.0
        if rng.random() < config.diabetes_years_missing:
            years = None
        self.patients.append(
            {
                "patient_id": patient_id,
                "sex": sex.value,
                "race_ethnicity": race,
                "age": age,
                "years_with_diabetes": years,
                "diabetic": _flag(diabetic),
                "dataset_id": dataset,
            }
        )

        n_visits = int(rng.choice(len(config.visit_counts), p=config.visit_counts)) + 1
        first = self.start + timedelta(days=int(rng.integers(0, 730)))
        visit_date = first
        for number in range(n_visits):
            if number:
                spacing = config.visit_spacing + int(rng.integers(0, 200))
                visit_date = visit_date + timedelta(days=spacing)
            visit_id = f"{patient_id}-V{number + 1}"
            cataract = bool(rng.random() < config.cataract_rate)
            self.visits.append(
                {
                    "visit_id": visit_id,
                    "patient_id": patient_id,
                    "visit_date": visit_date.isoformat(),
                    "cataract": _flag(cataract),
                    "iol": _flag(bool(rng.random() < config.iol_rate)),
                }
            )
            for name, label in labels.items():
                self.visit_labels[name].append(label)
            visit_age = age + years_between(first, visit_date)
            self._measurements(rng, patient_id, visit_date, visit_age, sex, severity, labels)
            self._annotations(rng, visit_id)

    def _measurements(self, rng, patient_id, visit_date, visit_age, sex, severity, labels):
        config = self.config
        n = len(MEASURED_ANALYTES)
        present = rng.random(n) < config.measurement_rate
        gaps = np.minimum(np.floor(rng.exponential(config.gap_scale, n)), config.gap_cap)
        signs = np.where(rng.random(n) < 0.5, -1, 1)
        noise = rng.standard_normal(n)
        quantiles = rng.random(n)
        loading = config.severity_loading
        private = math.sqrt(1.0 - loading**2)

        for i, analyte in enumerate(MEASURED_ANALYTES):
            if not present[i]:
                continue
            plant = self.by_measured.get(analyte)
            if plant is None or (plant.analyte is Analyte.EGFR and sex is Sex.UNKNOWN):
                median, log_sd = config.marginals[analyte.value]
                z = loading * severity + private * noise[i]
                value = math.exp(math.log(median) + log_sd * z)
            else:
                lo, hi = plant.positive_band if labels[plant.spec.name] else plant.negative_band
                q = lo + (hi - lo) * quantiles[i]
                value = float(_marginal_value(q, config.marginals[plant.analyte.value]))
                if plant.analyte is Analyte.EGFR:
                    value = creatinine_for_egfr(value, visit_age, sex)
            measured = visit_date + timedelta(days=int(signs[i] * gaps[i]))
            self.measurements.append((patient_id, analyte.value, value, measured.isoformat()))

    def _annotations(self, rng, visit_id):
        for eye in ("L", "R"):
            iris_w = float(rng.normal(200.0, 10.0))
            iris_h = iris_w * float(rng.uniform(0.95, 1.05))
            ratio = float(rng.uniform(0.25, 0.6))
            cx, cy = 293.5 + rng.normal(0.0, 5.0, 2)
            self.annotations.append(
                {
                    "image_id": f"{visit_id}-{eye}",
                    "visit_id": visit_id,
                    "pupil_cx": round(float(cx), 2),
                    "pupil_cy": round(float(cy), 2),
                    "pupil_w": round(ratio * iris_w, 2),
                    "pupil_h": round(ratio * iris_h, 2),
                    "iris_cx": round(float(cx), 2),
                    "iris_cy": round(float(cy), 2),
                    "iris_w": round(iris_w, 2),
                    "iris_h": round(iris_h, 2),
                }
            )

    def scores(self) -> pd.DataFrame:
        visit_ids = np.array([v["visit_id"] for v in self.visits], dtype=object)
        patient_ids = np.array([v["patient_id"] for v in self.visits], dtype=object)
        member_offsets = np.linspace(-0.2, 0.2, self.config.n_members)
        images = [
            (f"m{m}", eye, offset + (0.05 if eye == "Right" else -0.05))
            for m, offset in enumerate(member_offsets)
            for eye in ("Left", "Right")
        ]
        frames = []
        for plant in self.plants:
            name = plant.spec.name
            rng = make_rng(self.config.seed, "synth-scores", name)
            latent = draw_binormal_scores(self.visit_labels[name], plant.effect.dls_auc, rng)
            for member, eye, offset in images:
                frames.append(
                    pd.DataFrame(
                        {
                            "image_id": visit_ids + f"-{eye[0]}",
                            "visit_id": visit_ids,
                            "patient_id": patient_ids,
                            "eye": eye,
                            "model_member": member,
                            "target_name": name,
                            "score": norm.cdf(latent + offset),
                        }
                    )
                )
        if not frames:
            return pd.DataFrame(columns=list(SCORE_COLUMNS))
        frame = pd.concat(frames, ignore_index=True)
        return frame.sort_values(
            ["target_name", "visit_id", "model_member", "eye"], kind="mergesort"
        ).reset_index(drop=True)

    def manifest(self) -> Dict[str, Any]:
        plants = {}
        for plant in self.plants:
            is_driver = plant is self.driver
            labels = self.visit_labels[plant.spec.name]
            plants[plant.spec.name] = {
                "analyte": plant.analyte.value,
                "dls_auc": plant.effect.dls_auc,
                "dls_delta": binormal_delta(plant.effect.dls_auc),
                "baseline_factor": "age" if is_driver else None,
                "baseline_auc": plant.effect.baseline_auc if is_driver else 0.5,
                "baseline_delta": binormal_delta(plant.effect.baseline_auc) if is_driver else 0.0,
                "prevalence": plant.prevalence,
                "prevalence_source": plant.prevalence_source,
                "visit_prevalence": float(np.mean(labels)) if labels else None,
            }
        return {
            "generator": GENERATOR_NAME,
            "seed": self.config.seed,
            "config": self.config.to_dict(),
            "plants": plants,
            "expected_gap_fraction_over_180": self.config.expected_gap_fraction(180),
            "counts": {
                "patients": len(self.patients),
                "visits": len(self.visits),
                "measurements": len(self.measurements),
                "images": len(self.annotations),
            },
        }


# --------------------------------------------------------------------------
# Public entry points
# --------------------------------------------------------------------------


def _write_csv(frame: pd.DataFrame, path: Path) -> str:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="")
    return str(path)


def write_synth(
    config: SynthConfig, out_dir: PathLike, registry: Optional[TargetRegistry] = None
) -> Dict[str, Any]:
    """Generate a cohort and write its files; returns the manifest"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    generator = _Generator(config, registry or TargetRegistry.builtin())
    generator.run()

    _write_csv(pd.DataFrame(generator.patients, columns=list(PATIENT_COLUMNS)),
               out_dir / SYNTH_FILES["patients"])
    _write_csv(pd.DataFrame(generator.visits, columns=list(VISIT_COLUMNS)),
               out_dir / SYNTH_FILES["visits"])
    _write_csv(pd.DataFrame(generator.measurements, columns=list(MEASUREMENT_COLUMNS)),
               out_dir / SYNTH_FILES["measurements"])
    _write_csv(generator.scores(), out_dir / SYNTH_FILES["scores"])
    _write_csv(
        pd.DataFrame(generator.annotations, columns=["image_id", "visit_id", *ANNOTATION_COLUMNS[1:]]),
        out_dir / SYNTH_FILES["annotations"],
    )

    manifest = generator.manifest()
    manifest["files"] = dict(sorted(SYNTH_FILES.items()))
    with open(out_dir / MANIFEST_FILE, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    logger.info(
        f"Synthesized {len(generator.patients)} patients, {len(generator.visits)} visits "
        f"into {out_dir}"
    )
    return manifest


def synth_paths(directory: PathLike) -> Dict[str, Path]:
    directory = Path(directory)
    return {key: directory / name for key, name in SYNTH_FILES.items()}


def generate(
    config: SynthConfig,
    out_dir: Optional[PathLike] = None,
    registry: Optional[TargetRegistry] = None,
) -> Tuple[Cohort, ScoreSet, Dict[str, Any]]:
    """
    Synthesize, write and re-ingest a cohort. Without ``out_dir`` the files
    go to a temporary directory that is removed afterwards.
    """
    if out_dir is None:
        with tempfile.TemporaryDirectory() as scratch:
            return generate(config, scratch, registry)
    manifest = write_synth(config, out_dir, registry)
    paths = synth_paths(out_dir)
    cohort = ingest_cohort(
        paths["patients"],
        paths["visits"],
        paths["measurements"],
        score_file=paths["scores"],
        annotation_file=paths["annotations"],
    )
    return cohort, cohort.scores, manifest
