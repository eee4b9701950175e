#services/evaluation_service.py

"""
Evaluation Service
Orchestrates the study: ensembles model scores, builds per-target
evaluation sets with one visit per patient, compares baselines with the
DLS score and produces the subgroup, sensitivity, PPV, ROC and adjusted
tables.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from threading import Lock
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from models.patient_model import Cohort
from models.result_model import EvalResult, PpvRow, SkipRecord, SubgroupRow
from models.score_model import EnsembledScore, ScoreSet
from models.target_model import TargetSpec
from services.baseline_service import (
    STANDARD_FEATURES,
    VARIANTS,
    BaselineModel,
    adjusted_analysis,
    complete_for_variant,
    fit_baseline,
    select_baseline_features,
    variant_features,
)
from services.cohort_service import DerivedCohort, derive_cohort, sample_visits
from services.roc_service import (
    Samples,
    bonferroni_alpha,
    bootstrap_interval,
    delong_paired_test,
    ppv_metric,
    roc_curve,
)
from services.target_service import label_series
from utils.exceptions import (
    CollinearityError,
    InsufficientCasesError,
    SeparationError,
    ValidationError,
)
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.05
MIN_SUBGROUP_POSITIVES = 25
SUBGROUP_DROP = 0.05
DEFAULT_WINDOWS: Tuple[int, ...] = (180, 90, 30)
INSUFFICIENT_REASON = "insufficient cases"

EnsembleLike = Union[pd.DataFrame, Sequence[EnsembledScore], ScoreSet]
CohortLike = Union[Cohort, DerivedCohort]

# name -> (column, bucket edges); the first bucket includes its left edge.
NUMERIC_BUCKETS: Dict[str, Tuple[str, Tuple[float, ...]]] = {
    "Age": ("age", (0, 50, 60, 70, math.inf)),
    "BMI": ("BMI", (0, 25, 30, 35, math.inf)),
    "Years with diabetes": ("years_with_diabetes", (0, 5, 10, math.inf)),
    "Pupil size": ("pupil_size", (0, 0.4, 0.5, 1.0)),
}
# name -> (column, label when True, label when False)
FLAG_BUCKETS: Dict[str, Tuple[str, str, str]] = {
    "Cataract": ("cataract", "Cataract", "No cataract"),
    "Diabetic": ("diabetic", "Diabetic", "Non-diabetic"),
    "IOL": ("iol", "IOL", "No IOL"),
}
LEVEL_BUCKETS: Dict[str, str] = {"Sex": "sex", "Race": "race_ethnicity"}
DEFAULT_BUCKETING: Tuple[str, ...] = (
    "Age",
    "Sex",
    "Race",
    "BMI",
    "Years with diabetes",
    "Pupil size",
    "Cataract",
    "Diabetic",
    "IOL",
)


# --------------------------------------------------------------------------
# Score ensembling
# --------------------------------------------------------------------------


def ensemble_frame(scores: ScoreSet) -> pd.DataFrame:
    """Flat mean over every contributing (member, image) score per visit and target"""
    frame = scores.frame
    grouped = frame.groupby(["patient_id", "visit_id", "target_name"], sort=True)
    result = grouped.agg(
        score=("score", "mean"),
        n_models=("model_member", "nunique"),
        n_eyes=("image_id", "nunique"),
    ).reset_index()
    return result.rename(columns={"target_name": "target"})


def ensemble_scores(scores: ScoreSet) -> List[EnsembledScore]:
    return [
        EnsembledScore(
            patient_id=row.patient_id,
            visit_id=row.visit_id,
            target=row.target,
            score=float(row.score),
            n_models=int(row.n_models),
            n_eyes=int(row.n_eyes),
        )
        for row in ensemble_frame(scores).itertuples(index=False)
    ]


def _as_ensemble_frame(ensembled: EnsembleLike) -> pd.DataFrame:
    if isinstance(ensembled, ScoreSet):
        return ensemble_frame(ensembled)
    if isinstance(ensembled, pd.DataFrame):
        return ensembled
    return pd.DataFrame([e.to_dict() for e in ensembled])


def _as_derived(cohort: CohortLike) -> DerivedCohort:
    return cohort if isinstance(cohort, DerivedCohort) else derive_cohort(cohort)


# --------------------------------------------------------------------------
# Evaluation sets
# --------------------------------------------------------------------------


def labeled_rows(frame: pd.DataFrame, spec: TargetSpec) -> pd.DataFrame:
    """Rows with a matched value for the target, plus a boolean ``label``"""
    rows = frame[frame[spec.analyte.value].notna()].copy()
    rows["label"] = label_series(rows[spec.analyte.value], spec)
    return rows


def build_eval_set(
    derived: DerivedCohort,
    spec: TargetSpec,
    ensembled: EnsembleLike,
    seed: int,
    variant: str = "standard",
) -> pd.DataFrame:
    """
    Candidate visits have a label, a DLS score and any variables the
    baseline variant adds; one visit per patient is then sampled.
    """
    ensembled = _as_ensemble_frame(ensembled)
    dls = ensembled.loc[ensembled["target"] == spec.name, ["visit_id", "score"]]
    rows = labeled_rows(derived.frame, spec)
    rows = rows.merge(dls.rename(columns={"score": "dls_score"}), on="visit_id", how="inner")
    rows = complete_for_variant(rows, variant)
    chosen = sample_visits(rows, spec.name, seed)
    chosen["unit_id"] = chosen["patient_id"]
    return chosen


def _check_cases(eval_set: pd.DataFrame, spec: TargetSpec, subset: str = "All") -> None:
    n_pos = int(eval_set["label"].sum()) if len(eval_set) else 0
    n_neg = len(eval_set) - n_pos
    if n_pos < 2 or n_neg < 2:
        raise InsufficientCasesError(f"{spec.name} ({subset})", n_pos, n_neg)


def _samples(eval_set: pd.DataFrame, scores: np.ndarray) -> Samples:
    return Samples.from_arrays(eval_set["unit_id"], scores, eval_set["label"])


def compare(
    eval_set: pd.DataFrame,
    spec: TargetSpec,
    baseline: BaselineModel,
    n_primary: int = 9,
    alpha: float = DEFAULT_ALPHA,
    subset: str = "All",
) -> EvalResult:
    """Paired DeLong comparison of the baseline and DLS on one evaluation set"""
    _check_cases(eval_set, spec, subset)
    comparison = delong_paired_test(
        _samples(eval_set, baseline.predict(eval_set)),
        _samples(eval_set, eval_set["dls_score"].to_numpy(float)),
    )
    threshold = bonferroni_alpha(alpha, n_primary) if spec.primary else alpha
    return EvalResult(
        target=spec.name,
        n=len(eval_set),
        n_pos=int(eval_set["label"].sum()),
        baseline=comparison.auc_a,
        dls=comparison.auc_b,
        improvement=comparison.delta,
        improvement_ci_low=comparison.delta_ci_low,
        improvement_ci_high=comparison.delta_ci_high,
        p_one_sided=comparison.p_one_sided,
        primary=spec.primary,
        significant=comparison.p_one_sided < threshold,
        alpha=threshold,
        subset=subset,
    )


def evaluate_target(
    cohort: CohortLike,
    spec: TargetSpec,
    ensembled: EnsembleLike,
    baseline_model: BaselineModel,
    seed: int,
    n_primary: int = 9,
    alpha: float = DEFAULT_ALPHA,
    subset: str = "All",
) -> EvalResult:
    eval_set = build_eval_set(_as_derived(cohort), spec, ensembled, seed, baseline_model.variant)
    return compare(eval_set, spec, baseline_model, n_primary, alpha, subset)


# --------------------------------------------------------------------------
# Subgroups and temporal sensitivity
# --------------------------------------------------------------------------


def _edge(value: float) -> str:
    return f"{value:g}"


def bucket_labels(eval_set: pd.DataFrame, name: str) -> pd.Series:
    """Subgroup label per row (NaN where the variable is missing)"""
    if name in NUMERIC_BUCKETS:
        column, edges = NUMERIC_BUCKETS[name]
        labels = []
        for i, (low, high) in enumerate(zip(edges, edges[1:])):
            if math.isinf(high):
                labels.append(f"{name} > {_edge(low)}")
            else:
                opening = "[" if i == 0 else "("
                labels.append(f"{name} {opening}{_edge(low)}, {_edge(high)}]")
        values = pd.to_numeric(eval_set[column], errors="coerce")
        return pd.cut(values, bins=list(edges), labels=labels, right=True, include_lowest=True)
    if name in FLAG_BUCKETS:
        column, yes, no = FLAG_BUCKETS[name]
        flags = eval_set[column]
        return flags.map({True: yes, False: no})
    if name in LEVEL_BUCKETS:
        values = eval_set[LEVEL_BUCKETS[name]].astype(str)
        return values.where(values != "Unknown").map(lambda v: f"{name}={v}", na_action="ignore")
    raise ValidationError(f"unknown subgroup variable {name!r}")


def _bucket_order(labels: pd.Series) -> List[str]:
    present = set(labels.dropna())
    if isinstance(labels.dtype, pd.CategoricalDtype):
        return [c for c in labels.cat.categories if c in present]
    return sorted(present)


def subgroup_too_small(
    n_pos: int, n_neg: int, min_positives: int = MIN_SUBGROUP_POSITIVES
) -> bool:
    return n_pos < min_positives or n_neg < 2


def improvement_dropped(full: float, subgroup: float) -> bool:
    """Subgroup improvement more than five AUC points below the full set"""
    return full - subgroup > SUBGROUP_DROP


def subgroup_analysis(
    cohort: CohortLike,
    spec: TargetSpec,
    ensembled: EnsembleLike,
    baseline_model: BaselineModel,
    bucketing: Sequence[str] = DEFAULT_BUCKETING,
    seed: int = 0,
    n_primary: int = 9,
    min_positives: int = MIN_SUBGROUP_POSITIVES,
) -> List[SubgroupRow]:
    """
    The full evaluation set is sampled once and then partitioned, so every
    bucket reuses the same visits and the same fixed baseline.
    """
    eval_set = build_eval_set(_as_derived(cohort), spec, ensembled, seed, baseline_model.variant)
    full = compare(eval_set, spec, baseline_model, n_primary)
    rows = [
        SubgroupRow(
            target=spec.name,
            subgroup="All",
            n=full.n,
            n_pos=full.n_pos,
            result=full,
            p_above_005=full.p_one_sided > 0.05,
        )
    ]
    for name in bucketing:
        labels = bucket_labels(eval_set, name)
        for label in _bucket_order(labels):
            members = eval_set[labels == label]
            n_pos = int(members["label"].sum())
            n_neg = len(members) - n_pos
            if subgroup_too_small(n_pos, n_neg, min_positives):
                rows.append(SubgroupRow(spec.name, str(label), len(members), n_pos, None, True))
                continue
            result = compare(members, spec, baseline_model, n_primary, subset=str(label))
            rows.append(
                SubgroupRow(
                    target=spec.name,
                    subgroup=str(label),
                    n=result.n,
                    n_pos=result.n_pos,
                    result=result,
                    drop_gt_5pct=improvement_dropped(full.improvement, result.improvement),
                    p_above_005=result.p_one_sided > 0.05,
                )
            )
    return rows


@dataclass
class StudyOutcome:
    rows: list
    skipped: List[SkipRecord]


def _insufficient(command: str, spec: TargetSpec, subset: str, error: InsufficientCasesError):
    logger.warning(f"{command}: skipping {spec.name} [{subset}]: {error.message}")
    return SkipRecord(
        command=command,
        target=spec.name,
        reason=INSUFFICIENT_REASON,
        subset=subset,
        n_pos=error.n_pos,
        n_neg=error.n_neg,
    )


def check_windows(windows: Sequence[int]) -> Tuple[int, ...]:
    windows = tuple(int(w) for w in windows)
    if not windows or any(w <= 0 for w in windows):
        raise ValidationError("windows must be positive day counts")
    if any(b >= a for a, b in zip(windows, windows[1:])):
        raise ValidationError(f"windows must be strictly descending, got {windows}")
    return windows


def temporal_sensitivity(
    cohort: Cohort,
    spec: TargetSpec,
    ensembled: EnsembleLike,
    baseline_model: BaselineModel,
    windows: Sequence[int] = DEFAULT_WINDOWS,
    seed: int = 0,
    n_primary: int = 9,
    derive: Optional[Callable[[int], DerivedCohort]] = None,
) -> StudyOutcome:
    """Re-run the evaluation with every matching window capped at W days

    A window left with too few cases becomes a skip record; the remaining
    windows still run.
    """
    derive = derive or (lambda window: derive_cohort(cohort, max_gap=window))
    outcome = StudyOutcome([], [])
    for window in check_windows(windows):
        # the gap filter keeps deltas equal to the window
        subset = f"Time delta ≤ {window}"
        try:
            outcome.rows.append(
                evaluate_target(
                    derive(window), spec, ensembled, baseline_model, seed, n_primary, subset=subset
                )
            )
        except InsufficientCasesError as e:
            outcome.skipped.append(_insufficient("sensitivity", spec, subset, e))
    return outcome


# --------------------------------------------------------------------------
# PPV, ROC, adjusted and augmented analyses
# --------------------------------------------------------------------------


def ppv_analysis(
    eval_set: pd.DataFrame,
    spec: TargetSpec,
    baseline_model: BaselineModel,
    seed: int,
    fraction: float = 0.05,
    replicates: int = 2000,
    workers: int = 1,
) -> PpvRow:
    """PPV among the top fraction for DLS and baseline with paired bootstrap"""
    _check_cases(eval_set, spec)
    dls = _samples(eval_set, eval_set["dls_score"].to_numpy(float))
    base = _samples(eval_set, baseline_model.predict(eval_set))
    bootstrap = bootstrap_interval(
        ppv_metric(fraction),
        dls,
        replicates=replicates,
        seed=derive_seed(seed, "ppv", spec.name),
        paired_baseline=base,
        workers=workers,
    )
    k = int(math.floor(fraction * len(eval_set) + 0.5))
    return PpvRow(
        target=spec.name,
        n=len(eval_set),
        n_pos=int(eval_set["label"].sum()),
        k=k,
        bootstrap=bootstrap,
        primary=spec.primary,
    )


def roc_points(
    eval_set: pd.DataFrame, spec: TargetSpec, baseline_model: BaselineModel
) -> pd.DataFrame:
    """ROC polylines for baseline and DLS on one evaluation set"""
    _check_cases(eval_set, spec)
    frames = []
    for model, scores in (
        ("baseline", baseline_model.predict(eval_set)),
        ("DLS", eval_set["dls_score"].to_numpy(float)),
    ):
        points = roc_curve(_samples(eval_set, scores))
        frames.append(
            pd.DataFrame(
                {
                    "target": spec.name,
                    "model": model,
                    "fpr": [p.fpr for p in points],
                    "tpr": [p.tpr for p in points],
                    "threshold": [p.threshold for p in points],
                }
            )
        )
    return pd.concat(frames, ignore_index=True)


def adjusted_for_target(
    eval_set: pd.DataFrame,
    spec: TargetSpec,
    threshold: float = 0.85,
    candidates: Sequence[str] = STANDARD_FEATURES,
):
    """Adjusted odds ratios on the sampled evaluation set"""
    _check_cases(eval_set, spec)
    features = select_baseline_features(eval_set, candidates, threshold)
    return adjusted_analysis(
        eval_set["label"].to_numpy(bool), eval_set[features], eval_set["dls_score"].to_numpy(float)
    )


def augmented_baseline_comparison(
    derived: DerivedCohort,
    spec: TargetSpec,
    ensembled: EnsembleLike,
    baselines: Dict[str, BaselineModel],
    seed: int,
    n_primary: int = 9,
) -> StudyOutcome:
    """DLS against each baseline variant; rows are labeled by variant"""
    outcome = StudyOutcome([], [])
    for variant, baseline in baselines.items():
        try:
            outcome.rows.append(
                evaluate_target(derived, spec, ensembled, baseline, seed, n_primary, subset=variant)
            )
        except InsufficientCasesError as e:
            outcome.skipped.append(_insufficient("augmented", spec, variant, e))
    return outcome


# --------------------------------------------------------------------------
# Orchestration
# --------------------------------------------------------------------------


class EvaluationService:
    """Runs analyses across targets, reusing derived tables and baselines"""

    def __init__(
        self,
        cohort: Cohort,
        seed: int = 0,
        dataset_slice: Optional[str] = None,
        train_split: str = "DevTrain",
        n_primary: int = 9,
        alpha: float = DEFAULT_ALPHA,
        baseline_c: float = 1.0,
        availability_threshold: float = 0.85,
        workers: int = 1,
    ):
        self.cohort = cohort
        self.seed = seed
        self.dataset_slice = dataset_slice
        self.train_split = train_split
        self.n_primary = n_primary
        self.alpha = alpha
        self.baseline_c = baseline_c
        self.availability_threshold = availability_threshold
        self.workers = max(1, int(workers))
        self._derived: Dict[Optional[int], DerivedCohort] = {}
        self._baselines: Dict[Tuple[str, str], BaselineModel] = {}
        self._lock = Lock()
        self.ensembled = ensemble_frame(cohort.scores)

    # -- shared state ------------------------------------------------------

    def derived(self, max_gap: Optional[int] = None) -> DerivedCohort:
        with self._lock:
            if max_gap not in self._derived:
                self._derived[max_gap] = derive_cohort(self.cohort, max_gap=max_gap)
            return self._derived[max_gap]

    def _split(self, derived: DerivedCohort, evaluation: bool) -> DerivedCohort:
        frame = derived.frame
        if evaluation:
            if self.dataset_slice:
                mask = frame["dataset_id"] == self.dataset_slice
            else:
                mask = frame["dataset_id"] != self.train_split
        else:
            mask = frame["dataset_id"] == self.train_split
        return DerivedCohort(frame[mask].reset_index(drop=True), derived.exclusions, derived.max_gap)

    def evaluation_cohort(self, max_gap: Optional[int] = None) -> DerivedCohort:
        return self._split(self.derived(max_gap), evaluation=True)

    def training_cohort(self) -> DerivedCohort:
        return self._split(self.derived(), evaluation=False)

    def add_baseline(self, baseline: BaselineModel) -> None:
        with self._lock:
            self._baselines[(baseline.target, baseline.variant)] = baseline

    def fit_settings(self) -> Dict[str, object]:
        """Settings a stored baseline must share with this run to be reused"""
        return {
            "seed": self.seed,
            "dataset_slice": self.dataset_slice,
            "train_split": self.train_split,
            "C": self.baseline_c,
            "availability_threshold": self.availability_threshold,
        }

    def adopt_baseline(self, baseline: BaselineModel) -> bool:
        """Reuse a stored baseline unless it was fitted under other settings"""
        stale = baseline.stale_fields(
            features=self._features(baseline.variant), **self.fit_settings()
        )
        if stale:
            logger.warning(
                f"Refitting {baseline.variant} baseline for {baseline.target}: "
                f"stored model differs in {', '.join(stale)}"
            )
            return False
        self.add_baseline(baseline)
        return True

    def _features(self, variant: str) -> List[str]:
        evaluation = self.evaluation_cohort().frame
        available = select_baseline_features(
            evaluation, STANDARD_FEATURES, self.availability_threshold
        )
        return variant_features(variant, available)

    def baseline(self, spec: TargetSpec, variant: str = "standard") -> BaselineModel:
        key = (spec.name, variant)
        with self._lock:
            if key in self._baselines:
                return self._baselines[key]
        features = self._features(variant)
        train = complete_for_variant(labeled_rows(self.training_cohort().frame, spec), variant)
        if train["label"].nunique() < 2:
            raise InsufficientCasesError(
                f"{spec.name} (training)", int(train["label"].sum()), int((~train["label"]).sum())
            )
        model = fit_baseline(
            train,
            train["label"].to_numpy(bool),
            spec.name,
            features,
            variant=variant,
            train_split=self.train_split,
            C=self.baseline_c,
            seed=self.seed,
            dataset_slice=self.dataset_slice,
            availability_threshold=self.availability_threshold,
        )
        self.add_baseline(model)
        return model

    def eval_set(self, spec: TargetSpec, variant: str = "standard") -> pd.DataFrame:
        return build_eval_set(self.evaluation_cohort(), spec, self.ensembled, self.seed, variant)

    # -- per-target fan-out ------------------------------------------------

    def _run(self, command: str, specs: Sequence[TargetSpec], task) -> StudyOutcome:
        def guarded(spec):
            try:
                return task(spec), None
            except InsufficientCasesError as e:
                return None, _insufficient(command, spec, "All", e)
            except (SeparationError, CollinearityError) as e:
                logger.warning(f"{command}: skipping {spec.name}: {e.message}")
                return None, SkipRecord(command=command, target=spec.name, reason=e.message)

        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                outcomes = list(pool.map(guarded, specs))
        else:
            outcomes = [guarded(spec) for spec in specs]

        rows, skipped = [], []
        for result, skip in outcomes:
            if skip is not None:
                skipped.append(skip)
            elif isinstance(result, StudyOutcome):
                rows.extend(result.rows)
                skipped.extend(result.skipped)
            elif isinstance(result, list):
                rows.extend(result)
            else:
                rows.append(result)
        return StudyOutcome(rows, skipped)

    def fit_baselines(self, specs: Sequence[TargetSpec], variants: Iterable[str] = ("standard",)):
        variants = list(variants)
        return self._run(
            "fit-baseline", specs, lambda spec: [self.baseline(spec, v) for v in variants]
        )

    def evaluate(self, specs: Sequence[TargetSpec]) -> StudyOutcome:
        return self._run(
            "evaluate",
            specs,
            lambda spec: compare(
                self.eval_set(spec), spec, self.baseline(spec), self.n_primary, self.alpha
            ),
        )

    def subgroups(
        self, specs: Sequence[TargetSpec], bucketing: Sequence[str] = DEFAULT_BUCKETING
    ) -> StudyOutcome:
        return self._run(
            "subgroup",
            specs,
            lambda spec: subgroup_analysis(
                self.evaluation_cohort(),
                spec,
                self.ensembled,
                self.baseline(spec),
                bucketing,
                self.seed,
                self.n_primary,
            ),
        )

    def sensitivity(
        self, specs: Sequence[TargetSpec], windows: Sequence[int] = DEFAULT_WINDOWS
    ) -> StudyOutcome:
        windows = check_windows(windows)
        return self._run(
            "sensitivity",
            specs,
            lambda spec: temporal_sensitivity(
                self.cohort,
                spec,
                self.ensembled,
                self.baseline(spec),
                windows,
                self.seed,
                self.n_primary,
                derive=self.evaluation_cohort,
            ),
        )

    def ppv(
        self, specs: Sequence[TargetSpec], fraction: float = 0.05, replicates: int = 2000
    ) -> StudyOutcome:
        return self._run(
            "ppv",
            specs,
            lambda spec: ppv_analysis(
                self.eval_set(spec),
                spec,
                self.baseline(spec),
                self.seed,
                fraction,
                replicates,
                workers=1 if len(specs) > 1 else self.workers,
            ),
        )

    def roc(self, specs: Sequence[TargetSpec]) -> StudyOutcome:
        return self._run(
            "roc", specs, lambda spec: roc_points(self.eval_set(spec), spec, self.baseline(spec))
        )

    def adjust(self, specs: Sequence[TargetSpec]) -> StudyOutcome:
        def task(spec):
            rows = adjusted_for_target(self.eval_set(spec), spec, self.availability_threshold)
            return [(spec.name, row) for row in rows]

        return self._run("adjust", specs, task)

    def augmented(
        self, specs: Sequence[TargetSpec], variants: Sequence[str] = tuple(VARIANTS)
    ) -> StudyOutcome:
        def task(spec):
            baselines = {}
            for variant in variants:
                try:
                    baselines[variant] = self.baseline(spec, variant)
                except (InsufficientCasesError, ValidationError) as e:
                    logger.warning(f"No {variant} baseline for {spec.name}: {e.message}")
            return augmented_baseline_comparison(
                self.evaluation_cohort(), spec, self.ensembled, baselines, self.seed, self.n_primary
            )

        return self._run("augmented", specs, task)
