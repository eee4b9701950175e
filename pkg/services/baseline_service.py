# services/baseline_service.py

"""
Baseline Service
Clinicodemographic baselines: feature selection by availability, feature
encoding, class-balanced L2 logistic regression solved by damped Newton
iterations, augmented baseline variants and the adjusted odds-ratio
analysis.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.special import expit
from scipy.stats import norm

from models.baseline_model import CATEGORICAL, SCALAR, FeatureSchema, FeatureSpec, LogisticModel
from models.result_model import AdjustedRow
from utils.exceptions import (
    CollinearityError,
    ConfigurationError,
    DataNotFoundError,
    DegenerateLabelError,
    SeparationError,
    ValidationError,
)

logger = logging.getLogger(__name__)

UNKNOWN = "Unknown"
STANDARD_FEATURES: Tuple[str, ...] = ("age", "sex", "race_ethnicity", "years_with_diabetes")
CATEGORICAL_REFERENCES: Dict[str, str] = {"sex": "Female", "race_ethnicity": "White"}

# Variables a variant adds on top of the available standard features.
VARIANTS: Dict[str, Tuple[str, ...]] = {
    "standard": (),
    "bp_bmi": ("BMI", "SystolicBP", "DiastolicBP"),
    "pupil": ("pupil_size",),
    "pupil_only": ("pupil_size",),
}

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
ADJUSTED_TOL = 1e-6
SEPARATION_LIMIT = 25.0
RARE_GROUP_FRACTION = 0.02


def is_categorical(feature: str) -> bool:
    return feature in CATEGORICAL_REFERENCES


def _present(frame: pd.DataFrame, feature: str) -> pd.Series:
    column = frame[feature]
    if is_categorical(feature):
        return column.notna() & (column.astype(str) != UNKNOWN) & (column.astype(str) != "")
    return pd.to_numeric(column, errors="coerce").notna()


def availability(frame: pd.DataFrame, feature: str) -> float:
    if len(frame) == 0 or feature not in frame.columns:
        return 0.0
    return float(_present(frame, feature).mean())


def select_baseline_features(
    frame: pd.DataFrame, candidates: Sequence[str], threshold: float = 0.85
) -> List[str]:
    """Candidates available for at least ``threshold`` of the rows, in candidate order"""
    if not candidates:
        raise ValidationError("no candidate baseline features given")
    selected = [f for f in candidates if availability(frame, f) >= threshold]
    if not selected:
        raise ValidationError("no usable baseline features")
    return selected


def variant_features(variant: str, available: Sequence[str]) -> List[str]:
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown baseline variant {variant!r}")
    if variant == "pupil_only":
        return list(VARIANTS[variant])
    return list(available) + [f for f in VARIANTS[variant] if f not in available]


def complete_for_variant(frame: pd.DataFrame, variant: str) -> pd.DataFrame:
    """Rows that carry every variable the variant adds"""
    mask = pd.Series(True, index=frame.index)
    for feature in VARIANTS[variant]:
        mask &= _present(frame, feature)
    return frame[mask]


# --------------------------------------------------------------------------
# Encoding
# --------------------------------------------------------------------------


def fit_schema(frame: pd.DataFrame, features: Sequence[str]) -> FeatureSchema:
    """Training statistics for scalars and level lists for categoricals"""
    specs = []
    for feature in features:
        present = _present(frame, feature)
        if is_categorical(feature):
            levels = tuple(sorted(frame.loc[present, feature].astype(str).unique()))
            if not levels:
                raise ValidationError(f"feature {feature} has no observed levels")
            preferred = CATEGORICAL_REFERENCES[feature]
            reference = preferred if preferred in levels else levels[0]
            specs.append(FeatureSpec(feature, CATEGORICAL, levels, reference))
        else:
            values = pd.to_numeric(frame.loc[present, feature]).to_numpy(dtype=float)
            if len(values) == 0:
                raise ValidationError(f"feature {feature} has no observed values")
            specs.append(FeatureSpec(feature, SCALAR, mean=values.mean(), std=values.std()))
    return FeatureSchema(tuple(specs))


def encode(frame: pd.DataFrame, schema: FeatureSchema) -> np.ndarray:
    """
    Design matrix: z-scored scalars (missing -> 0) and one-hot categoricals
    without the reference level (missing or unseen -> all zeros).
    """
    blocks = []
    for spec in schema.features:
        if spec.name not in frame.columns:
            raise ValidationError(f"missing feature column {spec.name}")
        if spec.kind == SCALAR:
            values = pd.to_numeric(frame[spec.name], errors="coerce").to_numpy(dtype=float)
            z = (values - spec.mean) / spec.std
            blocks.append(np.nan_to_num(z, nan=0.0)[:, None])
            continue
        text = frame[spec.name].astype(str).to_numpy()
        present = _present(frame, spec.name).to_numpy()
        unseen = present & ~np.isin(text, spec.levels)
        if unseen.any():
            logger.warning(
                f"{spec.name}: {int(unseen.sum())} rows with unseen levels "
                f"{sorted(set(text[unseen]))} encoded as the reference"
            )
        for level in spec.levels:
            if level != spec.reference_level:
                blocks.append((text == level).astype(float)[:, None])
    if not blocks:
        return np.zeros((len(frame), 0))
    return np.hstack(blocks)


# --------------------------------------------------------------------------
# Logistic regression
# --------------------------------------------------------------------------


def _augment(X: np.ndarray) -> np.ndarray:
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _penalty_mask(n_columns: int) -> np.ndarray:
    mask = np.ones(n_columns + 1)
    mask[-1] = 0.0
    return mask


def logistic_objective(
    beta: np.ndarray, Xa: np.ndarray, y: np.ndarray, weights: np.ndarray, l2: float
) -> float:
    signed = np.where(y, 1.0, -1.0)
    loss = np.logaddexp(0.0, -signed * (Xa @ beta))
    w = beta[:-1]
    return float(weights @ loss + 0.5 * l2 * (w @ w))


def logistic_gradient(
    beta: np.ndarray, Xa: np.ndarray, y: np.ndarray, weights: np.ndarray, l2: float
) -> np.ndarray:
    p = expit(Xa @ beta)
    return Xa.T @ (weights * (p - y)) + l2 * _penalty_mask(Xa.shape[1] - 1) * beta


def logistic_hessian(
    beta: np.ndarray, Xa: np.ndarray, weights: np.ndarray, l2: float
) -> np.ndarray:
    p = expit(Xa @ beta)
    curvature = weights * p * (1 - p)
    return (Xa.T * curvature) @ Xa + l2 * np.diag(_penalty_mask(Xa.shape[1] - 1))


def _newton_step(hessian: np.ndarray, gradient: np.ndarray) -> np.ndarray:
    try:
        return linalg.solve(hessian, gradient, assume_a="pos")
    except (linalg.LinAlgError, ValueError):
        return linalg.lstsq(hessian, gradient)[0]


def solve_weighted_logistic(
    X: np.ndarray,
    y: np.ndarray,
    sample_weight: Optional[np.ndarray] = None,
    l2_penalty: float = 1.0,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> LogisticModel:
    """
    Minimize  0.5 * l2 * |w|^2 + sum_i s_i * log(1 + exp(-y_i (x_i.w + b)))
    by Newton iterations with step halving. The intercept is unpenalized.
    Converged means the gradient max-norm is at most ``tol``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValidationError(f"design matrix shape {X.shape} does not match {len(y)} labels")
    if not np.all(np.isfinite(X)):
        raise ValidationError("design matrix must be finite")
    weights = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, float)

    Xa = _augment(X)
    beta = np.zeros(Xa.shape[1])
    objective = logistic_objective(beta, Xa, y, weights, l2_penalty)
    history = [objective]
    converged = False
    iterations = 0
    gradient = logistic_gradient(beta, Xa, y, weights, l2_penalty)

    while iterations < max_iter:
        if np.max(np.abs(gradient)) <= tol:
            converged = True
            break
        step = _newton_step(logistic_hessian(beta, Xa, weights, l2_penalty), gradient)
        slack = 1e-12 * max(1.0, abs(objective))
        t = 1.0
        while t > 1e-10:
            candidate = beta - t * step
            value = logistic_objective(candidate, Xa, y, weights, l2_penalty)
            if value <= objective + slack:
                break
            t /= 2
        else:
            break
        iterations += 1
        beta = candidate
        objective = value
        history.append(objective)
        gradient = logistic_gradient(beta, Xa, y, weights, l2_penalty)
    else:
        converged = bool(np.max(np.abs(gradient)) <= tol)

    gradient_norm = float(np.max(np.abs(gradient)))
    if not converged:
        logger.warning(
            f"logistic solver stopped after {iterations} iterations "
            f"with gradient max-norm {gradient_norm:.3g}"
        )
    return LogisticModel(
        coefficients=tuple(float(c) for c in beta[:-1]),
        intercept=float(beta[-1]),
        objective=objective,
        converged=converged,
        iterations=iterations,
        gradient_norm=gradient_norm,
        history=tuple(history),
    )


def balanced_weights(y: np.ndarray) -> np.ndarray:
    """s_i = N / (2 * N_class(i)); each class carries half the total weight"""
    y = np.asarray(y, dtype=bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelError("logistic regression needs both classes")
    return np.where(y, len(y) / (2.0 * n_pos), len(y) / (2.0 * n_neg))


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    class_weight: Optional[str] = "balanced",
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> LogisticModel:
    """L2-regularized logistic regression, ``C`` scaling the data term"""
    if C <= 0:
        raise ValidationError(f"C must be positive, got {C}")
    y = np.asarray(y, dtype=bool)
    if class_weight == "balanced":
        weights = balanced_weights(y)
    elif class_weight is None:
        if y.all() or not y.any():
            raise DegenerateLabelError("logistic regression needs both classes")
        weights = np.ones(len(y))
    else:
        raise ConfigurationError(f"unknown class_weight {class_weight!r}")
    return solve_weighted_logistic(X, y, C * weights, 1.0, tol, max_iter)


def predict_proba(model: LogisticModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(model.coefficients):
        raise ValidationError(
            f"expected {len(model.coefficients)} columns, got shape {X.shape}"
        )
    return expit(X @ np.asarray(model.coefficients) + model.intercept)


# --------------------------------------------------------------------------
# Fitted baselines
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BaselineModel:
    target: str
    variant: str
    schema: FeatureSchema
    model: LogisticModel
    train_split: str
    n_train: int
    C: float = 1.0
    tol: float = DEFAULT_TOL
    seed: Optional[int] = None
    imputed: Dict[str, int] = field(default_factory=dict)
    dataset_slice: Optional[str] = None
    availability_threshold: Optional[float] = None

    @property
    def features(self) -> List[str]:
        return self.schema.names

    def predict(self, frame: pd.DataFrame) -> np.ndarray:
        return predict_proba(self.model, encode(frame, self.schema))

    def stale_fields(self, **expected) -> List[str]:
        """Names of fit settings that differ from ``expected``"""
        return sorted(name for name, value in expected.items() if getattr(self, name) != value)

    def to_dict(self):
        return {
            "target": self.target,
            "variant": self.variant,
            "schema": self.schema.to_dict(),
            "model": self.model.to_dict(),
            "train_split": self.train_split,
            "n_train": self.n_train,
            "C": self.C,
            "tol": self.tol,
            "seed": self.seed,
            "imputed": dict(self.imputed),
            "dataset_slice": self.dataset_slice,
            "availability_threshold": self.availability_threshold,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "BaselineModel":
        return cls(
            target=data["target"],
            variant=data["variant"],
            schema=FeatureSchema.from_dict(data["schema"]),
            model=LogisticModel.from_dict(data["model"]),
            train_split=data["train_split"],
            n_train=int(data["n_train"]),
            C=float(data.get("C", 1.0)),
            tol=float(data.get("tol", DEFAULT_TOL)),
            seed=data.get("seed"),
            imputed=dict(data.get("imputed", {})),
            dataset_slice=data.get("dataset_slice"),
            availability_threshold=data.get("availability_threshold"),
        )

    def save(self, path: Union[str, Path]) -> str:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return str(path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "BaselineModel":
        path = Path(path)
        if not path.exists():
            raise DataNotFoundError(f"baseline model not found: {path}")
        return cls.from_dict(json.loads(path.read_text()))


def fit_baseline(
    train: pd.DataFrame,
    labels: np.ndarray,
    target: str,
    features: Sequence[str],
    variant: str = "standard",
    train_split: str = "DevTrain",
    C: float = 1.0,
    tol: float = DEFAULT_TOL,
    seed: Optional[int] = None,
    dataset_slice: Optional[str] = None,
    availability_threshold: Optional[float] = None,
) -> BaselineModel:
    """Fit a class-balanced baseline on training rows (all labeled visits)"""
    if len(train) != len(labels):
        raise ValidationError("one label per training row required")
    schema = fit_schema(train, features)
    imputed = {f: int((~_present(train, f)).sum()) for f in features}
    model = fit_logistic(encode(train, schema), labels, C=C, tol=tol)
    logger.info(
        f"Fitted {variant} baseline for {target} on {len(train)} {train_split} rows "
        f"(features: {', '.join(features)})"
    )
    return BaselineModel(
        target=target,
        variant=variant,
        schema=schema,
        model=model,
        train_split=train_split,
        n_train=len(train),
        C=C,
        tol=tol,
        seed=seed,
        imputed={k: v for k, v in imputed.items() if v},
        dataset_slice=dataset_slice,
        availability_threshold=availability_threshold,
    )


# --------------------------------------------------------------------------
# Adjusted analysis
# --------------------------------------------------------------------------


def pool_rare_groups(values: pd.Series, fraction: float = RARE_GROUP_FRACTION) -> pd.Series:
    """Unknown and groups under ``fraction`` of rows become 'Other'"""
    values = values.astype(str).replace({UNKNOWN: "Other", "": "Other"})
    shares = values.value_counts(normalize=True)
    rare = [level for level, share in shares.items() if share < fraction]
    return values.where(~values.isin(rare), "Other")


def _collinear_columns(design: np.ndarray, names: Sequence[str]) -> List[str]:
    kept: List[int] = []
    offending = []
    for j, name in enumerate(names):
        trial = design[:, kept + [j]]
        if np.linalg.matrix_rank(trial) == len(kept) + 1:
            kept.append(j)
        else:
            offending.append(name)
    return offending


def adjusted_analysis(
    outcome_labels: Sequence[bool],
    covariates: pd.DataFrame,
    dls_scores: Sequence[float],
    reference_levels: Optional[Mapping[str, str]] = None,
) -> List[AdjustedRow]:
    """
    Unweighted, unpenalized logistic regression of the outcome on the
    covariates and the z-scored DLS score; one odds-ratio row per design
    column plus 'DLS'. Rows with any missing covariate are dropped.
    """
    references = dict(CATEGORICAL_REFERENCES)
    references.update(reference_levels or {})
    y = np.asarray(outcome_labels, dtype=bool)
    scores = np.asarray(dls_scores, dtype=float)
    frame = covariates.reset_index(drop=True).copy()
    if not len(y) == len(scores) == len(frame):
        raise ValidationError("outcomes, covariates and scores must have equal length")

    if "race_ethnicity" in frame.columns:
        frame["race_ethnicity"] = pool_rare_groups(frame["race_ethnicity"])
    keep = np.isfinite(scores)
    for column in frame.columns:
        keep &= _present(frame, column).to_numpy()
    frame, y, scores = frame[keep].reset_index(drop=True), y[keep], scores[keep]
    if y.all() or not y.any():
        raise DegenerateLabelError("adjusted analysis needs both outcome classes")

    blocks, names = [], []
    for column in frame.columns:
        if is_categorical(column):
            levels = sorted(frame[column].astype(str).unique())
            reference = references.get(column)
            reference = reference if reference in levels else levels[0]
            for level in levels:
                if level != reference:
                    blocks.append((frame[column].astype(str) == level).to_numpy(float))
                    names.append(f"{column}={level}")
        else:
            blocks.append(pd.to_numeric(frame[column]).to_numpy(float))
            names.append(column)
    spread = scores.std()
    if spread == 0:
        raise CollinearityError(["DLS"])
    blocks.append((scores - scores.mean()) / spread)
    names.append("DLS")
    X = np.column_stack(blocks)

    with_intercept = np.column_stack([np.ones(len(y)), X])
    collinear = _collinear_columns(with_intercept, ["intercept"] + names)
    if collinear:
        raise CollinearityError(collinear)

    model = solve_weighted_logistic(X, y, None, 0.0, ADJUSTED_TOL, DEFAULT_MAX_ITER)
    beta = np.r_[model.coefficients, model.intercept]
    if not model.converged or np.max(np.abs(beta)) > SEPARATION_LIMIT:
        raise SeparationError()

    information = logistic_hessian(beta, _augment(X), np.ones(len(y)), 0.0)
    try:
        covariance = linalg.inv(information)
    except linalg.LinAlgError:
        raise CollinearityError(names)
    errors = np.sqrt(np.diag(covariance))[:-1]

    rows = []
    for name, coefficient, se in zip(names, model.coefficients, errors):
        z = coefficient / se
        rows.append(
            AdjustedRow(
                variable=name,
                odds_ratio=math.exp(coefficient),
                ci_low=math.exp(coefficient - 1.96 * se),
                ci_high=math.exp(coefficient + 1.96 * se),
                p=float(2 * norm.sf(abs(z))),
                coefficient=coefficient,
                standard_error=float(se),
            )
        )
    logger.info(f"Adjusted analysis on {len(y)} complete cases ({int(y.sum())} positive)")
    return rows
