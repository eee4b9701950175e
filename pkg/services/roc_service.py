# services/roc_service.py

"""
ROC Service
AUC estimation with mid-ranks, DeLong variance and paired comparison,
Bonferroni correction, PPV at the top fraction, bootstrap intervals and
ROC curves.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import norm, rankdata

from models.result_model import AucEstimate, BootstrapResult, PairedComparison, PpvResult, RocPoint
from models.score_model import ScoredSample
from utils.exceptions import DegenerateComparisonError, DegenerateLabelError, ValidationError
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

Metric = Callable[[np.ndarray, np.ndarray, np.ndarray], float]

DEFAULT_REPLICATES = 2000
MIN_REPLICATES = 100


@dataclass(frozen=True)
class Samples:
    """Column view of scored units: ids, scores and boolean labels"""

    unit_ids: np.ndarray
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if not len(self.unit_ids) == len(self.scores) == len(self.labels):
            raise ValidationError("unit ids, scores and labels must have equal length")
        if not np.all(np.isfinite(self.scores)):
            raise ValidationError("scores must be finite")

    def __len__(self) -> int:
        return len(self.scores)

    @property
    def n_pos(self) -> int:
        return int(self.labels.sum())

    @property
    def n_neg(self) -> int:
        return len(self) - self.n_pos

    def take(self, index: np.ndarray) -> "Samples":
        return Samples(self.unit_ids[index], self.scores[index], self.labels[index])

    @classmethod
    def from_arrays(cls, unit_ids, scores, labels) -> "Samples":
        return cls(
            np.asarray(unit_ids, dtype=str),
            np.asarray(scores, dtype=float),
            np.asarray(labels, dtype=bool),
        )

    @classmethod
    def from_frame(
        cls, frame: pd.DataFrame, score: str = "score", label: str = "label", unit: str = "unit_id"
    ) -> "Samples":
        return cls.from_arrays(frame[unit].to_numpy(), frame[score].to_numpy(), frame[label])


SampleLike = Union[Samples, Sequence[ScoredSample]]


def as_samples(samples: SampleLike) -> Samples:
    if isinstance(samples, Samples):
        return samples
    return Samples.from_arrays(
        [s.unit_id for s in samples], [s.score for s in samples], [s.label for s in samples]
    )


def _require_both_classes(samples: Samples, minimum: int = 1) -> None:
    if samples.n_pos < 1 or samples.n_neg < 1:
        raise DegenerateLabelError()
    if samples.n_pos < minimum or samples.n_neg < minimum:
        raise ValidationError(
            f"at least {minimum} positives and {minimum} negatives required, "
            f"got {samples.n_pos} and {samples.n_neg}"
        )


def _placements(samples: Samples) -> Tuple[float, np.ndarray, np.ndarray]:
    """AUC and the structural components (V10 per positive, V01 per negative)"""
    _require_both_classes(samples)
    positives = samples.scores[samples.labels]
    negatives = samples.scores[~samples.labels]
    m, n = len(positives), len(negatives)
    # Mid-ranks: tied scores share the average rank
    combined = rankdata(np.concatenate([positives, negatives]))
    rank_pos = rankdata(positives)
    rank_neg = rankdata(negatives)
    v10 = (combined[:m] - rank_pos) / n
    v01 = 1.0 - (combined[m:] - rank_neg) / m
    auc = (combined[:m].sum() - m * (m + 1) / 2.0) / (m * n)
    return float(auc), v10, v01


def auc_midrank(samples: SampleLike) -> AucEstimate:
    samples = as_samples(samples)
    auc, _, _ = _placements(samples)
    return AucEstimate(auc=auc, n_pos=samples.n_pos, n_neg=samples.n_neg)


def delong_components(samples: SampleLike) -> Tuple[np.ndarray, np.ndarray]:
    _, v10, v01 = _placements(as_samples(samples))
    return v10, v01


def _z_quantile(level: float) -> float:
    if not 0 < level < 1:
        raise ValidationError(f"confidence level must lie in (0, 1), got {level}")
    return float(norm.ppf(1 - (1 - level) / 2))


def delong_variance_ci(samples: SampleLike, level: float = 0.95) -> AucEstimate:
    samples = as_samples(samples)
    _require_both_classes(samples, minimum=2)
    auc, v10, v01 = _placements(samples)
    variance = float(np.var(v10, ddof=1) / len(v10) + np.var(v01, ddof=1) / len(v01))
    if variance == 0:
        logger.warning("DeLong variance is zero; confidence interval collapses to the point")
    half_width = _z_quantile(level) * math.sqrt(variance)
    return AucEstimate(
        auc=auc,
        n_pos=samples.n_pos,
        n_neg=samples.n_neg,
        variance=variance,
        ci_low=max(0.0, auc - half_width),
        ci_high=min(1.0, auc + half_width),
    )


def _centered_dot(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.dot(x - x.mean(), y - y.mean()) / (len(x) - 1))


def delong_paired_test(
    samples_a: SampleLike, samples_b: SampleLike, level: float = 0.95
) -> PairedComparison:
    """
    Paired DeLong comparison of two scorings of the same units; the
    one-sided p-value tests superiority of b over a.
    """
    a, b = as_samples(samples_a), as_samples(samples_b)
    if len(a) != len(b) or not np.array_equal(a.unit_ids, b.unit_ids):
        raise ValidationError("paired samples must cover the same units in the same order")
    if not np.array_equal(a.labels, b.labels):
        raise ValidationError("paired samples must carry identical labels")

    est_a = delong_variance_ci(a, level)
    est_b = delong_variance_ci(b, level)
    _, v10_a, v01_a = _placements(a)
    _, v10_b, v01_b = _placements(b)
    m, n = len(v10_a), len(v01_a)
    # Covariance of the two AUCs over the shared units
    covariance = _centered_dot(v10_a, v10_b) / m + _centered_dot(v01_a, v01_b) / n
    variance = est_a.variance + est_b.variance - 2 * covariance
    delta = est_b.auc - est_a.auc

    # Zero variance is only consistent with equal AUCs
    if variance <= 0:
        if delta != 0:
            raise DegenerateComparisonError()
        z, p, variance = 0.0, 0.5, 0.0
    else:
        z = delta / math.sqrt(variance)
        p = float(norm.sf(z))
    half_width = _z_quantile(level) * math.sqrt(variance)
    return PairedComparison(
        auc_a=est_a,
        auc_b=est_b,
        delta=delta,
        delta_ci_low=max(-1.0, delta - half_width),
        delta_ci_high=min(1.0, delta + half_width),
        z=z,
        p_one_sided=p,
        variance=variance,
    )


def bonferroni_alpha(alpha: float, m_tests: int) -> float:
    if m_tests < 1:
        raise ValidationError("Bonferroni correction needs at least one test")
    return alpha / m_tests


def _top_order(unit_ids: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Indices ordered by score descending, unit id ascending"""
    _, codes = np.unique(unit_ids, return_inverse=True)
    return np.lexsort((codes, -scores))


def ppv_at_top_fraction(samples: SampleLike, fraction: float = 0.05) -> PpvResult:
    samples = as_samples(samples)
    if not 0 < fraction < 1:
        raise ValidationError(f"fraction must lie in (0, 1), got {fraction}")
    if len(samples) == 0:
        raise ValidationError("no samples to rank")
    # Round half up
    k = int(math.floor(fraction * len(samples) + 0.5))
    if k == 0:
        raise ValidationError(f"top {fraction:.1%} of {len(samples)} units selects nobody")
    top = _top_order(samples.unit_ids, samples.scores)[:k]
    return PpvResult(
        ppv=float(samples.labels[top].mean()), k=k, threshold=float(samples.scores[top[-1]])
    )


def ppv_metric(fraction: float = 0.05) -> Metric:
    def metric(unit_ids, scores, labels):
        return ppv_at_top_fraction(Samples(unit_ids, scores, labels), fraction).ppv

    return metric


def auc_metric(unit_ids, scores, labels) -> float:
    return auc_midrank(Samples(unit_ids, scores, labels)).auc


def _replicate(
    metric: Metric,
    samples: Samples,
    baseline: Optional[Samples],
    seed: int,
    index: int,
    max_attempts: int,
) -> Tuple[float, Optional[float], int]:
    # Draws missing a class are redrawn under the next attempt index
    for attempt in range(max_attempts):
        rng = make_rng(seed, "bootstrap", index, attempt)
        draw = rng.integers(len(samples), size=len(samples))
        try:
            value = metric(*_columns(samples.take(draw)))
            base = metric(*_columns(baseline.take(draw))) if baseline is not None else None
        except (DegenerateLabelError, ValidationError):
            continue
        return value, base, attempt + 1
    raise ValidationError(f"bootstrap metric undefined after {max_attempts} attempts")


def _columns(samples: Samples):
    return samples.unit_ids, samples.scores, samples.labels


def _percentiles(values: np.ndarray, level: float) -> Tuple[float, float]:
    tail = (1 - level) / 2 * 100
    low, high = np.percentile(values, [tail, 100 - tail])
    return float(low), float(high)


def bootstrap_interval(
    metric: Metric,
    samples: SampleLike,
    replicates: int = DEFAULT_REPLICATES,
    seed: int = 0,
    level: float = 0.95,
    paired_baseline: Optional[SampleLike] = None,
    workers: int = 1,
) -> BootstrapResult:
    """
    Percentile bootstrap over units. Replicate r draws from its own
    generator (seed, r, attempt), so results do not depend on ``workers``.
    """
    samples = as_samples(samples)
    if replicates < MIN_REPLICATES:
        raise ValidationError(f"at least {MIN_REPLICATES} replicates required, got {replicates}")
    baseline = as_samples(paired_baseline) if paired_baseline is not None else None
    if baseline is not None and not np.array_equal(baseline.unit_ids, samples.unit_ids):
        raise ValidationError("paired baseline must cover the same units in the same order")

    # Integer codes sort like the ids they replace.
    _, codes = np.unique(samples.unit_ids, return_inverse=True)
    samples = Samples(codes, samples.scores, samples.labels)
    if baseline is not None:
        baseline = Samples(codes, baseline.scores, baseline.labels)

    cap = 10 * replicates

    def run(index):
        return _replicate(metric, samples, baseline, seed, index, cap)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(replicates)))
    else:
        results = [run(index) for index in range(replicates)]

    attempts = sum(r[2] for r in results)
    if attempts > cap:
        raise ValidationError(f"bootstrap needed {attempts} draws, more than the cap of {cap}")

    values = np.array([r[0] for r in results])
    estimate = metric(*_columns(samples))
    lo, hi = _percentiles(values, level)
    if baseline is None:
        return BootstrapResult(estimate=estimate, lo=lo, hi=hi, replicates=replicates)

    base_values = np.array([r[1] for r in results])
    improvements = values - base_values
    base_estimate = metric(*_columns(baseline))
    base_lo, base_hi = _percentiles(base_values, level)
    imp_lo, imp_hi = _percentiles(improvements, level)
    return BootstrapResult(
        estimate=estimate,
        lo=lo,
        hi=hi,
        replicates=replicates,
        baseline_estimate=base_estimate,
        baseline_lo=base_lo,
        baseline_hi=base_hi,
        improvement=estimate - base_estimate,
        improvement_lo=imp_lo,
        improvement_hi=imp_hi,
        p_superiority=float(np.mean(improvements <= 0)),
    )


def roc_curve(samples: SampleLike) -> List[RocPoint]:
    """Operating points at every distinct threshold, from (0, 0) to (1, 1)"""
    samples = as_samples(samples)
    _require_both_classes(samples)
    order = np.argsort(-samples.scores, kind="mergesort")
    scores = samples.scores[order]
    labels = samples.labels[order]
    tps = np.cumsum(labels)
    fps = np.cumsum(~labels)
    # One point per distinct score
    last_of_run = np.r_[np.diff(scores) != 0, True]
    points = [RocPoint(0.0, 0.0, math.inf)]
    for i in np.flatnonzero(last_of_run):
        points.append(
            RocPoint(
                fpr=fps[i] / samples.n_neg, tpr=tps[i] / samples.n_pos, threshold=float(scores[i])
            )
        )
    return points


def trapezoid_area(points: Sequence[RocPoint]) -> float:
    fpr = np.array([p.fpr for p in points])
    tpr = np.array([p.tpr for p in points])
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))


def sensitivity_specificity(samples: SampleLike, threshold: float) -> Tuple[float, float]:
    """Scores at or above the threshold are called positive"""
    samples = as_samples(samples)
    _require_both_classes(samples)
    called = samples.scores >= threshold
    sensitivity = float(called[samples.labels].mean())
    specificity = float((~called[~samples.labels]).mean())
    return sensitivity, specificity


def operating_point_bands(
    samples: SampleLike,
    thresholds: Sequence[float],
    replicates: int = DEFAULT_REPLICATES,
    seed: int = 0,
    level: float = 0.95,
) -> List[Dict[str, float]]:
    """Bootstrap intervals for sensitivity and specificity at each threshold"""
    samples = as_samples(samples)
    bands = []
    for threshold in thresholds:

        def sensitivity(unit_ids, scores, labels, t=threshold):
            return sensitivity_specificity(Samples(unit_ids, scores, labels), t)[0]

        def specificity(unit_ids, scores, labels, t=threshold):
            return sensitivity_specificity(Samples(unit_ids, scores, labels), t)[1]

        sens = bootstrap_interval(sensitivity, samples, replicates, seed, level)
        spec = bootstrap_interval(specificity, samples, replicates, seed, level)
        bands.append(
            {
                "threshold": float(threshold),
                "sensitivity": sens.estimate,
                "sensitivity_low": sens.lo,
                "sensitivity_high": sens.hi,
                "specificity": spec.estimate,
                "specificity_low": spec.lo,
                "specificity_high": spec.hi,
            }
        )
    return bands
