# models/result_model.py

"""
Result models for ROC statistics and study tables.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from utils.exceptions import ValidationError


@dataclass(frozen=True)
class AucEstimate:
    auc: float
    n_pos: int
    n_neg: int
    variance: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.auc <= 1.0:
            raise ValidationError(f"AUC must lie in [0, 1], got {self.auc}")
        if self.variance is not None and self.variance < 0:
            raise ValidationError("AUC variance must be non-negative")
        if self.ci_low is not None and not self.ci_low <= self.auc <= self.ci_high:
            raise ValidationError("AUC confidence interval must contain the estimate")


@dataclass(frozen=True)
class PairedComparison:
    auc_a: AucEstimate
    auc_b: AucEstimate
    delta: float
    delta_ci_low: float
    delta_ci_high: float
    z: float
    p_one_sided: float
    variance: float


@dataclass(frozen=True)
class RocPoint:
    fpr: float
    tpr: float
    threshold: float


@dataclass(frozen=True)
class PpvResult:
    ppv: float
    k: int
    threshold: float


@dataclass(frozen=True)
class BootstrapResult:
    estimate: float
    lo: float
    hi: float
    replicates: int
    baseline_estimate: Optional[float] = None
    baseline_lo: Optional[float] = None
    baseline_hi: Optional[float] = None
    improvement: Optional[float] = None
    improvement_lo: Optional[float] = None
    improvement_hi: Optional[float] = None
    p_superiority: Optional[float] = None


EVAL_COLUMNS: Tuple[str, ...] = (
    "target",
    "subset",
    "n",
    "n_pos",
    "prevalence",
    "baseline_auc",
    "baseline_ci_low",
    "baseline_ci_high",
    "dls_auc",
    "dls_ci_low",
    "dls_ci_high",
    "improvement",
    "improvement_ci_low",
    "improvement_ci_high",
    "p_one_sided",
    "primary",
    "significant",
    "alpha",
)


@dataclass(frozen=True)
class EvalResult:
    target: str
    n: int
    n_pos: int
    baseline: AucEstimate
    dls: AucEstimate
    improvement: float
    improvement_ci_low: float
    improvement_ci_high: float
    p_one_sided: float
    primary: bool
    significant: bool
    alpha: float
    subset: str = "All"

    def __post_init__(self):
        if self.n < self.n_pos:
            raise ValidationError("n must be at least n_pos")

    @property
    def prevalence(self) -> float:
        return self.n_pos / self.n if self.n else 0.0

    def to_dict(self) -> Dict:
        return {
            "target": self.target,
            "subset": self.subset,
            "n": self.n,
            "n_pos": self.n_pos,
            "prevalence": self.prevalence,
            "baseline_auc": self.baseline.auc,
            "baseline_ci_low": self.baseline.ci_low,
            "baseline_ci_high": self.baseline.ci_high,
            "dls_auc": self.dls.auc,
            "dls_ci_low": self.dls.ci_low,
            "dls_ci_high": self.dls.ci_high,
            "improvement": self.improvement,
            "improvement_ci_low": self.improvement_ci_low,
            "improvement_ci_high": self.improvement_ci_high,
            "p_one_sided": self.p_one_sided,
            "primary": self.primary,
            "significant": self.significant,
            "alpha": self.alpha,
        }


SUBGROUP_COLUMNS: Tuple[str, ...] = (
    "target",
    "subgroup",
    "n",
    "n_pos",
    "baseline_auc",
    "baseline_ci_low",
    "baseline_ci_high",
    "dls_auc",
    "dls_ci_low",
    "dls_ci_high",
    "improvement",
    "improvement_ci_low",
    "improvement_ci_high",
    "p_one_sided",
    "omitted_small",
    "drop_gt_5pct",
    "p_above_0.05",
)


@dataclass(frozen=True)
class SubgroupRow:
    target: str
    subgroup: str
    n: int
    n_pos: int
    result: Optional[EvalResult] = None
    omitted_small: bool = False
    drop_gt_5pct: bool = False
    p_above_005: bool = False

    def __post_init__(self):
        if self.omitted_small and self.result is not None:
            raise ValidationError("omitted subgroup rows carry no statistics")

    def to_dict(self) -> Dict:
        row = {name: None for name in SUBGROUP_COLUMNS}
        row.update(
            {
                "target": self.target,
                "subgroup": self.subgroup,
                "n": self.n,
                "n_pos": self.n_pos,
                "omitted_small": self.omitted_small,
                "drop_gt_5pct": self.drop_gt_5pct,
                "p_above_0.05": self.p_above_005,
            }
        )
        if self.result is not None:
            stats = self.result.to_dict()
            for name in SUBGROUP_COLUMNS[4:14]:
                row[name] = stats[name]
        return row


PPV_COLUMNS: Tuple[str, ...] = (
    "target",
    "n",
    "n_pos",
    "k",
    "baseline_ppv",
    "baseline_ppv_low",
    "baseline_ppv_high",
    "dls_ppv",
    "dls_ppv_low",
    "dls_ppv_high",
    "improvement",
    "improvement_low",
    "improvement_high",
    "p_one_sided",
    "primary",
)


@dataclass(frozen=True)
class PpvRow:
    target: str
    n: int
    n_pos: int
    k: int
    bootstrap: BootstrapResult
    primary: bool

    def to_dict(self) -> Dict:
        b = self.bootstrap
        return {
            "target": self.target,
            "n": self.n,
            "n_pos": self.n_pos,
            "k": self.k,
            "baseline_ppv": b.baseline_estimate,
            "baseline_ppv_low": b.baseline_lo,
            "baseline_ppv_high": b.baseline_hi,
            "dls_ppv": b.estimate,
            "dls_ppv_low": b.lo,
            "dls_ppv_high": b.hi,
            "improvement": b.improvement,
            "improvement_low": b.improvement_lo,
            "improvement_high": b.improvement_hi,
            "p_one_sided": b.p_superiority,
            "primary": self.primary,
        }


ADJUSTED_COLUMNS: Tuple[str, ...] = ("target", "variable", "odds_ratio", "ci_low", "ci_high", "p")


@dataclass(frozen=True)
class AdjustedRow:
    variable: str
    odds_ratio: float
    ci_low: float
    ci_high: float
    p: float
    coefficient: float = 0.0
    standard_error: float = 0.0

    def __post_init__(self):
        if not 0 < self.ci_low <= self.odds_ratio <= self.ci_high:
            raise ValidationError(f"{self.variable}: odds ratio CI must be positive and ordered")

    def to_dict(self, target: str = "") -> Dict:
        return {
            "target": target,
            "variable": self.variable,
            "odds_ratio": self.odds_ratio,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "p": self.p,
        }


ROC_COLUMNS: Tuple[str, ...] = ("target", "model", "fpr", "tpr", "threshold")

SKIP_COLUMNS: Tuple[str, ...] = ("command", "target", "subset", "reason", "n_pos", "n_neg")


@dataclass(frozen=True)
class SkipRecord:
    command: str
    target: str
    reason: str
    subset: str = "All"
    n_pos: Optional[int] = None
    n_neg: Optional[int] = None

    def to_dict(self) -> Dict:
        return {
            "command": self.command,
            "target": self.target,
            "subset": self.subset,
            "reason": self.reason,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
        }


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_hash: str
    seeds: Dict[str, int]
    input_digests: Dict[str, str]
    tool_version: str
    timestamp: str
    artifacts: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "seeds": dict(self.seeds),
            "input_digests": dict(self.input_digests),
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
            "artifacts": list(self.artifacts),
        }
