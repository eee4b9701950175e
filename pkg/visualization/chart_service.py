# visualization/chart_service.py

"""
Chart Service
ROC curves for the baseline and DLS scores of one target.
"""

import logging
import re
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from models.result_model import RocPoint
from utils.exceptions import ValidationError

logger = logging.getLogger(__name__)

MODEL_COLORS = {"baseline": "#4C72B0", "dls": "#DD8452"}


def safe_name(name: str) -> str:
    """'ACR>=300.0' -> 'ACR_ge_300.0' for use in file names"""
    for symbol, word in ((">=", "_ge_"), ("<=", "_le_"), (">", "_gt_"), ("<", "_lt_")):
        name = name.replace(symbol, word)
    return re.sub(r"[^A-Za-z0-9._-]", "_", name)


class ChartService:
    def __init__(self, output_dir: Union[str, Path]):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

        plt.rcParams["font.family"] = "DejaVu Sans"
        plt.rcParams["axes.unicode_minus"] = False

    def generate_roc_chart(
        self,
        target: str,
        curves: Mapping[str, Sequence[RocPoint]],
        aucs: Optional[Mapping[str, float]] = None,
    ) -> str:
        if not curves or not any(curves.values()):
            raise ValidationError(f"No ROC points to plot for {target}")

        fig, ax = plt.subplots(figsize=(6, 6))
        for model in sorted(curves):
            points = curves[model]
            label = model
            if aucs and model in aucs:
                label = f"{model} (AUC {100 * aucs[model]:.1f})"
            ax.plot(
                [p.fpr for p in points],
                [p.tpr for p in points],
                linewidth=2,
                color=MODEL_COLORS.get(model),
                label=label,
            )

        ax.plot([0, 1], [0, 1], linestyle="--", color="grey", linewidth=1)
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.set_aspect("equal")
        ax.set_title(target, fontsize=14, fontweight="bold", pad=20)
        ax.set_xlabel("1 - Specificity", fontweight="bold")
        ax.set_ylabel("Sensitivity", fontweight="bold")
        ax.legend(loc="lower right")
        ax.grid(True, alpha=0.3)
        plt.tight_layout()

        filepath = self.output_dir / f"roc_{safe_name(target)}.png"
        plt.savefig(filepath, dpi=300, bbox_inches="tight", facecolor="white", edgecolor="none")
        plt.close(fig)

        logger.info(f"ROC chart saved: {filepath}")
        return str(filepath)
