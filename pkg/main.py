#root/main.py

"""
Eye Biomarker Study - Command Line

Exit codes: 0 success, 1 usage error, 2 data or configuration error,
3 at least one target had too few positives or negatives.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd

# Add the project root to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from config.logging_config import StudyLogger
from config.study_config import OUTPUT_FORMATS, TOOL_VERSION, StudyConfig
from models.image_model import AblationMode
from models.result_model import (
    ADJUSTED_COLUMNS,
    EVAL_COLUMNS,
    PPV_COLUMNS,
    ROC_COLUMNS,
    SUBGROUP_COLUMNS,
    RocPoint,
)
from services.ablation_service import ablate_directory, downres_directory, parse_ladder
from services.baseline_service import VARIANTS, BaselineModel
from services.cohort_service import DERIVED_COLUMNS, derive_cohort, ingest_cohort, load_annotations
from services.evaluation_service import INSUFFICIENT_REASON, EvaluationService, StudyOutcome
from services.export_service import ExportService, manifest_name
from services.synth_service import SYNTH_FILES, SynthConfig, write_synth
from services.target_service import TargetRegistry, load_registry
from utils.exceptions import StudyError, ValidationError
from visualization.chart_service import ChartService, safe_name

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INSUFFICIENT = 3

BASELINE_DIR = "baselines"
BASELINE_COLUMNS = (
    "target",
    "variant",
    "features",
    "train_split",
    "n_train",
    "converged",
    "iterations",
    "objective",
)


class StudyArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this CLI reserves 2 for data errors"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with [study] and [synth] sections")
    common.add_argument("--seed", type=int, help="root seed for every random draw")
    common.add_argument("--data-dir", help="directory holding the cohort files")
    common.add_argument("--out-dir", help="directory for result tables and manifests")
    common.add_argument("--format", choices=OUTPUT_FORMATS, help="table format (default csv)")
    common.add_argument("--log-dir", help="also write log files to this directory")
    return common


def _target_options() -> argparse.ArgumentParser:
    targets = argparse.ArgumentParser(add_help=False)
    targets.add_argument("--targets", help="'primary', 'all' or a comma-separated list")
    targets.add_argument("--dataset-slice", help="evaluate on this dataset only")
    targets.add_argument("--train-split", help="dataset used to fit baselines")
    targets.add_argument("--registry", dest="registry_file", help="target override file")
    targets.add_argument("--workers", type=int, help="targets evaluated in parallel")
    return targets


def build_parser() -> StudyArgumentParser:
    parser = StudyArgumentParser(
        prog="eye-study",
        description="Systemic biomarker study from external eye photo scores",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {TOOL_VERSION}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    common, targets = _common_options(), _target_options()

    sub.add_parser("ingest", parents=[common], help="validate and summarize the cohort files")
    sub.add_parser("derive", parents=[common], help="matched labs, eGFR, BMI per visit")

    fit = sub.add_parser("fit-baseline", parents=[common, targets], help="fit baseline models")
    fit.add_argument("--variants", default="standard", help="comma-separated baseline variants")

    evaluate = sub.add_parser("evaluate", parents=[common, targets], help="DLS vs baseline AUC")
    evaluate.add_argument("--variants", help="also compare against these baseline variants")

    ppv = sub.add_parser("ppv", parents=[common, targets], help="PPV at the top fraction")
    ppv.add_argument("--replicates", type=int, help="bootstrap replicates (default 2000)")
    ppv.add_argument("--fraction", type=float, dest="ppv_fraction", help="top fraction")

    sub.add_parser("subgroup", parents=[common, targets], help="subgroup table")

    sensitivity = sub.add_parser(
        "sensitivity", parents=[common, targets], help="tighter matching windows"
    )
    sensitivity.add_argument("--windows", help="strictly descending day windows, e.g. 180,90,30")

    sub.add_parser("adjust", parents=[common, targets], help="adjusted odds ratios")

    roc = sub.add_parser("roc", parents=[common, targets], help="ROC polylines")
    roc.add_argument("--plot", action="store_true", help="also draw one PNG per target")

    ablate = sub.add_parser("ablate", parents=[common], help="mask or gray a directory of images")
    ablate.add_argument("--input-dir", required=True)
    ablate.add_argument("--output-dir", required=True)
    ablate.add_argument(
        "--mode", required=True, choices=[m.value for m in AblationMode], help="ablation mode"
    )
    ablate.add_argument("--annotations", help="annotations file (default <data-dir>/annotations.csv)")

    downres = sub.add_parser("downres", parents=[common], help="resolution ladder")
    downres.add_argument("--input-dir", required=True)
    downres.add_argument("--output-dir", required=True)
    downres.add_argument("--sizes", help="comma-separated target sizes")

    synth = sub.add_parser("synth", parents=[common], help="write a synthetic cohort")
    synth.add_argument("--n-patients", type=int, help="number of patients")

    sub.add_parser("report", parents=[common], help="assemble report.md and report.xlsx")
    return parser


def load_config(args: argparse.Namespace) -> StudyConfig:
    config = StudyConfig.load(args.config)
    overrides = {
        name: getattr(args, name, None)
        for name in (
            "seed",
            "data_dir",
            "out_dir",
            "format",
            "log_dir",
            "targets",
            "dataset_slice",
            "train_split",
            "registry_file",
            "workers",
            "replicates",
            "ppv_fraction",
            "windows",
        )
    }
    return config.with_overrides(**overrides)


class StudyCli:
    def __init__(
        self,
        args: argparse.Namespace,
        config: StudyConfig,
        study_logger: Optional[StudyLogger] = None,
    ):
        self.args = args
        self.config = config
        self.study_logger = study_logger
        self.export = ExportService(config.out_path, config.format)
        self.inputs: List[Path] = []
        self.skipped = []

    # -- inputs ------------------------------------------------------------

    def _input(self, key: str, required: bool = True) -> Optional[Path]:
        stem = Path(SYNTH_FILES[key]).stem
        for suffix in (".csv", ".jsonl"):
            path = self.config.data_path / f"{stem}{suffix}"
            if path.exists():
                self.inputs.append(path)
                return path
        if required:
            raise ValidationError(f"missing {stem}.csv in {self.config.data_path}")
        return None

    def cohort(self):
        return ingest_cohort(
            self._input("patients"),
            self._input("visits"),
            self._input("measurements"),
            score_file=self._input("scores", required=False),
            annotation_file=self._input("annotations", required=False),
        )

    def registry(self) -> TargetRegistry:
        return load_registry(self.config.registry_file)

    def service(self) -> EvaluationService:
        registry = self.registry()
        service = EvaluationService(
            self.cohort(),
            seed=self.config.seed,
            dataset_slice=self.config.dataset_slice,
            train_split=self.config.train_split,
            n_primary=registry.n_primary,
            alpha=self.config.alpha,
            baseline_c=self.config.baseline_c,
            availability_threshold=self.config.availability_threshold,
            workers=self.config.workers,
        )
        for path in sorted((self.config.out_path / BASELINE_DIR).glob("*.json")):
            service.adopt_baseline(BaselineModel.load(path))
        return service

    def specs(self):
        return self.registry().select(self.config.targets)

    def _collect(self, outcome: StudyOutcome) -> list:
        self.skipped.extend(outcome.skipped)
        return outcome.rows

    # -- commands ----------------------------------------------------------

    def ingest(self):
        cohort = self.cohort()
        self.export.export_table("cohort_summary", [cohort.summary()], list(cohort.summary()))

    def derive(self):
        derived = derive_cohort(self.cohort())
        self.export.write_csv(derived.frame[list(DERIVED_COLUMNS)], "derived.csv")
        exclusions = [{"reason": k, "count": v} for k, v in sorted(derived.exclusions.items())]
        self.export.export_table("exclusions", exclusions, ("reason", "count"), "derive")

    def fit_baseline(self):
        variants = _variants(self.args.variants)
        service = self.service()
        rows = []
        for baseline in self._collect(service.fit_baselines(self.specs(), variants)):
            name = f"{safe_name(baseline.target)}__{baseline.variant}.json"
            baseline.save(self.config.out_path / BASELINE_DIR / name)
            rows.append(
                {
                    "target": baseline.target,
                    "variant": baseline.variant,
                    "features": ";".join(baseline.features),
                    "train_split": baseline.train_split,
                    "n_train": baseline.n_train,
                    "converged": baseline.model.converged,
                    "iterations": baseline.model.iterations,
                    "objective": baseline.model.objective,
                }
            )
        self.export.export_table("baselines", rows, BASELINE_COLUMNS, "fit-baseline")

    def evaluate(self):
        service, specs = self.service(), self.specs()
        rows = self._collect(service.evaluate(specs))
        self.export.export_table("evaluate", [r.to_dict() for r in rows], EVAL_COLUMNS)
        if self.args.variants:
            augmented = self._collect(service.augmented(specs, _variants(self.args.variants)))
            self.export.export_table(
                "augmented", [r.to_dict() for r in augmented], EVAL_COLUMNS, "evaluate"
            )

    def ppv(self):
        outcome = self.service().ppv(
            self.specs(), fraction=self.config.ppv_fraction, replicates=self.config.replicates
        )
        self.export.export_table("ppv", [r.to_dict() for r in self._collect(outcome)], PPV_COLUMNS)

    def subgroup(self):
        rows = self._collect(self.service().subgroups(self.specs()))
        self.export.export_table("subgroup", [r.to_dict() for r in rows], SUBGROUP_COLUMNS)

    def sensitivity(self):
        rows = self._collect(self.service().sensitivity(self.specs(), self.config.windows))
        self.export.export_table("sensitivity", [r.to_dict() for r in rows], EVAL_COLUMNS)

    def adjust(self):
        rows = self._collect(self.service().adjust(self.specs()))
        self.export.export_table(
            "adjust", [row.to_dict(target) for target, row in rows], ADJUSTED_COLUMNS
        )

    def roc(self):
        frames = self._collect(self.service().roc(self.specs()))
        frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()
        self.export.export_table("roc", frame.to_dict("records"), ROC_COLUMNS)
        if self.args.plot and not frame.empty:
            charts = ChartService(self.config.out_path / "charts")
            for target, curves in frame.groupby("target", sort=True):
                charts.generate_roc_chart(target, _roc_curves(curves))

    def ablate(self):
        mode = AblationMode(self.args.mode)
        annotations = {}
        path = Path(self.args.annotations) if self.args.annotations else None
        if path is None and mode.needs_annotation:
            path = self._input("annotations")
        if path is not None:
            self.inputs.append(path)
            annotations = load_annotations(path)
        written = ablate_directory(self.args.input_dir, self.args.output_dir, mode, annotations)
        print(f"Ablated {len(written)} images into {self.args.output_dir}")

    def downres(self):
        sizes = parse_ladder(self.args.sizes)
        written = downres_directory(self.args.input_dir, self.args.output_dir, sizes)
        print(f"Wrote {len(written)} resampled images into {self.args.output_dir}")

    def synth(self):
        values = dict(self.config.synth)
        values["seed"] = self.config.seed
        if self.args.n_patients is not None:
            values["n_patients"] = self.args.n_patients
        manifest = write_synth(SynthConfig.from_dict(values), self.config.out_path)
        self.export.artifacts.extend(sorted(manifest["files"].values()))
        print(
            f"Synthesized {manifest['counts']['patients']} patients into {self.config.out_dir}"
        )

    def report(self):
        self.export.export_report()

    def finish(self) -> int:
        if self.study_logger is not None:
            for skip in self.skipped:
                self.study_logger.log_skip(skip.target, skip.reason)
        self.export.export_skips(self.skipped)
        command = self.args.command
        manifest = self.export.build_manifest(
            command,
            self.config.config_hash(),
            {"root": self.config.seed},
            self.inputs,
            TOOL_VERSION,
        )
        self.export.write_manifest(manifest)
        logger.debug(f"Manifest written to {manifest_name(command)}")
        if any(s.reason == INSUFFICIENT_REASON for s in self.skipped):
            return EXIT_INSUFFICIENT
        return EXIT_DATA if self.skipped else EXIT_OK


def _variants(text: Optional[str]) -> List[str]:
    names = [part.strip() for part in (text or "standard").split(",") if part.strip()]
    unknown = [name for name in names if name not in VARIANTS]
    if unknown:
        raise ValidationError(
            f"unknown baseline variant(s) {', '.join(unknown)}; choose from {', '.join(VARIANTS)}"
        )
    return names


def _roc_curves(frame: pd.DataFrame) -> Dict[str, list]:
    return {
        str(model).lower(): [
            RocPoint(r.fpr, r.tpr, r.threshold) for r in group.itertuples(index=False)
        ]
        for model, group in frame.groupby("model", sort=True)
    }


COMMANDS = {
    "ingest": StudyCli.ingest,
    "derive": StudyCli.derive,
    "fit-baseline": StudyCli.fit_baseline,
    "evaluate": StudyCli.evaluate,
    "ppv": StudyCli.ppv,
    "subgroup": StudyCli.subgroup,
    "sensitivity": StudyCli.sensitivity,
    "adjust": StudyCli.adjust,
    "roc": StudyCli.roc,
    "ablate": StudyCli.ablate,
    "downres": StudyCli.downres,
    "synth": StudyCli.synth,
    "report": StudyCli.report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    study_logger = None
    try:
        config = load_config(args)
        study_logger = StudyLogger(config.log_dir)
        study_logger.log_run_start(args.command, TOOL_VERSION)
        cli = StudyCli(args, config, study_logger)
        COMMANDS[args.command](cli)
        code = cli.finish()
    except StudyError as e:
        if study_logger is not None:
            study_logger.log_error(e, args.command)
        print(f"eye-study {args.command}: {e.message}", file=sys.stderr)
        code = EXIT_DATA
    if study_logger is not None:
        study_logger.log_run_stop(args.command, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
