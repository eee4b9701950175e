# tests/test_cli.py

"""
End-to-end tests for the eye-study command line
"""

import csv
import json

import numpy as np
import pytest

from main import EXIT_DATA, EXIT_INSUFFICIENT, EXIT_OK, EXIT_USAGE, main
from models.result_model import EVAL_COLUMNS, SUBGROUP_COLUMNS
from services.ablation_service import save_image
from tests.conftest import SYNTH_SEED
from tests.test_helper import ANNOTATION_HEADER, write_rows

pytestmark = pytest.mark.usefixtures("restore_root_logging")

TWO_TARGETS = "ACR>=300.0,eGFR<60.0"


def _run(command, data_dir, out_dir, *extra):
    return main(
        [
            command,
            "--data-dir",
            str(data_dir),
            "--out-dir",
            str(out_dir),
            "--seed",
            str(SYNTH_SEED),
            *extra,
        ]
    )


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


class TestUsage:
    def test_unknown_flag(self):
        assert main(["evaluate", "--bogus"]) == EXIT_USAGE

    def test_missing_command(self):
        assert main([]) == EXIT_USAGE

    def test_version(self):
        assert main(["--version"]) == EXIT_OK

    def test_invalid_mode(self, tmp_path):
        argv = ["ablate", "--input-dir", str(tmp_path), "--output-dir", str(tmp_path), "--mode", "Blur"]
        assert main(argv) == EXIT_USAGE


class TestDataErrors:
    def test_missing_data_dir(self, tmp_path):
        assert _run("ingest", tmp_path / "absent", tmp_path / "out") == EXIT_DATA

    def test_unknown_target(self, synth_dir, tmp_path):
        assert _run("evaluate", synth_dir, tmp_path, "--targets", "Ferritin<30.0") == EXIT_DATA

    def test_bad_config(self, synth_dir, tmp_path):
        config = tmp_path / "study.toml"
        config.write_text("[study]\nworkers = 0\n", encoding="utf-8")
        assert _run("ingest", synth_dir, tmp_path / "out", "--config", str(config)) == EXIT_DATA


class TestCommands:
    def test_ingest(self, synth_dir, tmp_path):
        assert _run("ingest", synth_dir, tmp_path) == EXIT_OK
        header, row = _read_csv(tmp_path / "cohort_summary.csv")
        assert dict(zip(header, row))["patients"] == "600"
        manifest = json.loads((tmp_path / "ingest.manifest.json").read_text(encoding="utf-8"))
        assert "patients.csv" in manifest["input_digests"]
        assert manifest["artifacts"] == ["cohort_summary.csv"]
        assert manifest["seeds"] == {"root": SYNTH_SEED}

    def test_derive(self, synth_dir, tmp_path):
        assert _run("derive", synth_dir, tmp_path) == EXIT_OK
        header = _read_csv(tmp_path / "derived.csv")[0]
        assert header[:3] == ["patient_id", "visit_id", "visit_date"]
        assert "eGFR_gap" in header
        assert (tmp_path / "exclusions.csv").exists()

    def test_fit_then_evaluate(self, synth_dir, tmp_path):
        assert _run("fit-baseline", synth_dir, tmp_path, "--targets", TWO_TARGETS) == EXIT_OK
        assert len(list((tmp_path / "baselines").glob("*.json"))) == 2
        assert _run("evaluate", synth_dir, tmp_path, "--targets", TWO_TARGETS) == EXIT_OK
        rows = _read_csv(tmp_path / "evaluate.csv")
        assert rows[0] == list(EVAL_COLUMNS)
        assert [row[0] for row in rows[1:]] == ["ACR>=300.0", "eGFR<60.0"]
        assert not (tmp_path / "skipped.csv").exists()

    @pytest.mark.parametrize(
        "changed",
        [
            ("--seed", str(SYNTH_SEED + 1)),
            ("--train-split", "ValA", "--dataset-slice", "DevTrain"),
        ],
    )
    def test_stored_baselines_from_other_settings_are_refitted(self, synth_dir, tmp_path, changed):
        stored, fresh = tmp_path / "stored", tmp_path / "fresh"
        assert _run("fit-baseline", synth_dir, stored, "--targets", TWO_TARGETS) == EXIT_OK
        assert _run("evaluate", synth_dir, stored, "--targets", TWO_TARGETS, *changed) == EXIT_OK
        assert _run("evaluate", synth_dir, fresh, "--targets", TWO_TARGETS, *changed) == EXIT_OK
        assert (stored / "evaluate.csv").read_bytes() == (fresh / "evaluate.csv").read_bytes()

    def test_evaluate_is_deterministic(self, synth_dir, tmp_path):
        for name in ("first", "second"):
            assert _run("evaluate", synth_dir, tmp_path / name, "--targets", TWO_TARGETS) == EXIT_OK
        first = (tmp_path / "first" / "evaluate.csv").read_bytes()
        assert first == (tmp_path / "second" / "evaluate.csv").read_bytes()

    def test_insufficient_cases_exit_code(self, synth_dir, tmp_path):
        registry = tmp_path / "targets.json"
        registry.write_text(
            json.dumps(
                {"targets": [{"analyte": "Hgb", "direction": "BelowIsPositive", "cutoffs": [1.0]}]}
            ),
            encoding="utf-8",
        )
        code = _run(
            "evaluate", synth_dir, tmp_path / "out", "--registry", str(registry), "--targets", "Hgb<1.0"
        )
        assert code == EXIT_INSUFFICIENT
        skipped = _read_csv(tmp_path / "out" / "skipped.csv")
        assert skipped[1][:4] == ["evaluate", "Hgb<1.0", "All", "insufficient cases"]
        assert _read_csv(tmp_path / "out" / "evaluate.csv") == [list(EVAL_COLUMNS)]

    def test_markdown_format_and_report(self, synth_dir, tmp_path):
        assert (
            _run("subgroup", synth_dir, tmp_path, "--targets", "ACR>=300.0", "--format", "md")
            == EXIT_OK
        )
        assert _read_csv(tmp_path / "subgroup.csv")[0] == list(SUBGROUP_COLUMNS)
        text = (tmp_path / "subgroup.md").read_text(encoding="utf-8")
        assert text.endswith("Manifest: subgroup.manifest.json\n")

        assert main(["report", "--out-dir", str(tmp_path)]) == EXIT_OK
        assert (tmp_path / "report.md").exists()
        assert (tmp_path / "report.xlsx").exists()

    def test_roc_plot(self, synth_dir, tmp_path):
        assert _run("roc", synth_dir, tmp_path, "--targets", "ACR>=300.0", "--plot") == EXIT_OK
        assert (tmp_path / "charts" / "roc_ACR_ge_300.0.png").exists()
        models = {row[1] for row in _read_csv(tmp_path / "roc.csv")[1:]}
        assert models == {"baseline", "DLS"}

    def test_synth(self, tmp_path):
        code = main(["synth", "--out-dir", str(tmp_path), "--seed", "4", "--n-patients", "25"])
        assert code == EXIT_OK
        assert len(_read_csv(tmp_path / "patients.csv")) == 26
        manifest = json.loads((tmp_path / "synth.manifest.json").read_text(encoding="utf-8"))
        assert "scores.csv" in manifest["artifacts"]

    def test_ablate(self, tmp_path):
        rng = np.random.default_rng(0)
        save_image(rng.integers(0, 256, (64, 64, 3)).astype(np.uint8), tmp_path / "in" / "V1-L.png")
        annotations = write_rows(
            tmp_path / "annotations.csv",
            ANNOTATION_HEADER,
            [["V1-L", "32", "32", "20", "20", "32", "32", "50", "50"]],
        )
        argv = [
            "ablate",
            "--input-dir",
            str(tmp_path / "in"),
            "--output-dir",
            str(tmp_path / "ablated"),
            "--mode",
            "OnlyIris",
            "--annotations",
            str(annotations),
            "--out-dir",
            str(tmp_path / "out"),
        ]
        assert main(argv) == EXIT_OK
        assert (tmp_path / "ablated" / "V1-L.png").exists()
        assert main(argv[:-2] + ["--out-dir", str(tmp_path / "out"), "--mode", "NoPupil"]) == EXIT_OK

    def test_ablate_without_annotations(self, tmp_path):
        save_image(np.zeros((8, 8, 3), dtype=np.uint8), tmp_path / "in" / "V1-L.png")
        argv = [
            "ablate",
            "--input-dir",
            str(tmp_path / "in"),
            "--output-dir",
            str(tmp_path / "ablated"),
            "--mode",
            "NoIris",
            "--data-dir",
            str(tmp_path / "empty"),
            "--out-dir",
            str(tmp_path / "out"),
        ]
        assert main(argv) == EXIT_DATA
