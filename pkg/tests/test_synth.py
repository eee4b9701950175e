# tests/test_synth.py

"""
Tests for the synthetic cohort generator
"""

import json
import math

import pandas as pd
import pytest
from scipy.stats import norm

from models.patient_model import Sex
from services.cohort_service import compute_egfr_2021, derive_cohort, ingest_cohort
from services.evaluation_service import EvaluationService
from services.roc_service import auc_midrank
from services.synth_service import (
    MANIFEST_FILE,
    SYNTH_FILES,
    PlantedEffect,
    SynthConfig,
    binormal_delta,
    creatinine_for_egfr,
    draw_binormal_scores,
    generate,
    synth_paths,
    write_synth,
)
from services.target_service import TargetRegistry, label_series
from tests.conftest import SYNTH_PATIENTS, SYNTH_SEED
from tests.test_helper import make_samples
from utils.exceptions import ConfigurationError, ValidationError
from utils.seeding import make_rng


class TestBinormal:
    @pytest.mark.parametrize("auc", [0.5, 0.6, 0.75, 0.8, 0.95])
    def test_delta_reproduces_auc(self, auc):
        assert norm.cdf(binormal_delta(auc) / math.sqrt(2)) == pytest.approx(auc, abs=1e-12)

    @pytest.mark.parametrize("auc", [0.4, 1.0])
    def test_delta_range(self, auc):
        with pytest.raises(ValidationError):
            binormal_delta(auc)

    @pytest.mark.parametrize("auc", [0.5, 0.8])
    def test_drawn_scores_hit_the_planted_auc(self, auc):
        rng = make_rng(0, "binormal", auc)
        labels = rng.random(100_000) < 0.3
        scores = draw_binormal_scores(labels, auc, rng)
        assert abs(auc_midrank(make_samples(scores, labels)).auc - auc) <= 0.01


class TestCreatinineInversion:
    @pytest.mark.parametrize("sex", [Sex.FEMALE, Sex.MALE])
    @pytest.mark.parametrize("egfr", [15.0, 45.0, 59.9, 90.0, 120.0])
    def test_inverse_of_egfr(self, sex, egfr):
        creatinine = creatinine_for_egfr(egfr, 63.0, sex)
        assert compute_egfr_2021(creatinine, 63.0, sex) == pytest.approx(egfr, rel=1e-9)

    def test_unknown_sex(self):
        with pytest.raises(ValidationError):
            creatinine_for_egfr(60.0, 50.0, Sex.UNKNOWN)


class TestConfig:
    @pytest.mark.parametrize(
        "values",
        [
            {"n_patients": 0},
            {"datasets": {"DevTrain": 0.5, "ValA": 0.4}},
            {"sex_proportions": {"Female": 0.5, "Robot": 0.5}},
            {"gap_cap": 600},
            {"cataract_rate": 1.5},
            {"n_members": 0},
        ],
    )
    def test_invalid(self, values):
        with pytest.raises(ConfigurationError):
            SynthConfig.from_dict(values)

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError):
            SynthConfig.from_dict({"n_patient": 10})

    def test_planted_effect_range(self):
        with pytest.raises(ConfigurationError):
            PlantedEffect(dls_auc=1.0)
        with pytest.raises(ConfigurationError):
            PlantedEffect(prevalence=0.0)

    @pytest.mark.parametrize(
        "plants",
        [
            {"ACR>=300.0": PlantedEffect(baseline_auc=0.6), "Hgb<11.0": PlantedEffect(baseline_auc=0.6)},
            {"BMI>=30.0": PlantedEffect()},
            {"ACR>=30.0": PlantedEffect(), "ACR>=300.0": PlantedEffect()},
        ],
    )
    def test_infeasible_plants(self, plants, tmp_path):
        with pytest.raises(ConfigurationError):
            write_synth(SynthConfig(n_patients=5, plants=plants), tmp_path)

    def test_expected_gap_fraction(self):
        config = SynthConfig()
        assert config.expected_gap_fraction(180) == pytest.approx(math.exp(-181 / 60))
        assert config.expected_gap_fraction(500) == 0.0

    def test_round_trip_through_dict(self):
        config = SynthConfig(n_patients=40, seed=9)
        assert SynthConfig.from_dict(config.to_dict()) == config


class TestGeneration:
    def test_same_seed_same_bytes(self, tmp_path):
        config = SynthConfig(n_patients=40, seed=3)
        write_synth(config, tmp_path / "a")
        write_synth(config, tmp_path / "b")
        for name in list(SYNTH_FILES.values()) + [MANIFEST_FILE]:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_different_seed_differs(self, tmp_path):
        write_synth(SynthConfig(n_patients=40, seed=3), tmp_path / "a")
        write_synth(SynthConfig(n_patients=40, seed=4), tmp_path / "b")
        scores = SYNTH_FILES["scores"]
        assert (tmp_path / "a" / scores).read_bytes() != (tmp_path / "b" / scores).read_bytes()

    def test_manifest(self, synth_dir):
        manifest = json.loads((synth_dir / MANIFEST_FILE).read_text(encoding="utf-8"))
        assert manifest["seed"] == SYNTH_SEED
        assert manifest["counts"]["patients"] == SYNTH_PATIENTS
        assert manifest["expected_gap_fraction_over_180"] == pytest.approx(math.exp(-181 / 60))
        acr = manifest["plants"]["ACR>=300.0"]
        assert acr["baseline_factor"] == "age"
        assert acr["prevalence"] == pytest.approx(0.092)
        assert acr["prevalence_source"] == "planted"
        assert len(manifest["plants"]) == 9
        others = [p for name, p in manifest["plants"].items() if name != "ACR>=300.0"]
        assert all(p["baseline_factor"] is None and p["baseline_auc"] == 0.5 for p in others)

    def test_scores_cover_every_visit(self, synth_cohort):
        frame = synth_cohort.scores.frame
        per_visit = frame.groupby(["target_name", "visit_id"]).size()
        assert set(per_visit) == {10}
        assert len(frame["target_name"].unique()) == 9

    @pytest.mark.parametrize("target", ["ACR>=300.0", "eGFR<60.0", "Hgb<11.0"])
    def test_labels_are_constant_per_patient(self, synth_cohort, registry, target):
        """Every matched measurement of a planted analyte carries the patient's label"""
        spec = registry.get(target)
        frame = derive_cohort(synth_cohort).available(spec.analyte).copy()
        frame["label"] = label_series(frame[spec.analyte.value], spec)
        assert frame.groupby("patient_id")["label"].nunique().max() == 1
        assert frame["label"].any() and not frame["label"].all()

    def test_generate_ingests(self):
        cohort, scores, manifest = generate(SynthConfig(n_patients=30, seed=5))
        assert len(cohort.patients) == 30
        assert len(scores) == len(cohort.scores)
        assert manifest["counts"]["visits"] == len(cohort.visits)


@pytest.mark.slow
class TestLargeCohort:
    @pytest.fixture(scope="class")
    def large_dir(self, tmp_path_factory):
        directory = tmp_path_factory.mktemp("large-synth")
        write_synth(SynthConfig(n_patients=10_000, seed=21), directory)
        return directory

    def test_planted_prevalence(self, large_dir):
        manifest = json.loads((large_dir / MANIFEST_FILE).read_text(encoding="utf-8"))
        assert abs(manifest["plants"]["ACR>=300.0"]["visit_prevalence"] - 0.092) <= 0.01

    def test_gap_fraction(self, large_dir):
        measurements = pd.read_csv(large_dir / SYNTH_FILES["measurements"])
        visits = pd.read_csv(large_dir / SYNTH_FILES["visits"])
        pairs = measurements.reset_index().merge(visits, on="patient_id")
        gaps = (
            pd.to_datetime(pairs["measured_date"]) - pd.to_datetime(pairs["visit_date"])
        ).dt.days.abs()
        nearest = gaps.groupby(pairs["index"]).min()
        expected = SynthConfig().expected_gap_fraction(180)
        assert abs((nearest > 180).mean() - expected) <= 0.02

    def test_planted_aucs(self, large_dir):
        paths = synth_paths(large_dir)
        cohort = ingest_cohort(
            paths["patients"],
            paths["visits"],
            paths["measurements"],
            score_file=paths["scores"],
        )
        spec = TargetRegistry.builtin().get("ACR>=300.0")
        service = EvaluationService(cohort, seed=21)
        row = service.evaluate([spec]).rows[0]
        assert 0.74 <= row.dls.auc <= 0.86
        assert 0.55 <= row.baseline.auc <= 0.75
        assert row.improvement > 0

