# tests/test_targets.py

"""
Tests for the target registry and label derivation
"""

import json
import math
from pathlib import Path

import pytest

from models.patient_model import Analyte
from models.target_model import Direction, TargetSpec
from services.target_service import (
    PRIMARY_TARGETS,
    TargetRegistry,
    export_registry,
    label_series,
    label_value,
    load_registry,
    spec_from_dict,
)
from utils.exceptions import ConfigurationError, ValidationError

# (analyte, operator, cutoff, unit) for every target row of the study.
TARGET_ROWS = [
    ("ACR", ">=", 30.0, "mg/g"),
    ("ACR", ">=", 300.0, "mg/g"),
    ("ACR", ">=", 1500.0, "mg/g"),
    ("Albumin", "<", 3.5, "g/dL"),
    ("ALT", ">", 29.0, "U/L"),
    ("AST", ">", 36.0, "U/L"),
    ("BMI", ">=", 25.0, "kg/m²"),
    ("BMI", ">=", 30.0, "kg/m²"),
    ("BMI", ">=", 35.0, "kg/m²"),
    ("BMI", ">=", 40.0, "kg/m²"),
    ("BUN", ">", 20.0, "mg/dL"),
    ("Calcium", "<", 8.6, "mg/dL"),
    ("Creatinine", ">", 1.2, "mg/dL"),
    ("DiastolicBP", ">=", 80.0, "mmHg"),
    ("DiastolicBP", ">=", 90.0, "mmHg"),
    ("eGFR", "<", 15.0, "mL/min/1.73 m²"),
    ("eGFR", "<", 30.0, "mL/min/1.73 m²"),
    ("eGFR", "<", 60.0, "mL/min/1.73 m²"),
    ("eGFR", "<", 90.0, "mL/min/1.73 m²"),
    ("HbA1c", ">=", 6.5, "%"),
    ("HbA1c", ">=", 7.0, "%"),
    ("HbA1c", ">=", 8.0, "%"),
    ("HbA1c", ">=", 9.0, "%"),
    ("HCT", "<", 39.0, "%"),
    ("HDL", ">=", 45.0, "mg/dL"),
    ("HDL", ">=", 60.0, "mg/dL"),
    ("Hgb", "<", 11.0, "g/dL"),
    ("Hgb", "<", 12.5, "g/dL"),
    ("INR", "<", 1.1, "ratio"),
    ("LDL", ">=", 100.0, "mg/dL"),
    ("LDL", ">=", 130.0, "mg/dL"),
    ("LDL", ">=", 160.0, "mg/dL"),
    ("LDL", ">=", 190.0, "mg/dL"),
    ("MeanArterialPressure", ">=", 80.0, "mmHg"),
    ("MeanArterialPressure", ">=", 90.0, "mmHg"),
    ("MeanArterialPressure", ">=", 110.0, "mmHg"),
    ("NonHDL", ">=", 130.0, "mg/dL"),
    ("NonHDL", ">=", 160.0, "mg/dL"),
    ("Platelet", "<", 100.0, "10³/μL"),
    ("Platelet", "<", 150.0, "10³/μL"),
    ("Potassium", "<", 3.5, "mEq/L"),
    ("Potassium", ">", 5.0, "mEq/L"),
    ("PulsePressure", ">=", 40.0, "mmHg"),
    ("PulsePressure", ">=", 55.0, "mmHg"),
    ("PulsePressure", ">=", 65.0, "mmHg"),
    ("RDW", ">", 14.5, "%"),
    ("Sodium", "<", 136.0, "mEq/L"),
    ("SystolicBP", ">=", 120.0, "mmHg"),
    ("SystolicBP", ">=", 140.0, "mmHg"),
    ("TotalBilirubin", ">", 1.0, "mg/dL"),
    ("TotalCholesterol", ">=", 200.0, "mg/dL"),
    ("TotalCholesterol", ">=", 240.0, "mg/dL"),
    ("Triglycerides", ">=", 150.0, "mg/dL"),
    ("Triglycerides", ">=", 200.0, "mg/dL"),
    ("Triglycerides", ">=", 500.0, "mg/dL"),
    ("TSH", "<", 0.5, "mU/L"),
    ("TSH", ">", 4.0, "mU/L"),
    ("WBC", "<", 4.0, "10³/μL"),
    ("WBC", ">", 11.0, "10³/μL"),
]


class TestBuiltinRegistry:
    def test_every_row_present(self, registry):
        """Threshold, operator and unit of every row match the transcription"""
        assert len(registry) == len(TARGET_ROWS)
        for analyte, operator, cutoff, unit in TARGET_ROWS:
            spec = registry.get(f"{analyte}{operator}{cutoff:.1f}")
            assert spec.analyte is Analyte(analyte)
            assert spec.headline == cutoff
            assert spec.operator == operator
            assert spec.unit == unit

    def test_exactly_nine_primary(self, registry):
        primary = registry.primary()
        assert len(primary) == 9
        assert {spec.name for spec in primary} == set(PRIMARY_TARGETS)
        assert registry.n_primary == 9

    def test_families_share_cutoffs(self, registry):
        acr = [spec for spec in registry if spec.analyte is Analyte.ACR]
        assert {spec.cutoffs for spec in acr} == {(30.0, 300.0, 1500.0)}
        assert [spec.headline_index for spec in acr] == [0, 1, 2]
        assert registry.get("BMI>=40.0").n_classes == 5

    def test_display_name(self, registry):
        assert registry.get("ACR>=300.0").display_name == "ACR ≥ 300.0"
        assert registry.get("Hgb<11.0").display_name == "Hgb < 11.0"

    def test_select(self, registry):
        assert len(registry.select("primary")) == 9
        assert len(registry.select("all")) == len(TARGET_ROWS)
        assert [s.name for s in registry.select("Hgb<11.0, WBC<4.0")] == ["Hgb<11.0", "WBC<4.0"]
        assert len(registry.select(None)) == 9

    def test_unknown_target(self, registry):
        with pytest.raises(ConfigurationError, match="unknown target"):
            registry.select("Ferritin<30.0")

    def test_duplicate_names_rejected(self, registry):
        spec = registry.get("Hgb<11.0")
        with pytest.raises(ConfigurationError):
            TargetRegistry([spec, spec])


class TestLabels:
    def test_multiclass_index(self, registry):
        spec = registry.get("ACR>=300.0")
        assert label_value(10.0, spec).class_index == 0
        assert label_value(30.0, spec).class_index == 1
        assert label_value(350.0, spec).class_index == 2
        assert label_value(2000.0, spec).class_index == 3

    def test_inclusive_cutoff(self, registry):
        spec = registry.get("ACR>=300.0")
        assert label_value(300.0, spec).binary_positive
        assert not label_value(299.9, spec).binary_positive

    def test_strict_cutoff(self, registry):
        spec = registry.get("Hgb<11.0")
        assert not label_value(11.0, spec).binary_positive
        assert label_value(10.9, spec).binary_positive
        assert label_value(10.9, spec).class_index == 2

    def test_below_family_headline(self, registry):
        spec = registry.get("eGFR<60.0")
        label = label_value(45.0, spec)
        assert label.binary_positive
        assert label.class_index == 2

    def test_missing_value(self, registry):
        with pytest.raises(ValidationError):
            label_value(math.nan, registry.get("Hgb<11.0"))

    def test_label_series(self, registry):
        assert label_series([10.0, 12.0, 11.0], registry.get("Hgb<11.0")) == [True, False, False]


class TestTargetSpec:
    def _spec(self, **overrides):
        values = dict(
            name="X",
            analyte=Analyte.LDL,
            cutoffs=(100.0, 130.0),
            headline=130.0,
            direction=Direction.ABOVE_IS_POSITIVE,
            inclusive=(True, True),
            primary=False,
            unit="mg/dL",
        )
        values.update(overrides)
        return TargetSpec(**values)

    def test_valid(self):
        assert self._spec().headline_index == 1

    @pytest.mark.parametrize(
        "overrides",
        [
            {"cutoffs": (130.0, 100.0), "headline": 130.0},
            {"cutoffs": (), "inclusive": ()},
            {"cutoffs": (1.0, 2.0, 3.0, 4.0, 5.0), "inclusive": (True,) * 5, "headline": 1.0},
            {"headline": 160.0},
            {"inclusive": (True,)},
        ],
    )
    def test_invalid(self, overrides):
        with pytest.raises(ValidationError):
            self._spec(**overrides)


class TestOverrides:
    def test_toml_override_replaces_and_appends(self, tmp_path):
        path = tmp_path / "targets.toml"
        path.write_text(
            "[[targets]]\n"
            'name = "Hgb<11.0"\n'
            'analyte = "Hgb"\n'
            'direction = "BelowIsPositive"\n'
            "cutoffs = [10.0, 11.0]\n"
            "headline = 11.0\n"
            "inclusive = false\n"
            "primary = true\n"
            "\n"
            "[[targets]]\n"
            'analyte = "HbA1c"\n'
            'direction = "AboveIsPositive"\n'
            "cutoffs = [5.7]\n",
            encoding="utf-8",
        )
        registry = load_registry(path)
        assert registry.get("Hgb<11.0").cutoffs == (10.0, 11.0)
        assert registry.get("Hgb<11.0").primary
        added = registry.get("HbA1c>=5.7")
        assert added.unit == "%"
        assert len(registry) == len(TARGET_ROWS) + 1

    def test_json_override(self, tmp_path):
        path = tmp_path / "targets.json"
        path.write_text(
            json.dumps(
                {"targets": [{"analyte": "Hgb", "direction": "BelowIsPositive", "cutoffs": [1.0]}]}
            )
        )
        assert "Hgb<1.0" in load_registry(path)

    def test_invalid_entry(self):
        with pytest.raises(ConfigurationError):
            spec_from_dict({"analyte": "Hgb", "direction": "Sideways", "cutoffs": [1.0]})
        with pytest.raises(ConfigurationError):
            spec_from_dict({"analyte": "Hgb", "direction": "BelowIsPositive", "cutoffs": [2, 1]})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_registry(tmp_path / "missing.toml")

    def test_no_path_is_builtin(self):
        assert len(load_registry(None)) == len(TARGET_ROWS)

    def test_export_registry(self, registry, tmp_path):
        path = export_registry(registry, tmp_path / "out" / "registry.json")
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        assert len(data["targets"]) == len(TARGET_ROWS)
        assert data["targets"][1]["name"] == "ACR>=300.0"
