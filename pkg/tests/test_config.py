# tests/test_config.py

"""
Tests for the study configuration and logging setup
"""

import logging

import numpy as np
import pytest

from config.logging_config import LOG_LEVEL_ENV, StudyLogger, level_from_env
from config.study_config import StudyConfig
from services.roc_service import Samples, ppv_at_top_fraction
from utils.exceptions import ConfigurationError

CONFIG_TOML = """
[study]
seed = 7
targets = "ACR>=300.0"
windows = "90,30"
format = "md"
replicates = 500

[synth]
n_patients = 50
"""


class TestStudyConfig:
    def test_defaults(self):
        config = StudyConfig.load(None)
        assert config.seed == 0
        assert config.windows == (180, 90, 30)
        assert config.format == "csv"
        assert config.train_split == "DevTrain"

    def test_load_toml(self, tmp_path):
        path = tmp_path / "study.toml"
        path.write_text(CONFIG_TOML, encoding="utf-8")
        config = StudyConfig.load(path)
        assert config.seed == 7
        assert config.windows == (90, 30)
        assert config.format == "md"
        assert config.replicates == 500
        assert config.synth == {"n_patients": 50}

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError, match="unknown \\[study\\] keys: sead"):
            StudyConfig.from_dict({"sead": 3})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            StudyConfig.load(tmp_path / "absent.toml")

    def test_malformed_toml(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("[study\nseed = 1\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            StudyConfig.load(path)

    @pytest.mark.parametrize(
        "values",
        [
            {"format": "pdf"},
            {"alpha": 0.0},
            {"ppv_fraction": 1.5},
            {"ppv_fraction": 1.0},
            {"ppv_fraction": 0.0},
            {"workers": 0},
            {"baseline_c": -1.0},
            {"windows": "90,soon"},
        ],
    )
    def test_invalid_values(self, values):
        with pytest.raises(ConfigurationError):
            StudyConfig.from_dict(values)

    @pytest.mark.parametrize("fraction", [0.05, 0.5, 0.99])
    def test_accepted_ppv_fraction_ranks_units(self, fraction):
        config = StudyConfig.from_dict({"ppv_fraction": fraction})
        units = [f"U{i}" for i in range(40)]
        samples = Samples.from_arrays(units, np.linspace(0, 1, 40), [True] * 40)
        assert ppv_at_top_fraction(samples, config.ppv_fraction).ppv == 1.0

    def test_flags_override_file_values(self):
        config = StudyConfig.from_dict({"seed": 7, "out_dir": "results"})
        overridden = config.with_overrides(seed=None, out_dir="elsewhere", windows="60")
        assert overridden.seed == 7
        assert overridden.out_dir == "elsewhere"
        assert overridden.windows == (60,)

    def test_config_hash(self):
        assert StudyConfig(seed=1).config_hash() == StudyConfig(seed=1).config_hash()
        assert StudyConfig(seed=1).config_hash() != StudyConfig(seed=2).config_hash()
        assert len(StudyConfig().config_hash()) == 64


@pytest.mark.usefixtures("restore_root_logging")
class TestStudyLogger:
    def test_level_from_env(self, monkeypatch):
        monkeypatch.setenv(LOG_LEVEL_ENV, "warning")
        assert level_from_env() == logging.WARNING
        monkeypatch.setenv(LOG_LEVEL_ENV, "chatty")
        assert level_from_env() == logging.INFO
        monkeypatch.delenv(LOG_LEVEL_ENV)
        assert level_from_env() == logging.INFO

    def test_log_files(self, tmp_path):
        study_logger = StudyLogger(tmp_path / "logs")
        study_logger.log_run_start("evaluate")
        study_logger.log_skip("Hgb<1.0", "insufficient cases")
        study_logger.log_run_stop("evaluate", 3)
        for handler in logging.getLogger().handlers:
            handler.flush()

        stats = study_logger.get_log_stats()
        names = [entry["name"] for entry in stats["log_files"]]
        assert "errors.log" in names and "rotating.log" in names
        [monthly] = [name for name in names if name.startswith("eye_study_")]
        text = (tmp_path / "logs" / monthly).read_text(encoding="utf-8")
        assert "Skipped Hgb<1.0: insufficient cases" in text
        assert "finished with exit code 3" in text

    def test_console_only(self):
        study_logger = StudyLogger()
        assert study_logger.get_log_stats()["log_files"] == []
        assert len(logging.getLogger().handlers) == 1
