# tests/conftest.py

"""
Pytest configuration and fixtures for eye-biomarker study tests
"""

import logging
import sys
from pathlib import Path

import pytest

# Add project root to Python path for imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from tests.test_helper import write_cohort_files

SYNTH_SEED = 11
SYNTH_PATIENTS = 600


@pytest.fixture
def cohort_files(tmp_path):
    """Hand-built cohort CSVs in a temporary directory"""
    return write_cohort_files(tmp_path / "data")


@pytest.fixture
def cohort(cohort_files):
    """The hand-built cohort, ingested"""
    from services.cohort_service import ingest_cohort

    return ingest_cohort(
        cohort_files["patients"],
        cohort_files["visits"],
        cohort_files["measurements"],
        score_file=cohort_files["scores"],
        annotation_file=cohort_files["annotations"],
    )


@pytest.fixture
def restore_root_logging():
    """StudyLogger replaces the root handlers; put the originals back afterwards"""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    for handler in root.handlers:
        if handler not in handlers:
            handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def registry():
    """Built-in target registry"""
    from services.target_service import TargetRegistry

    return TargetRegistry.builtin()


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """A small synthetic cohort written once per session"""
    from services.synth_service import SynthConfig, write_synth

    directory = tmp_path_factory.mktemp("synth")
    write_synth(SynthConfig(n_patients=SYNTH_PATIENTS, seed=SYNTH_SEED), directory)
    return directory


@pytest.fixture(scope="session")
def synth_cohort(synth_dir):
    from services.cohort_service import ingest_cohort
    from services.synth_service import synth_paths

    paths = synth_paths(synth_dir)
    return ingest_cohort(
        paths["patients"],
        paths["visits"],
        paths["measurements"],
        score_file=paths["scores"],
        annotation_file=paths["annotations"],
    )


@pytest.fixture(scope="session")
def study_service(synth_cohort):
    """Evaluation service over the synthetic cohort; baselines are cached across tests"""
    from services.evaluation_service import EvaluationService

    return EvaluationService(synth_cohort, seed=SYNTH_SEED)
