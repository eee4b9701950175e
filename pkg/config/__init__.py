# config/__init__.py
"""
Configuration package for the eye-biomarker study
"""
from .logging_config import StudyLogger
from .study_config import TOOL_VERSION, StudyConfig
