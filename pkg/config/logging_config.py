# config/logging_config.py

"""
Logging Configuration
Sets up logging for the eye-biomarker-study command line and library.

The log level is read from the EYE_STUDY_LOG_LEVEL environment variable
(default INFO). Console output goes to stderr so that stdout stays free
for piped data.
"""

import logging
import logging.handlers
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional, Union

LOG_LEVEL_ENV = "EYE_STUDY_LOG_LEVEL"
LOGGER_NAME = "eye_study"
ROTATE_BYTES = 5 * 1024 * 1024
ROTATE_COUNT = 5


def level_from_env(default: str = "INFO") -> int:
    name = os.environ.get(LOG_LEVEL_ENV, default).strip().upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.INFO


class StudyLogger:
    def __init__(self, log_dir: Optional[Union[str, Path]] = None):
        self.level = level_from_env()
        self.log_dir = Path(log_dir) if log_dir else None
        if self.log_dir is not None:
            self.log_dir.mkdir(parents=True, exist_ok=True)
        self._setup_logging()
        self.logger = logging.getLogger(LOGGER_NAME)

    def _file_handler(self, name: str, level: int, formatter: logging.Formatter):
        handler = logging.FileHandler(self.log_dir / name, encoding="utf-8")
        handler.setLevel(level)
        handler.setFormatter(formatter)
        return handler

    def _setup_logging(self):
        detailed = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - "
            "%(filename)s:%(lineno)d - %(funcName)s - %(message)s"
        )
        simple = logging.Formatter("%(asctime)s - %(levelname)s - %(message)s")
        handlers = [logging.StreamHandler(sys.stderr)]
        handlers[0].setLevel(self.level)
        handlers[0].setFormatter(simple)

        if self.log_dir is not None:
            monthly = f"{LOGGER_NAME}_{datetime.now().strftime('%Y%m')}.log"
            handlers.append(self._file_handler(monthly, logging.DEBUG, detailed))
            handlers.append(self._file_handler("errors.log", logging.ERROR, detailed))
            rotating = logging.handlers.RotatingFileHandler(
                self.log_dir / "rotating.log",
                maxBytes=ROTATE_BYTES,
                backupCount=ROTATE_COUNT,
                encoding="utf-8",
            )
            rotating.setLevel(self.level)
            rotating.setFormatter(simple)
            handlers.append(rotating)

        root_logger = logging.getLogger()
        root_logger.handlers.clear()
        for handler in handlers:
            root_logger.addHandler(handler)
        root_logger.setLevel(logging.DEBUG if self.log_dir is not None else self.level)

    def log_run_start(self, command: str, version: str = "1.0.0"):
        self.logger.info("=" * 60)
        self.logger.info(f"eye-study {command} started")
        self.logger.info(f"Version: {version}")
        if self.log_dir is not None:
            self.logger.info(f"Log Directory: {self.log_dir}")
        self.logger.debug(f"Python Version: {sys.version}")
        self.logger.info("=" * 60)

    def log_run_stop(self, command: str, exit_code: int = 0):
        self.logger.info(f"eye-study {command} finished with exit code {exit_code}")

    def log_skip(self, target: str, reason: str):
        self.logger.warning(f"Skipped {target}: {reason}")

    def log_error(self, error, context=""):
        self.logger.error(f"{context}: {str(error)}", exc_info=self.level <= logging.DEBUG)

    def get_log_stats(self):
        stats = {
            "log_directory": str(self.log_dir) if self.log_dir else None,
            "log_files": [],
            "total_size_bytes": 0,
        }
        if self.log_dir is not None and self.log_dir.exists():
            for log_file in sorted(self.log_dir.glob("*.log")):
                file_stat = log_file.stat()
                stats["log_files"].append(
                    {
                        "name": log_file.name,
                        "size_bytes": file_stat.st_size,
                        "modified": datetime.fromtimestamp(file_stat.st_mtime).isoformat(),
                    }
                )
                stats["total_size_bytes"] += file_stat.st_size
        return stats
