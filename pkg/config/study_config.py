# config/study_config.py

"""
Study Configuration
Run settings loaded from a single TOML file with [study] and [synth]
sections. Command-line flags override file values.
"""

import hashlib
import json
import logging
import tomllib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from utils.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

TOOL_VERSION = "1.0.0"
OUTPUT_FORMATS = ("csv", "md")


@dataclass(frozen=True)
class StudyConfig:
    data_dir: str = "data"
    out_dir: str = "out"
    seed: int = 0
    targets: str = "primary"
    dataset_slice: Optional[str] = None
    train_split: str = "DevTrain"
    format: str = "csv"
    replicates: int = 2000
    windows: Tuple[int, ...] = (180, 90, 30)
    alpha: float = 0.05
    ppv_fraction: float = 0.05
    workers: int = 1
    baseline_c: float = 1.0
    availability_threshold: float = 0.85
    log_dir: Optional[str] = None
    registry_file: Optional[str] = None
    synth: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.format not in OUTPUT_FORMATS:
            raise ConfigurationError(
                f"format must be one of {', '.join(OUTPUT_FORMATS)}, got {self.format!r}"
            )
        if not 0 < self.alpha < 1:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 < self.ppv_fraction < 1:
            raise ConfigurationError(f"ppv_fraction must lie in (0, 1), got {self.ppv_fraction}")
        if not 0 < self.availability_threshold <= 1:
            raise ConfigurationError("availability_threshold must lie in (0, 1]")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be at least 1, got {self.workers}")
        if self.baseline_c <= 0:
            raise ConfigurationError(f"baseline_c must be positive, got {self.baseline_c}")
        object.__setattr__(self, "windows", tuple(int(w) for w in self.windows))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], synth: Optional[Mapping] = None) -> "StudyConfig":
        known = {f.name for f in fields(cls)} - {"synth"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown [study] keys: {', '.join(unknown)}")
        values = dict(data)
        if "windows" in values:
            values["windows"] = _parse_windows(values["windows"])
        try:
            return cls(**values, synth=dict(synth or {}))
        except TypeError as e:
            raise ConfigurationError(f"invalid configuration: {e}")

    @classmethod
    def load(cls, path: Union[str, Path, None]) -> "StudyConfig":
        if path is None:
            return cls()
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file not found: {path}")
        try:
            with open(path, "rb") as handle:
                document = tomllib.load(handle)
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"{path}: {e}")
        logger.debug(f"Loaded configuration from {path}")
        return cls.from_dict(document.get("study", {}), document.get("synth", {}))

    def with_overrides(self, **overrides) -> "StudyConfig":
        """Apply flag values; None means the flag was not given"""
        given = {key: value for key, value in overrides.items() if value is not None}
        if "windows" in given:
            given["windows"] = _parse_windows(given["windows"])
        return replace(self, **given)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["windows"] = list(self.windows)
        return data

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @property
    def data_path(self) -> Path:
        return Path(self.data_dir)

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir)


def _parse_windows(value) -> Tuple[int, ...]:
    if isinstance(value, str):
        parts = [part.strip() for part in value.split(",") if part.strip()]
    else:
        parts = list(value)
    try:
        return tuple(int(part) for part in parts)
    except (TypeError, ValueError):
        raise ConfigurationError(f"invalid window list {value!r}")
