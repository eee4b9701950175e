# services/target_service.py

"""
Target Service
Built-in registry of thresholded lab/vital targets, label derivation and
registry overrides from TOML/JSON files.
"""

import json
import logging
import math
import tomllib
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Sequence, Tuple, Union

from models.patient_model import CANONICAL_UNITS, Analyte
from models.target_model import ClassLabel, Direction, TargetSpec
from utils.exceptions import ConfigurationError, ValidationError
from utils.validation import parse_enum

logger = logging.getLogger(__name__)

ABOVE = Direction.ABOVE_IS_POSITIVE
BELOW = Direction.BELOW_IS_POSITIVE

# (analyte, direction, cutoffs, inclusive). Each row is one multiclass family;
# every cutoff of a family becomes its own binary target.
_FAMILIES: Tuple[Tuple[Analyte, Direction, Tuple[float, ...], bool], ...] = (
    (Analyte.ACR, ABOVE, (30.0, 300.0, 1500.0), True),
    (Analyte.ALBUMIN, BELOW, (3.5,), False),
    (Analyte.ALT, ABOVE, (29.0,), False),
    (Analyte.AST, ABOVE, (36.0,), False),
    (Analyte.BMI, ABOVE, (25.0, 30.0, 35.0, 40.0), True),
    (Analyte.BUN, ABOVE, (20.0,), False),
    (Analyte.CALCIUM, BELOW, (8.6,), False),
    (Analyte.CREATININE, ABOVE, (1.2,), False),
    (Analyte.DIASTOLIC_BP, ABOVE, (80.0, 90.0), True),
    (Analyte.EGFR, BELOW, (15.0, 30.0, 60.0, 90.0), False),
    (Analyte.HBA1C, ABOVE, (6.5, 7.0, 8.0, 9.0), True),
    (Analyte.HCT, BELOW, (39.0,), False),
    (Analyte.HDL, ABOVE, (45.0, 60.0), True),
    (Analyte.HGB, BELOW, (11.0, 12.5), False),
    (Analyte.INR, BELOW, (1.1,), False),
    (Analyte.LDL, ABOVE, (100.0, 130.0, 160.0, 190.0), True),
    (Analyte.MEAN_ARTERIAL_PRESSURE, ABOVE, (80.0, 90.0, 110.0), True),
    (Analyte.NON_HDL, ABOVE, (130.0, 160.0), True),
    (Analyte.PLATELET, BELOW, (100.0, 150.0), False),
    (Analyte.POTASSIUM, BELOW, (3.5,), False),
    (Analyte.POTASSIUM, ABOVE, (5.0,), False),
    (Analyte.PULSE_PRESSURE, ABOVE, (40.0, 55.0, 65.0), True),
    (Analyte.RDW, ABOVE, (14.5,), False),
    (Analyte.SODIUM, BELOW, (136.0,), False),
    (Analyte.SYSTOLIC_BP, ABOVE, (120.0, 140.0), True),
    (Analyte.TOTAL_BILIRUBIN, ABOVE, (1.0,), False),
    (Analyte.TOTAL_CHOLESTEROL, ABOVE, (200.0, 240.0), True),
    (Analyte.TRIGLYCERIDES, ABOVE, (150.0, 200.0, 500.0), True),
    (Analyte.TSH, BELOW, (0.5,), False),
    (Analyte.TSH, ABOVE, (4.0,), False),
    (Analyte.WBC, BELOW, (4.0,), False),
    (Analyte.WBC, ABOVE, (11.0,), False),
)

PRIMARY_TARGETS: Tuple[str, ...] = (
    "Albumin<3.5",
    "AST>36.0",
    "Calcium<8.6",
    "eGFR<60.0",
    "Hgb<11.0",
    "Platelet<150.0",
    "TSH>4.0",
    "ACR>=300.0",
    "WBC<4.0",
)


def target_name(analyte: Analyte, direction: Direction, cutoff: float, inclusive: bool) -> str:
    """Canonical target name, e.g. 'ACR>=300.0' or 'Hgb<11.0'"""
    if direction is ABOVE:
        operator = ">=" if inclusive else ">"
    else:
        operator = "<=" if inclusive else "<"
    return f"{analyte.value}{operator}{cutoff:.1f}"


def builtin_registry() -> List[TargetSpec]:
    """Every target row of the study, one spec per cutoff"""
    specs = []
    for analyte, direction, cutoffs, inclusive in _FAMILIES:
        flags = tuple(inclusive for _ in cutoffs)
        for cutoff in cutoffs:
            name = target_name(analyte, direction, cutoff, inclusive)
            specs.append(
                TargetSpec(
                    name=name,
                    analyte=analyte,
                    cutoffs=cutoffs,
                    headline=cutoff,
                    direction=direction,
                    inclusive=flags,
                    primary=name in PRIMARY_TARGETS,
                    unit=CANONICAL_UNITS[analyte],
                )
            )
    return specs


def _beyond(value: float, cutoff: float, direction: Direction, inclusive: bool) -> bool:
    if direction is ABOVE:
        return value >= cutoff if inclusive else value > cutoff
    return value <= cutoff if inclusive else value < cutoff


def label_value(value: float, spec: TargetSpec) -> ClassLabel:
    """
    Class index = number of cutoffs the value passes in the positive
    direction; the binary label comes from the headline cutoff.
    """
    if value is None or math.isnan(value):
        raise ValidationError(f"cannot label a missing value for {spec.name}")
    passed = [
        _beyond(value, cutoff, spec.direction, inclusive)
        for cutoff, inclusive in zip(spec.cutoffs, spec.inclusive)
    ]
    return ClassLabel(class_index=sum(passed), binary_positive=passed[spec.headline_index])


def label_series(values: Iterable[float], spec: TargetSpec) -> List[bool]:
    return [label_value(value, spec).binary_positive for value in values]


class TargetRegistry:
    """Immutable, name-indexed collection of target specs"""

    def __init__(self, specs: Sequence[TargetSpec]):
        by_name: Dict[str, TargetSpec] = {}
        for spec in specs:
            if spec.name in by_name:
                raise ConfigurationError(f"duplicate target name {spec.name}")
            by_name[spec.name] = spec
        self._specs = tuple(specs)
        self._by_name = by_name

    @classmethod
    def builtin(cls) -> "TargetRegistry":
        return cls(builtin_registry())

    def __iter__(self) -> Iterator[TargetSpec]:
        return iter(self._specs)

    def __len__(self) -> int:
        return len(self._specs)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def get(self, name: str) -> TargetSpec:
        try:
            return self._by_name[name]
        except KeyError:
            raise ConfigurationError(f"unknown target {name!r}")

    def primary(self) -> List[TargetSpec]:
        return [spec for spec in self._specs if spec.primary]

    @property
    def n_primary(self) -> int:
        return len(self.primary())

    def select(self, selection: str) -> List[TargetSpec]:
        """'primary', 'all' or a comma-separated list of target names"""
        selection = (selection or "primary").strip()
        if selection == "primary":
            return self.primary()
        if selection == "all":
            return list(self._specs)
        return [self.get(name.strip()) for name in selection.split(",") if name.strip()]

    def with_overrides(self, specs: Sequence[TargetSpec]) -> "TargetRegistry":
        """New registry where same-named specs are replaced and new ones appended"""
        replacements = {spec.name: spec for spec in specs}
        merged = [replacements.pop(spec.name, spec) for spec in self._specs]
        # Names not in the builtin table are appended in file order
        merged.extend(spec for spec in specs if spec.name in replacements)
        return TargetRegistry(merged)

    def to_dict(self):
        return {"targets": [spec.to_dict() for spec in self._specs]}


def spec_from_dict(data: Dict) -> TargetSpec:
    """Build a TargetSpec from an override entry"""
    try:
        analyte = parse_enum(data["analyte"], Analyte, "analyte")
        direction = parse_enum(data["direction"], Direction, "direction")
        cutoffs = tuple(float(c) for c in data["cutoffs"])
        # Above-is-positive cutoffs are inclusive unless stated
        inclusive = data.get("inclusive", [direction is ABOVE] * len(cutoffs))
        if isinstance(inclusive, bool):
            inclusive = [inclusive] * len(cutoffs)
        # Headline defaults to the first cutoff
        headline = float(data.get("headline", cutoffs[0]))
        name = data.get("name") or target_name(
            analyte, direction, headline, inclusive[cutoffs.index(headline)]
        )
        return TargetSpec(
            name=name,
            analyte=analyte,
            cutoffs=cutoffs,
            headline=headline,
            direction=direction,
            inclusive=tuple(bool(flag) for flag in inclusive),
            primary=bool(data.get("primary", False)),
            unit=data.get("unit", CANONICAL_UNITS[analyte]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigurationError(f"invalid target entry {data!r}: {e}")
    except ValidationError as e:
        raise ConfigurationError(f"invalid target entry: {e.message}")


def load_registry(path: Union[str, Path, None] = None) -> TargetRegistry:
    """Built-in registry, optionally overridden by a TOML or JSON file"""
    registry = TargetRegistry.builtin()
    if path is None:
        return registry
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"target override file not found: {path}")
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(path.read_text(encoding="utf-8"))
        else:
            with open(path, "rb") as handle:
                data = tomllib.load(handle)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigurationError(f"cannot parse {path}: {e}")
    overrides = [spec_from_dict(entry) for entry in data.get("targets", [])]
    logger.info(f"Applied {len(overrides)} target overrides from {path}")
    return registry.with_overrides(overrides)


def export_registry(registry: TargetRegistry, path: Union[str, Path]) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(registry.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return str(path)
