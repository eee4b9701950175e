# utils/validation.py
"""
Validation Utilities
Parses and validates raw text fields from cohort input files
"""

import math
from datetime import date
from typing import Iterable, Optional, Type, TypeVar

from dateutil import parser as date_parser

from utils.exceptions import ValidationError

E = TypeVar("E")

_TRUE_VALUES = {"true", "t", "yes", "y", "1"}
_FALSE_VALUES = {"false", "f", "no", "n", "0"}
_MISSING_VALUES = {"", "na", "nan", "null", "none"}


def is_missing(text) -> bool:
    """True for empty cells and the usual missing-value spellings"""
    if text is None:
        return True
    if isinstance(text, float) and math.isnan(text):
        return True
    return str(text).strip().lower() in _MISSING_VALUES


def require_text(text, field: str) -> str:
    """Return a stripped non-empty string"""
    if is_missing(text):
        raise ValidationError(f"{field} is required")
    return str(text).strip()


def parse_float(text, field: str) -> float:
    """Parse a finite real number"""
    if is_missing(text):
        raise ValidationError(f"{field} is required")
    try:
        value = float(str(text).strip())
    except ValueError:
        raise ValidationError(f"{field} is not a number: {text!r}")
    if not math.isfinite(value):
        raise ValidationError(f"{field} must be finite, got {text!r}")
    return value


def parse_optional_float(text, field: str) -> Optional[float]:
    if is_missing(text):
        return None
    return parse_float(text, field)


def parse_optional_bool(text, field: str) -> Optional[bool]:
    """Parse true/false style flags; empty means unknown"""
    if is_missing(text):
        return None
    lowered = str(text).strip().lower()
    if lowered in _TRUE_VALUES:
        return True
    if lowered in _FALSE_VALUES:
        return False
    raise ValidationError(f"{field} is not a boolean: {text!r}")


def parse_date(text, field: str) -> date:
    """Parse an ISO-8601 calendar date (a time part is dropped)"""
    if is_missing(text):
        raise ValidationError(f"{field} is required")
    try:
        return date_parser.isoparse(str(text).strip()).date()
    except (ValueError, OverflowError):
        raise ValidationError(f"{field} is not an ISO-8601 date: {text!r}")


def parse_enum(text, enum_type: Type[E], field: str) -> E:
    """Match an enum member by value, case-insensitively"""
    raw = require_text(text, field)
    for member in enum_type:
        if member.value.lower() == raw.lower():
            return member
    valid = ", ".join(member.value for member in enum_type)
    raise ValidationError(f"{field} {raw!r} is not one of: {valid}")


def require_positive(value: float, field: str) -> float:
    if not math.isfinite(value) or value <= 0:
        raise ValidationError(f"{field} must be positive, got {value}")
    return value


def require_columns(columns: Iterable[str], required: Iterable[str], source: str) -> None:
    missing = [name for name in required if name not in set(columns)]
    if missing:
        raise ValidationError(f"{source} is missing columns: {', '.join(missing)}")
