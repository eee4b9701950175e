# utils/date_utils.py

"""
Date Utilities
Day-gap arithmetic between visits and measurements.
"""

from datetime import date

DAYS_PER_YEAR = 365.25


def day_gap(first: date, second: date) -> int:
    """Absolute distance in whole calendar days"""
    return abs((first - second).days)


def within_window(first: date, second: date, window_days: int) -> bool:
    """A gap equal to the window qualifies; strictly larger gaps do not"""
    return day_gap(first, second) <= window_days


def years_between(start: date, end: date) -> float:
    return (end - start).days / DAYS_PER_YEAR
