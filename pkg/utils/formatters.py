# utils/formatters.py

"""
Formatters Utility
Formats study statistics the way the result tables print them.
"""

import math
from typing import Optional, Sequence


def format_percent(value: Optional[float], digits: int = 1) -> str:
    """0.668 -> '66.8'"""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return f"{100 * value:.{digits}f}"


def format_ci(value, low, high) -> str:
    """AUC-style cell: '66.8 (63.0-70.6)'"""
    return f"{format_percent(value)} ({format_percent(low)}-{format_percent(high)})"


def format_ppv_ci(value, low, high) -> str:
    return f"{format_percent(value)} ({format_percent(low)}, {format_percent(high)})"


def format_count(n: int, n_pos: int) -> str:
    """'2186 / 202 (9.2%)'"""
    prevalence = n_pos / n if n else 0.0
    return f"{n} / {n_pos} ({100 * prevalence:.1f}%)"


def format_p(p: Optional[float], flag_above: Optional[float] = None) -> str:
    if p is None or (isinstance(p, float) and math.isnan(p)):
        return "-"
    text = f"{p:.4f}"
    if flag_above is not None and p > flag_above:
        text += "**"
    return text


def format_odds_ratio(odds_ratio: float, low: float, high: float) -> str:
    return f"{odds_ratio:.3f} ({low:.3f}-{high:.3f})"


def format_markdown_table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Pipe table with a header separator row"""
    lines = [
        "| " + " | ".join(str(h) for h in headers) + " |",
        "| " + " | ".join("---" for _ in headers) + " |",
    ]
    for row in rows:
        cells = ["" if cell is None else str(cell).replace("|", "\\|") for cell in row]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
