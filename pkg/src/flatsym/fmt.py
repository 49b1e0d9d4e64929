"""Fixed float formatting shared by CSV, SVG and printed summaries."""

from __future__ import annotations

import csv
import io
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DIGITS = 10


def fmt(value, digits: int = DIGITS) -> str:
    """Round-half-even to ``digits`` places after the leading digit.

    Positional for 1e-5 <= |x| < 1e16, scientific otherwise.
    """
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, str):
        return value
    x = float(value)
    if x == 0.0:
        return "0"
    if not np.isfinite(x):
        return str(x)
    if 1e-5 <= abs(x) < 1e16:
        return np.format_float_positional(x, precision=digits + 1, unique=False, fractional=False, trim="-")
    return np.format_float_scientific(x, precision=digits, unique=False, trim="-")


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(header, rows), encoding="utf-8", newline="")
    return path
