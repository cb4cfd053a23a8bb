"""Execution-time trace files.

Plain text traces hold one non-negative decimal per line.  Lines starting
with ``#`` are comments; a ``# unit: s|ms|us|ns`` comment declares the unit
(seconds by default) and values are converted to seconds on load.  Files
ending in ``.parquet`` are read through pandas, one numeric column.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from . import config
from .errors import EmptyInput, NegativeValue, NonFinite, TraceFormatError
from .report import atomic_write_text

logger = logging.getLogger(__name__)

_UNIT_RE = re.compile(r"^#\s*unit\s*:\s*(\S+)\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class Trace:
    """Observations in file order, already in seconds."""

    values: np.ndarray
    unit: str
    source: str

    @property
    def n(self) -> int:
        return int(self.values.size)

    def head(self, n: Optional[int]) -> np.ndarray:
        return self.values if n is None else self.values[:n]


def parse_trace(lines: Iterable[str], source: str = "<trace>") -> Trace:
    unit: Optional[str] = None
    out: list[float] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _UNIT_RE.match(line)
            if m:
                declared = m.group(1).lower()
                if declared not in config.UNIT_FACTORS:
                    raise TraceFormatError(
                        f"unknown unit {declared!r} (expected one of {', '.join(config.UNIT_FACTORS)})", lineno)
                if unit is not None and unit != declared:
                    raise TraceFormatError(f"unit redeclared as {declared!r} after {unit!r}", lineno)
                if out:
                    raise TraceFormatError("unit header must precede the first value", lineno)
                unit = declared
            continue
        try:
            v = float(line)
        except ValueError:
            raise TraceFormatError(f"not a number: {line!r}", lineno) from None
        if not math.isfinite(v):
            raise NonFinite(f"line {lineno}: execution time is not finite ({line!r})")
        if v < 0.0:
            raise NegativeValue(f"line {lineno}: negative execution time ({line!r})")
        out.append(v)

    if not out:
        raise EmptyInput(f"{source}: empty trace")
    unit = unit or config.DEFAULT_UNIT
    values = np.asarray(out, dtype=np.float64)
    if config.UNIT_FACTORS[unit] != 1.0:
        values = values * config.UNIT_FACTORS[unit]
    return Trace(values, unit, source)


def _read_parquet(path: Path, column: Optional[str]) -> Trace:
    try:
        df = pd.read_parquet(path)
    except FileNotFoundError:
        raise
    except (ValueError, OSError) as exc:
        raise TraceFormatError(f"{path}: not a readable parquet file ({exc})") from exc
    if column is None:
        numeric = [c for c in df.columns if pd.api.types.is_numeric_dtype(df[c])]
        if not numeric:
            raise TraceFormatError(f"{path}: no numeric column")
        column = numeric[0]
    elif column not in df.columns:
        raise TraceFormatError(f"{path}: no column {column!r} (have {', '.join(map(str, df.columns))})")
    values = pd.to_numeric(df[column], errors="coerce").to_numpy(dtype=np.float64)
    if values.size == 0:
        raise EmptyInput(f"{path}: empty trace")
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NonFinite(f"{path}: row {bad[0]} of column {column!r} is missing or not finite")
    neg = np.flatnonzero(values < 0.0)
    if neg.size:
        raise NegativeValue(f"{path}: row {neg[0]} of column {column!r} is negative")
    return Trace(values, config.DEFAULT_UNIT, f"{path}:{column}")


def load_trace(path, column: Optional[str] = None) -> Trace:
    """Read a trace file; ``column`` applies to parquet input only."""
    path = Path(path)
    if path.suffix.lower() == ".parquet":
        trace = _read_parquet(path, column)
    else:
        try:
            with path.open("r", encoding="utf-8") as fh:
                trace = parse_trace(fh, str(path))
        except UnicodeDecodeError:
            raise TraceFormatError(f"{path}: not UTF-8 text") from None
    logger.info("loaded %d observations from %s (unit %s)", trace.n, trace.source, trace.unit)
    return trace


def format_samples(values: Iterable[float]) -> str:
    """One value per line at 17 significant digits, so parsing restores every double."""
    return "".join(f"{float(v):{config.FLOAT_FORMAT}}\n" for v in values)


def write_samples(path, values: Iterable[float]) -> None:
    atomic_write_text(path, format_samples(values))
