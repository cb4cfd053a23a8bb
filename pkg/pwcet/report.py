"""Report writers: CSV, JSON and markdown renderings of evaluation results.

All renderers return text ending in exactly one newline.  Floats are written
with 17 significant digits and ``.`` as decimal separator regardless of
locale, so output files are reproducible byte for byte.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
import pandas as pd

from . import config

if TYPE_CHECKING:
    from .harness import CurveDump, TightnessReport

FORMATS = ("csv", "json", "markdown")


# ── Files ───────────────────────────────────────────────────────────────────

def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the target directory and rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ── Cell formatting ─────────────────────────────────────────────────────────

def format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), config.FLOAT_FORMAT)
    return str(value)


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def _frame_to_csv(df: pd.DataFrame) -> str:
    text = df.apply(lambda col: col.map(format_value)).to_csv(index=False, lineterminator="\n")
    return text.rstrip("\n") + "\n"


# ── Tightness reports ───────────────────────────────────────────────────────

def report_to_csv(report: "TightnessReport") -> str:
    from .harness import ROW_COLUMNS

    return _frame_to_csv(pd.DataFrame(report.records(), columns=list(ROW_COLUMNS)))


def report_to_json(report: "TightnessReport") -> str:
    doc = {
        "metadata": report.metadata,
        "underestimates": len(report.underestimates),
        "rows": report.records(),
    }
    return json.dumps(doc, indent=2, allow_nan=False, default=_json_default) + "\n"


def to_md_table(df: pd.DataFrame, digits: int = 4) -> str:
    """Convert a DataFrame to a GitHub-flavoured markdown table."""
    data = df.copy()
    for c in data.columns:
        if pd.api.types.is_float_dtype(data[c]):
            data[c] = data[c].map(lambda x: f"{x:.{digits}g}" if pd.notna(x) else "")
    header = "| " + " | ".join(data.columns.astype(str)) + " |"
    sep = "| " + " | ".join(["---"] * len(data.columns)) + " |"
    body = [
        "| " + " | ".join(str(v) for v in row) + " |"
        for row in data.astype(str).itertuples(index=False, name=None)
    ]
    return "\n".join([header, sep] + body)


def _cell(record: dict) -> str:
    if record["error"]:
        return f"error: {record['error']}"
    est = record["estimate"]
    if not isinstance(est, float):
        return est
    t = record["tightness"]
    t_txt = f"{t:.4f}" if isinstance(t, float) else t
    flag = " **UNDER**" if record["flag"] else ""
    return f"{est:.6g} ({t_txt}){flag}"


def tightness_tables(report: "TightnessReport") -> dict[str, pd.DataFrame]:
    """One pivot per (target, seed): rows = probability, columns = method."""
    tables: dict[str, pd.DataFrame] = {}
    records = report.records()
    keys = list(dict.fromkeys((r["target"], r["seed"]) for r in records))
    for target, seed in keys:
        part = [r for r in records if r["target"] == target and r["seed"] == seed]
        methods = list(dict.fromkeys(r["method"] for r in part))
        probs = list(dict.fromkeys(r["p"] for r in part))
        truth = {r["p"]: r["true_quantile"] for r in part}
        rows = []
        for p in probs:
            tq = truth[p]
            row = {"p": f"{p:.0e}", "true quantile": f"{tq:.6g}" if isinstance(tq, float) else tq}
            for m in methods:
                match = [r for r in part if r["p"] == p and r["method"] == m]
                row[m] = _cell(match[0]) if match else ""
            rows.append(row)
        title = target if seed == "" else f"{target} (seed {seed})"
        tables[title] = pd.DataFrame(rows)
    return tables


def report_to_markdown(report: "TightnessReport", title: str = "pWCET tightness report") -> str:
    meta = report.metadata
    lines = [
        f"# {title}",
        "",
        "Cells show `estimate (tightness)`; tightness is estimate / true quantile.",
        "",
        f"- Underestimating rows: **{len(report.underestimates)}**",
        f"- Failed rows: {len(report.errors)}",
        f"- Safeguard: {meta.get('safeguard', config.SAFEGUARD_LABEL)}",
    ]
    if "rng" in meta:
        lines.append(f"- RNG: {meta['rng']}")
    lines.append("")
    for name, table in tightness_tables(report).items():
        lines += [f"## {name}", "", to_md_table(table), ""]
    lines += ["## Provenance", "", "```json",
              json.dumps(meta, indent=2, allow_nan=False, default=_json_default), "```"]
    return "\n".join(lines) + "\n"


def render_report(report: "TightnessReport", fmt: str) -> str:
    if fmt == "csv":
        return report_to_csv(report)
    if fmt == "json":
        return report_to_json(report)
    if fmt == "markdown":
        return report_to_markdown(report)
    raise ValueError(f"unknown report format {fmt!r}")


# ── Curve dumps ─────────────────────────────────────────────────────────────

def curves_to_csv(dump: "CurveDump") -> str:
    """Header ``b,empirical,memik,atan,tanh[,k=<v>...]`` for the methods present."""
    return _frame_to_csv(dump.to_frame())


def curves_to_json(dump: "CurveDump") -> str:
    doc = {"metadata": dump.metadata, "columns": {c: dump.to_frame()[c].tolist() for c in dump.columns}}
    return json.dumps(doc, indent=2, allow_nan=False, default=_json_default) + "\n"
