"""Full evaluation study over the builtin distributions.

Runs the whole pipeline:
  1. Synthetic tightness: every builtin distribution x method x probability
     (1e-7 .. 1e-15) x seed, all methods on the same sample per seed.
  2. Holdout study: estimate from 1e4 draws at p = 1e-5 and validate against
     the empirical quantile of an independent 1e6-draw trace.
  3. Curve data for every builtin distribution.
  4. Check the qualitative claims (no underestimation, heavy-tail margin,
     near-parity on WeibullB, ATAN never materially worse than MEMIK,
     holdout ordering) and write everything to ``results/``.

Usage:
    python -m pwcet.run_study [--full-scale] [--output-dir DIR]
"""

from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from . import config
from .bounds import Method
from .cli import configure_logging
from .harness import EvaluationPlan, TightnessReport, dump_curves, run_holdout_study, run_synthetic
from .report import atomic_write_text, curves_to_csv, report_to_csv, report_to_json, tightness_tables, to_md_table
from .synthetic import builtin_specs, sample

logger = logging.getLogger(__name__)

HEAVY_TAIL_TARGET = "WeibullA"
HEAVY_TAIL_P = 1e-15
HEAVY_TAIL_MARGIN = 0.05
PARITY_TARGET = "WeibullB"
PARITY_BAND = (0.90, 1.02)
ATAN_SLACK = 1.05
HOLDOUT_MIN_TIGHTER = 9


# ── Claims ──────────────────────────────────────────────────────────────────

def _estimates(report: TightnessReport) -> pd.DataFrame:
    """Wide frame indexed by (target, seed, p) with one estimate column per method."""
    df = report.to_frame()
    return df.pivot_table(index=["target", "seed", "p"], columns="method",
                          values="estimate", aggfunc="first", dropna=False)


def _claim(name: str, measured: str, threshold: str, ok: bool) -> dict:
    return {"claim": name, "measured": measured, "threshold": threshold, "status": "PASS" if ok else "FAIL"}


def check_claims(synthetic: TightnessReport, holdout: Optional[TightnessReport] = None) -> pd.DataFrame:
    rows = []
    under = len(synthetic.underestimates)
    rows.append(_claim("no underestimation (synthetic)", str(under), "0", under == 0))

    wide = _estimates(synthetic)
    have_both = {Method.MEMIK.value, Method.ATAN.value} <= set(wide.columns)
    if have_both:
        memik, atan = wide[Method.MEMIK.value], wide[Method.ATAN.value]
        ratio = atan / memik

        targets = ratio.index.get_level_values("target")
        probs = ratio.index.get_level_values("p")
        heavy = ratio[(targets == HEAVY_TAIL_TARGET) & np.isclose(probs, HEAVY_TAIL_P, rtol=1e-12, atol=0.0)]
        if len(heavy):
            margin = float(np.mean(1.0 - heavy.to_numpy()))
            rows.append(_claim(f"ATAN below MEMIK on {HEAVY_TAIL_TARGET} at p={HEAVY_TAIL_P:g}",
                               f"{margin:.2%} mean relative margin", f">= {HEAVY_TAIL_MARGIN:.0%}",
                               margin >= HEAVY_TAIL_MARGIN))

        parity = ratio[targets == PARITY_TARGET]
        if len(parity):
            lo, hi = PARITY_BAND
            ok = bool(parity.notna().all() and parity.between(lo, hi).all())
            rows.append(_claim(f"ATAN/MEMIK near parity on {PARITY_TARGET}",
                               f"[{parity.min():.4f}, {parity.max():.4f}]", f"within [{lo}, {hi}]", ok))

        worst = float(ratio.max()) if ratio.notna().any() else float("nan")
        missing = int(ratio.isna().sum())
        rows.append(_claim("ATAN never materially worse than MEMIK",
                           f"max ratio {worst:.4f}, {missing} incomparable rows",
                           f"<= {ATAN_SLACK}", missing == 0 and worst <= ATAN_SLACK))

    if holdout is not None:
        hf = holdout.to_frame()
        finite = hf["tightness"].dropna()
        rows.append(_claim("no underestimation (holdout)", str(int((finite < 1.0).sum())), "0",
                           bool((finite >= 1.0).all())))
        tight = hf.pivot_table(index="target", columns="method", values="tightness", aggfunc="mean")
        if {Method.MEMIK.value, Method.ATAN.value} <= set(tight.columns):
            wins = int((tight[Method.ATAN.value] <= tight[Method.MEMIK.value]).sum())
            need = min(HOLDOUT_MIN_TIGHTER, len(tight))
            rows.append(_claim("holdout: ATAN tighter than or equal to MEMIK",
                               f"{wins} of {len(tight)} targets", f">= {need}", wins >= need))
    return pd.DataFrame(rows, columns=["claim", "measured", "threshold", "status"])


# ── Report ──────────────────────────────────────────────────────────────────

def build_study_report(*, n: int, seeds: Sequence[int], claims: pd.DataFrame,
                       synthetic: TightnessReport, holdout: Optional[TightnessReport]) -> str:
    """Assemble the markdown study report from pre-computed results."""
    passed = int((claims["status"] == "PASS").sum())
    md = [
        "# Chebyshev-envelope pWCET study",
        "",
        f"- Sample size per run: **{n}**, seeds: {', '.join(map(str, seeds))}",
        f"- Parameter grid: k in [{config.K_MIN:g}, {config.K_MAX:g}] ({config.K_COUNT} points), "
        f"d in [median/{config.D_LOW_DIVISOR:g}, {config.D_HIGH_FACTOR:g} x max] ({config.D_COUNT} points)",
        f"- Safeguard: {config.SAFEGUARD_LABEL}, gamma = {config.GAMMA}, top {config.TAIL_FRACTION:.1%} of samples",
        f"- RNG: {config.RNG_ALGORITHM}",
        "- True quantiles come from the untruncated distributions; Gaussian samples are truncated at 0.",
        "",
        "## Claims",
        "",
        f"{passed} of {len(claims)} checks pass.",
        "",
        to_md_table(claims),
        "",
        "## Synthetic tightness",
        "",
        "Cells show `estimate (tightness)`.",
        "",
    ]
    for name, table in tightness_tables(synthetic).items():
        md += [f"### {name}", "", to_md_table(table), ""]
    if holdout is not None:
        md += ["## Holdout study", "",
               f"Estimation n = {config.TRACE_ESTIMATION_N}, holdout n = {config.HOLDOUT_N}, "
               f"p = {config.TRACE_PROBABILITY:g}.", ""]
        frame = holdout.to_frame()[["target", "method", "estimate", "true_quantile", "tightness"]]
        md += [to_md_table(frame.rename(columns={"true_quantile": "holdout quantile"}), digits=6), ""]
    return "\n".join(md).rstrip("\n") + "\n"


# ── Pipeline ────────────────────────────────────────────────────────────────

def run(output_dir: Path, *, full_scale: bool = False, seeds: Sequence[int] = config.DEFAULT_SEEDS,
        n: Optional[int] = None, holdout: bool = True, workers: Optional[int] = None) -> pd.DataFrame:
    n = n or (config.FULL_SCALE_N if full_scale else config.DESK_N)
    specs = builtin_specs()
    output_dir.mkdir(parents=True, exist_ok=True)

    # ── 1) Synthetic tightness ──────────────────────────────────────────
    logger.info("synthetic evaluation: %d distributions, n=%d, seeds=%s", len(specs), n, list(seeds))
    plan = EvaluationPlan(targets=tuple(specs), n=n, seeds=tuple(seeds), workers=workers)
    synthetic = run_synthetic(plan)
    atomic_write_text(output_dir / "synthetic_tightness.csv", report_to_csv(synthetic))
    atomic_write_text(output_dir / "synthetic_tightness.json", report_to_json(synthetic))

    # ── 2) Holdout study ────────────────────────────────────────────────
    held = None
    if holdout:
        logger.info("holdout study: estimation n=%d, holdout n=%d", config.TRACE_ESTIMATION_N, config.HOLDOUT_N)
        held = run_holdout_study(specs, seeds=(seeds[0],), workers=workers)
        atomic_write_text(output_dir / "holdout_tightness.csv", report_to_csv(held))
        atomic_write_text(output_dir / "holdout_tightness.json", report_to_json(held))

    # ── 3) Curve data ───────────────────────────────────────────────────
    curve_dir = output_dir / "curves"
    for spec in specs:
        dump = dump_curves(sample(spec, n, seeds[0]), tuple(Method), per_k=(1, 2, 4, 8),
                           workers=workers)
        atomic_write_text(curve_dir / f"{spec.label}.csv", curves_to_csv(dump))

    # ── 4) Claims and report ────────────────────────────────────────────
    claims = check_claims(synthetic, held)
    atomic_write_text(output_dir / "claims.csv", claims.to_csv(index=False, lineterminator="\n"))
    report = build_study_report(n=n, seeds=seeds, claims=claims, synthetic=synthetic, holdout=held)
    atomic_write_text(output_dir / "REPORT.md", report)
    logger.info("study complete; report at %s", output_dir / "REPORT.md")
    return claims


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="pwcet.run_study", description=__doc__.splitlines()[0])
    parser.add_argument("--full-scale", action="store_true", help=f"n = {config.FULL_SCALE_N}")
    parser.add_argument("--output-dir", type=Path, default=config.RESULTS_DIR)
    parser.add_argument("--seed", nargs="+", type=int, default=list(config.DEFAULT_SEEDS))
    parser.add_argument("--skip-holdout", action="store_true")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("-v", "--verbose", action="store_true")
    ns = parser.parse_args(argv)
    configure_logging(ns.verbose)
    claims = run(ns.output_dir, full_scale=ns.full_scale, seeds=ns.seed,
                 holdout=not ns.skip_holdout, workers=ns.workers)
    failed = claims[claims["status"] != "PASS"]
    for _, row in failed.iterrows():
        logger.warning("claim failed: %s (%s)", row["claim"], row["measured"])
    return config.EXIT_OK if failed.empty else 1


if __name__ == "__main__":
    raise SystemExit(main())
