"""Command-line front end: ``python -m pwcet {analyze,synth,eval,curves}``.

Reports go to ``--output`` (written atomically) or stdout; diagnostics go
to stderr.  Exit codes: 0 success, 2 input or validation error, 3
computation error.
"""

from __future__ import annotations

import argparse
import functools
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import config
from .bounds import GridSettings, Method
from .empirical import load_samples
from .errors import BracketFailure, ComputationError, EmptyAdmissibleSet, InputError
from .harness import EvaluationPlan, TightnessReport, dump_curves, run_synthetic, run_trace
from .report import FORMATS, atomic_write_text, curves_to_csv, curves_to_json, render_report
from .synthetic import BUILTIN_NAMES, draw, spec_by_name
from .trace_io import format_samples, load_trace, write_samples

logger = logging.getLogger(__name__)

COMMANDS = ("analyze", "synth", "eval", "curves")
_COMPUTATION_TAGS = {c.tag for c in (ComputationError, EmptyAdmissibleSet, BracketFailure)}


# ── Run configuration ───────────────────────────────────────────────────────

@dataclass(frozen=True)
class RunConfig:
    command: str
    input: Optional[Path] = None
    holdout_input: Optional[Path] = None
    holdout_quantile: Optional[float] = None
    column: Optional[str] = None
    specs: tuple[str, ...] = ()
    methods: tuple[Method, ...] = tuple(Method)
    probabilities: tuple[float, ...] = ()
    n: Optional[int] = None
    seeds: tuple[int, ...] = config.DEFAULT_SEEDS
    grid: GridSettings = field(default_factory=GridSettings)
    gamma: float = config.GAMMA
    output: Optional[Path] = None
    fmt: str = "csv"
    per_k: tuple[float, ...] = ()
    full_scale: bool = False
    fallback: bool = True
    workers: Optional[int] = None

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        if self.fmt not in FORMATS:
            raise InputError(f"unknown format {self.fmt!r}")
        if self.command == "analyze" and self.input is None:
            raise InputError("analyze needs --input")
        if self.command == "synth" and len(self.specs) != 1:
            raise InputError("synth needs exactly one --spec")
        if self.command == "curves" and (self.input is None) == (not self.specs):
            raise InputError("curves needs either --input or a single --spec")
        if self.command == "curves" and len(self.specs) > 1:
            raise InputError("curves takes a single --spec")
        if self.command == "curves" and self.fmt == "markdown":
            raise InputError("curves writes csv or json")
        if self.per_k and self.command != "curves":
            raise InputError("--per-k applies to curves only")
        if any(not (k > 0) for k in self.per_k):
            raise InputError("--per-k values must be positive")
        if self.holdout_input is not None and self.holdout_quantile is not None:
            raise InputError("give --holdout-input or --holdout-quantile, not both")
        if self.full_scale and self.n is not None:
            raise InputError("--full-scale and --n are mutually exclusive")
        if self.n is not None and self.n < 1:
            raise InputError(f"--n must be a positive integer, got {self.n}")
        if not self.seeds or any(s < 0 for s in self.seeds):
            raise InputError("--seed values must be non-negative integers")
        if not (0.0 < self.gamma <= 1.0):
            raise InputError(f"--gamma must lie in (0, 1], got {self.gamma:g}")
        if self.workers is not None and self.workers < 1:
            raise InputError("--workers must be at least 1")

    @property
    def sample_size(self) -> Optional[int]:
        """Requested n, or the command's default (None for traces: use everything)."""
        if self.n is not None:
            return self.n
        if self.full_scale:
            return config.FULL_SCALE_N
        if self.command == "analyze" or (self.command == "curves" and self.input is not None):
            return None
        return config.DESK_N

    @property
    def probability_list(self) -> tuple[float, ...]:
        if self.probabilities:
            return self.probabilities
        if self.command == "analyze":
            return (config.TRACE_PROBABILITY,)
        return config.SYNTHETIC_PROBABILITIES

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        specs = tuple(getattr(ns, "spec", None) or ())
        if specs == ("all",):
            specs = BUILTIN_NAMES
        grid = GridSettings(ns.k_min, ns.k_max, ns.k_count, ns.d_min, ns.d_max, ns.d_count)
        return cls(
            command=ns.command,
            input=Path(ns.input) if getattr(ns, "input", None) else None,
            holdout_input=Path(ns.holdout_input) if getattr(ns, "holdout_input", None) else None,
            holdout_quantile=getattr(ns, "holdout_quantile", None),
            column=getattr(ns, "column", None),
            specs=specs,
            methods=tuple(Method(m) for m in (ns.method or [m.value for m in Method])),
            probabilities=tuple(ns.prob or ()),
            n=ns.n,
            seeds=tuple(ns.seed or config.DEFAULT_SEEDS),
            grid=grid,
            gamma=ns.gamma,
            output=Path(ns.output) if ns.output else None,
            fmt=ns.format,
            per_k=tuple(getattr(ns, "per_k", None) or ()),
            full_scale=getattr(ns, "full_scale", False),
            fallback=not ns.no_fallback,
            workers=ns.workers,
        )


# ── Helpers ─────────────────────────────────────────────────────────────────

def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ComputationError):
        return config.EXIT_COMPUTATION_ERROR
    return config.EXIT_INPUT_ERROR


def _guarded(fn: Callable[[RunConfig], int]) -> Callable[[RunConfig], int]:
    """Map package and input-file errors to exit codes, logging the message."""

    @functools.wraps(fn)
    def wrapper(cfg: RunConfig) -> int:
        try:
            return fn(cfg)
        except (InputError, ComputationError) as exc:
            logger.error("%s", exc)
            return exit_code_for(exc)
        except OSError as exc:
            logger.error("cannot read or write %s: %s", exc.filename or "file", exc.strerror or exc)
            return config.EXIT_INPUT_ERROR

    return wrapper


def _emit(text: str, output: Optional[Path]) -> None:
    if output is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        atomic_write_text(output, text)
        logger.info("wrote %s", output)


def _report_exit(report: TightnessReport) -> int:
    tags = {r.error for r in report.errors}
    if tags & _COMPUTATION_TAGS:
        logger.error("%d rows failed: %s", len(report.errors), ", ".join(sorted(tags)))
        return config.EXIT_COMPUTATION_ERROR
    if tags:
        logger.error("%d rows failed: %s", len(report.errors), ", ".join(sorted(tags)))
        return config.EXIT_INPUT_ERROR
    return config.EXIT_OK


# ── Commands ────────────────────────────────────────────────────────────────

@_guarded
def cmd_analyze(cfg: RunConfig) -> int:
    """Estimate pWCET values from a measured trace."""
    trace = load_trace(cfg.input, cfg.column)
    n = cfg.sample_size
    if n is not None and n > trace.n:
        logger.warning("--n %d exceeds the trace length %d; using the whole trace", n, trace.n)
    samples = load_samples(trace.head(n))
    holdout = None
    if cfg.holdout_input is not None:
        holdout = load_samples(load_trace(cfg.holdout_input, cfg.column).values)
    report = run_trace(samples, cfg.methods, cfg.probability_list, cfg.grid, cfg.gamma,
                       holdout_quantile=cfg.holdout_quantile, holdout=holdout,
                       label=cfg.input.name, fallback=cfg.fallback, workers=cfg.workers)
    _emit(render_report(report, cfg.fmt), cfg.output)
    return _report_exit(report)


@_guarded
def cmd_synth(cfg: RunConfig) -> int:
    """Write n draws of a builtin distribution, one value per line."""
    spec = spec_by_name(cfg.specs[0])
    drawn = draw(spec, cfg.sample_size, cfg.seeds[0])
    if drawn.rejected:
        logger.info("%s: %d negative draws were rejected and redrawn", spec.label, drawn.rejected)
    if cfg.output is None:
        _emit(format_samples(drawn.samples.values), None)
    else:
        write_samples(cfg.output, drawn.samples.values)
        logger.info("wrote %d samples to %s", drawn.samples.n, cfg.output)
    return config.EXIT_OK


@_guarded
def cmd_eval(cfg: RunConfig) -> int:
    """Tightness of every method over builtin distributions."""
    targets = tuple(spec_by_name(name) for name in (cfg.specs or BUILTIN_NAMES))
    plan = EvaluationPlan(
        targets=targets,
        methods=cfg.methods,
        probabilities=cfg.probability_list,
        n=cfg.sample_size,
        seeds=cfg.seeds,
        grid=cfg.grid,
        gamma=cfg.gamma,
        fallback=cfg.fallback,
        workers=cfg.workers,
    )
    report = run_synthetic(plan)
    _emit(render_report(report, cfg.fmt), cfg.output)
    return _report_exit(report)


@_guarded
def cmd_curves(cfg: RunConfig) -> int:
    """Envelope and empirical CCDF columns for plotting."""
    if cfg.input is not None:
        samples = load_samples(load_trace(cfg.input, cfg.column).head(cfg.sample_size))
    else:
        samples = draw(spec_by_name(cfg.specs[0]), cfg.sample_size, cfg.seeds[0]).samples
    dump = dump_curves(samples, cfg.methods, cfg.grid, cfg.gamma, per_k=cfg.per_k,
                       fallback=cfg.fallback, p_min=min(cfg.probability_list), workers=cfg.workers)
    _emit(curves_to_json(dump) if cfg.fmt == "json" else curves_to_csv(dump), cfg.output)
    return config.EXIT_OK


_HANDLERS = {"analyze": cmd_analyze, "synth": cmd_synth, "eval": cmd_eval, "curves": cmd_curves}


# ── Argument parsing ────────────────────────────────────────────────────────

def _count(text: str) -> int:
    """Positive integer, scientific notation allowed (1e5)."""
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v) or v != int(v) or v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(v)


def _probability(text: str) -> float:
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (0.0 < p < 1.0):
        raise argparse.ArgumentTypeError(f"probability must lie in (0, 1), got {text!r}")
    return p


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 0.0) or v == float("inf"):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", nargs="+", type=str.upper, choices=[m.value for m in Method],
                   help="estimators to run (default: all)")
    p.add_argument("--prob", nargs="+", type=_probability, help="exceedance probabilities, e.g. 1e-15")
    p.add_argument("--n", type=_count, help="sample size (traces: first N observations)")
    p.add_argument("--seed", nargs="+", type=int, help="RNG seeds")
    grid = p.add_argument_group("parameter grid")
    grid.add_argument("--k-min", type=_positive)
    grid.add_argument("--k-max", type=_positive)
    grid.add_argument("--k-count", type=_count)
    grid.add_argument("--d-min", type=_positive)
    grid.add_argument("--d-max", type=_positive)
    grid.add_argument("--d-count", type=_count)
    p.add_argument("--gamma", type=float, default=config.GAMMA,
                   help=f"tail-share screen threshold (default {config.GAMMA})")
    p.add_argument("--no-fallback", action="store_true",
                   help="fail with exit 3 when the screen admits no parameter")
    p.add_argument("--workers", type=int, default=None, help=f"threads (default {config.MAX_WORKERS})")
    p.add_argument("--output", help="output file (default: stdout)")
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("-q", "--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pwcet", description="Chebyshev-envelope pWCET estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="estimate from a trace file")
    analyze.add_argument("--input", required=True, help="trace file (.txt or .parquet)")
    analyze.add_argument("--column", help="parquet column")
    analyze.add_argument("--holdout-input", help="full trace for holdout quantiles")
    analyze.add_argument("--holdout-quantile", type=_positive, help="known ground-truth quantile")

    synth = sub.add_parser("synth", help="sample a builtin distribution")
    synth.add_argument("--spec", nargs=1, required=True, metavar="NAME")

    ev = sub.add_parser("eval", help="tightness over builtin distributions")
    ev.add_argument("--spec", nargs="+", metavar="NAME", help="names or 'all' (default: all)")

    curves = sub.add_parser("curves", help="plot data for envelopes and the empirical CCDF")
    src = curves.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="trace file")
    src.add_argument("--spec", nargs=1, metavar="NAME")
    curves.add_argument("--column", help="parquet column")
    curves.add_argument("--per-k", nargs="+", type=_positive, metavar="K", help="extra x^k bound columns")

    for p in (analyze, synth, ev, curves):
        _add_common(p)
    for p in (synth, ev, curves):
        p.add_argument("--full-scale", action="store_true", help=f"n = {config.FULL_SCALE_N}")
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(stream=sys.stderr, level=level, format="[%(name)s] %(message)s", force=True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    configure_logging(ns.verbose, ns.quiet)
    try:
        cfg = RunConfig.from_args(ns)
    except InputError as exc:
        logger.error("%s", exc)
        return config.EXIT_INPUT_ERROR
    return _HANDLERS[cfg.command](cfg)
