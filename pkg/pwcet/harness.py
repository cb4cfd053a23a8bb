"""Evaluation runs: tightness of the three estimators against known quantiles.

A run is split into cells, one per (target, seed).  Each cell draws a single
sample set and hands it to every method, so the methods are compared on
identical data.  Cells run on a thread pool and are merged back in plan
order, which keeps reports identical for any worker count.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, TypeVar, Union

import numpy as np
import pandas as pd

from . import config
from .bounds import (
    UNREACHABLE,
    BoundParams,
    GridSettings,
    Method,
    ParamGrid,
    PwcetCurve,
    WcetValue,
    build_pwcet_curve,
    make_bound_curve,
)
from .empirical import Family, SampleSet, empirical_quantile, exceedance
from .errors import InvalidParameter, InvalidQuery, PwcetError
from .synthetic import DistributionSpec, builtin_specs, draw, negative_mass, sample, true_quantile

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

ROW_COLUMNS = (
    "target", "method", "seed", "p", "estimate", "true_quantile", "tightness",
    "k", "d", "floor", "fallback", "flag", "error",
)
UNDERESTIMATE = "UNDERESTIMATE"


# ── Plan and report types ───────────────────────────────────────────────────

def _methods(methods: Iterable) -> tuple[Method, ...]:
    try:
        chosen = {Method(m) for m in methods}
    except ValueError as exc:
        raise InvalidParameter(f"unknown method: {exc}") from None
    if not chosen:
        raise InvalidParameter("at least one method is required")
    # canonical column order regardless of how they were requested
    return tuple(m for m in Method if m in chosen)


def _probabilities(probabilities: Iterable[float]) -> tuple[float, ...]:
    out = []
    for p in probabilities:
        try:
            q = float(p)
        except (TypeError, ValueError):
            raise InvalidQuery(f"probability must be a number, got {p!r}") from None
        if not (0.0 < q < 1.0):
            raise InvalidQuery(f"probability must lie in (0, 1), got {p!r}")
        out.append(q)
    if not out:
        raise InvalidQuery("at least one probability is required")
    return tuple(sorted(set(out), reverse=True))


@dataclass(frozen=True)
class EvaluationPlan:
    targets: tuple[DistributionSpec, ...]
    methods: tuple[Method, ...] = tuple(Method)
    probabilities: tuple[float, ...] = config.SYNTHETIC_PROBABILITIES
    n: int = config.DESK_N
    seeds: tuple[int, ...] = config.DEFAULT_SEEDS
    grid: GridSettings = field(default_factory=GridSettings)
    gamma: float = config.GAMMA
    fallback: bool = True
    workers: Optional[int] = None

    def __post_init__(self) -> None:
        targets = tuple(self.targets)
        if not targets:
            raise InvalidParameter("evaluation plan needs at least one target")
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "methods", _methods(self.methods))
        object.__setattr__(self, "probabilities", _probabilities(self.probabilities))
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise InvalidParameter(f"sample size must be a positive integer, got {self.n!r}")
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds or any(s < 0 for s in seeds):
            raise InvalidParameter(f"seeds must be non-negative integers, got {self.seeds!r}")
        object.__setattr__(self, "seeds", seeds)
        if not (0.0 < float(self.gamma) <= 1.0):
            raise InvalidParameter(f"gamma must lie in (0, 1], got {self.gamma!r}")
        if self.workers is not None and self.workers < 1:
            raise InvalidParameter(f"workers must be at least 1, got {self.workers!r}")

    def describe(self) -> dict:
        return {
            "targets": [t.label or t.family.value for t in self.targets],
            "methods": [m.value for m in self.methods],
            "probabilities": list(self.probabilities),
            "n": int(self.n),
            "seeds": list(self.seeds),
            "grid": self.grid.describe(),
            "gamma": float(self.gamma),
            "fallback": self.fallback,
        }


@dataclass(frozen=True)
class TightnessRow:
    target: str
    method: Method
    seed: Optional[int]
    p: float
    estimate: Optional[WcetValue]
    true_quantile: Optional[float]
    params: Optional[BoundParams] = None
    floor: Optional[float] = None
    fallback: bool = False
    error: str = ""

    @property
    def tightness(self) -> Optional[float]:
        """estimate / true quantile; None when either side is missing."""
        est, tq = self.estimate, self.true_quantile
        if not isinstance(est, float) or tq is None or not (math.isfinite(tq) and tq > 0.0):
            return None
        return est / tq

    @property
    def underestimate(self) -> bool:
        t = self.tightness
        return t is not None and t < 1.0

    def record(self) -> dict:
        """Row as output tokens: floats stay floats, missing values become markers.

        UNREACHABLE rows have no winning parameters, so k and d are blank and
        ``floor`` carries the envelope floor that blocked the inversion.
        """
        if self.estimate is None:
            est = config.UNKNOWN
        elif self.estimate is UNREACHABLE:
            est = config.UNREACHABLE
        else:
            est = self.estimate
        t = self.tightness
        return {
            "target": self.target,
            "method": self.method.value,
            "seed": "" if self.seed is None else self.seed,
            "p": self.p,
            "estimate": est,
            "true_quantile": config.UNKNOWN if self.true_quantile is None else self.true_quantile,
            "tightness": config.UNDEFINED if t is None else t,
            "k": "" if self.params is None else self.params.k,
            "d": "" if self.params is None or self.params.family is Family.POWER_K else self.params.d,
            "floor": "" if self.floor is None else self.floor,
            "fallback": self.fallback,
            "flag": UNDERESTIMATE if self.underestimate else "",
            "error": self.error,
        }


@dataclass(frozen=True)
class TightnessReport:
    rows: tuple[TightnessRow, ...]
    metadata: dict

    def records(self) -> list[dict]:
        return [r.record() for r in self.rows]

    def to_frame(self) -> pd.DataFrame:
        """Numeric view: markers become NaN, with the marker kept in ``status``."""
        data = []
        for r in self.rows:
            if r.error:
                status = r.error
            elif r.estimate is UNREACHABLE:
                status = config.UNREACHABLE
            else:
                status = ""
            t = r.tightness
            data.append({
                "target": r.target,
                "method": r.method.value,
                "seed": r.seed,
                "p": r.p,
                "estimate": r.estimate if isinstance(r.estimate, float) else np.nan,
                "true_quantile": np.nan if r.true_quantile is None else r.true_quantile,
                "tightness": np.nan if t is None else t,
                "k": np.nan if r.params is None else r.params.k,
                "d": np.nan if r.params is None else r.params.d,
                "status": status,
            })
        return pd.DataFrame(data, columns=["target", "method", "seed", "p", "estimate",
                                           "true_quantile", "tightness", "k", "d", "status"])

    @property
    def underestimates(self) -> list[TightnessRow]:
        return [r for r in self.rows if r.underestimate]

    @property
    def errors(self) -> list[TightnessRow]:
        return [r for r in self.rows if r.error]


@dataclass(frozen=True)
class CurveDump:
    b: np.ndarray
    empirical: np.ndarray
    envelopes: dict[str, np.ndarray]
    per_k: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def columns(self) -> list[str]:
        return ["b", "empirical", *self.envelopes, *self.per_k]

    def to_frame(self) -> pd.DataFrame:
        data = {"b": self.b, "empirical": self.empirical, **self.envelopes, **self.per_k}
        return pd.DataFrame(data, columns=self.columns)


# ── Shared cell machinery ───────────────────────────────────────────────────

def _ordered_map(fn: Callable[[T], R], items: Sequence[T], workers: Optional[int]) -> list[R]:
    workers = workers or config.MAX_WORKERS
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _inner_workers(cells: int, workers: Optional[int]) -> Optional[int]:
    # parallelize across cells when there are several, across d otherwise
    return 1 if cells > 1 else workers


def _estimate_rows(samples: SampleSet, label: str, seed: Optional[int],
                   methods: Sequence[Method], probabilities: Sequence[float],
                   truth: dict[float, tuple[Optional[float], str]], grid: ParamGrid,
                   gamma: float, fallback: bool,
                   workers: Optional[int]) -> tuple[list[TightnessRow], dict[str, bool]]:
    rows: list[TightnessRow] = []
    fallbacks: dict[str, bool] = {}
    for method in methods:
        try:
            curve = build_pwcet_curve(samples, method, grid, gamma,
                                      fallback=fallback, max_workers=workers)
        except PwcetError as exc:
            logger.warning("%s/%s seed=%s: %s", label, method.value, seed, exc)
            rows.extend(TightnessRow(label, method, seed, p, None, truth[p][0], error=exc.tag)
                        for p in probabilities)
            continue
        fallbacks[method.value] = curve.fallback
        floor = curve.floor()
        for p in probabilities:
            tq, tq_error = truth[p]
            est, prm = curve.estimate(p)
            rows.append(TightnessRow(label, method, seed, p, est, tq, prm, floor,
                                     curve.fallback, tq_error))
    return rows, fallbacks


def _synthetic_truth(spec: DistributionSpec, probabilities: Sequence[float]) -> dict:
    truth = {}
    for p in probabilities:
        try:
            truth[p] = (true_quantile(spec, p), "")
        except PwcetError as exc:
            logger.warning("%s: no true quantile at p=%g: %s", spec.label, p, exc)
            truth[p] = (None, exc.tag)
    return truth


# ── Synthetic evaluation ────────────────────────────────────────────────────

def run_synthetic(plan: EvaluationPlan) -> TightnessReport:
    """Estimate every (target, seed, method, p) of the plan and compare with the true quantile."""
    cells = [(t, s) for t in plan.targets for s in plan.seeds]
    inner = _inner_workers(len(cells), plan.workers)

    def run_cell(cell: tuple[DistributionSpec, int]) -> tuple[list[TightnessRow], dict]:
        spec, seed = cell
        label = spec.label or spec.family.value
        truth = _synthetic_truth(spec, plan.probabilities)
        try:
            drawn = draw(spec, plan.n, seed)
            grid = plan.grid.resolve(drawn.samples)
        except PwcetError as exc:
            logger.warning("%s seed=%d: %s", label, seed, exc)
            rows = [TightnessRow(label, m, seed, p, None, truth[p][0], error=exc.tag)
                    for m in plan.methods for p in plan.probabilities]
            return rows, {"target": label, "seed": seed, "error": exc.tag}

        rows, fallbacks = _estimate_rows(drawn.samples, label, seed, plan.methods,
                                         plan.probabilities, truth, grid, plan.gamma,
                                         plan.fallback, inner)
        meta = {
            "target": label,
            "seed": seed,
            "n": drawn.samples.n,
            "sample_sha256": drawn.samples.digest(),
            "rejected_negative_draws": drawn.rejected,
            "untruncated_negative_mass": negative_mass(spec),
            "grid": grid.describe(),
            "fallback": fallbacks,
        }
        return rows, meta

    results = _ordered_map(run_cell, cells, plan.workers)
    rows = tuple(r for cell_rows, _ in results for r in cell_rows)
    metadata = {
        "kind": "synthetic",
        "plan": plan.describe(),
        "distributions": [t.describe() for t in plan.targets],
        "safeguard": config.SAFEGUARD_LABEL,
        "tail_fraction": config.TAIL_FRACTION,
        "rng": config.RNG_ALGORITHM,
        "true_quantiles": "untruncated distribution",
        "cells": [meta for _, meta in results],
    }
    report = TightnessReport(rows, metadata)
    if report.underestimates:
        logger.warning("%d rows underestimate the true quantile", len(report.underestimates))
    return report


# ── Traces ──────────────────────────────────────────────────────────────────

def _as_grid(grid: Union[GridSettings, ParamGrid], samples: SampleSet) -> ParamGrid:
    return grid if isinstance(grid, ParamGrid) else grid.resolve(samples)


def run_trace(samples: SampleSet, methods: Iterable = tuple(Method),
              probabilities: Iterable[float] = (config.TRACE_PROBABILITY,),
              grid: Union[GridSettings, ParamGrid, None] = None,
              gamma: float = config.GAMMA, holdout_quantile: Optional[float] = None,
              holdout: Optional[SampleSet] = None, *, label: str = "trace",
              seed: Optional[int] = None, fallback: bool = True,
              workers: Optional[int] = None) -> TightnessReport:
    """Estimate from a measured trace.

    Tightness needs ground truth: either ``holdout_quantile`` (used for every
    probability) or a ``holdout`` trace whose empirical quantile is taken per
    probability.  Without either, the true quantile is UNKNOWN.
    """
    methods = _methods(methods)
    probabilities = _probabilities(probabilities)
    if holdout_quantile is not None and holdout is not None:
        raise InvalidParameter("give either a holdout quantile or a holdout trace, not both")

    if holdout is not None:
        truth = {p: (empirical_quantile(holdout, p), "") for p in probabilities}
        source = {"source": "holdout trace", "n": holdout.n, "sha256": holdout.digest()}
    elif holdout_quantile is not None:
        q = float(holdout_quantile)
        if not (math.isfinite(q) and q > 0.0):
            raise InvalidQuery(f"holdout quantile must be positive and finite, got {holdout_quantile!r}")
        truth = {p: (q, "") for p in probabilities}
        source = {"source": "given", "value": q}
    else:
        truth = {p: (None, "") for p in probabilities}
        source = {"source": "none"}

    resolved = _as_grid(grid or GridSettings(), samples)
    rows, fallbacks = _estimate_rows(samples, label, seed, methods, probabilities, truth,
                                     resolved, gamma, fallback, workers)
    metadata = {
        "kind": "trace",
        "target": label,
        "methods": [m.value for m in methods],
        "probabilities": list(probabilities),
        "n": samples.n,
        "sample_sha256": samples.digest(),
        "grid": resolved.describe(),
        "gamma": float(gamma),
        "safeguard": config.SAFEGUARD_LABEL,
        "tail_fraction": config.TAIL_FRACTION,
        "fallback": fallbacks,
        "ground_truth": source,
    }
    return TightnessReport(tuple(rows), metadata)


def run_holdout_study(specs: Optional[Sequence[DistributionSpec]] = None,
                      methods: Iterable = tuple(Method),
                      p: float = config.TRACE_PROBABILITY,
                      n: int = config.TRACE_ESTIMATION_N,
                      holdout_n: int = config.HOLDOUT_N,
                      seeds: Sequence[int] = (config.DEFAULT_SEEDS[0],),
                      grid: Optional[GridSettings] = None,
                      gamma: float = config.GAMMA, *, fallback: bool = True,
                      workers: Optional[int] = None) -> TightnessReport:
    """Trace protocol on synthetic data: estimate from n draws, validate on an independent holdout."""
    specs = list(specs) if specs is not None else builtin_specs()
    methods = _methods(methods)
    cells = [(spec, s) for spec in specs for s in seeds]
    inner = _inner_workers(len(cells), workers)

    def run_cell(cell: tuple[DistributionSpec, int]) -> TightnessReport:
        spec, seed = cell
        label = spec.label or spec.family.value
        try:
            estimation = sample(spec, n, seed)
            holdout = sample(spec, holdout_n, seed + config.HOLDOUT_SEED_OFFSET)
        except PwcetError as exc:
            logger.warning("%s seed=%d: %s", label, seed, exc)
            rows = tuple(TightnessRow(label, m, seed, p, None, None, error=exc.tag) for m in methods)
            return TightnessReport(rows, {"target": label, "seed": seed, "error": exc.tag})
        return run_trace(estimation, methods, (p,), grid, gamma, holdout=holdout, label=label,
                         seed=seed, fallback=fallback, workers=inner)

    parts = _ordered_map(run_cell, cells, workers)
    metadata = {
        "kind": "holdout",
        "probability": p,
        "estimation_n": n,
        "holdout_n": holdout_n,
        "holdout_seed_offset": config.HOLDOUT_SEED_OFFSET,
        "rng": config.RNG_ALGORITHM,
        "cells": [part.metadata for part in parts],
    }
    return TightnessReport(tuple(r for part in parts for r in part.rows), metadata)


# ── Curve dumps ─────────────────────────────────────────────────────────────

def _check_b_grid(b_grid: Sequence[float]) -> np.ndarray:
    b = np.asarray(b_grid, dtype=np.float64).ravel()
    if b.size == 0:
        raise InvalidQuery("curve grid is empty")
    if not np.all(np.isfinite(b)) or np.any(b <= 0.0):
        raise InvalidQuery("curve grid values must be positive and finite")
    if np.any(np.diff(b) < 0.0):
        raise InvalidQuery("curve grid must be sorted ascending")
    return b


def default_b_grid(s: SampleSet, memik: PwcetCurve,
                   p_min: float = min(config.SYNTHETIC_PROBABILITIES),
                   points: int = config.CURVE_POINTS) -> np.ndarray:
    """Log-spaced from half the smallest sample to 4x the MEMIK estimate at p_min."""
    positive = s.values[s.values > 0.0]
    lo = float(positive[0]) * config.CURVE_LOW_FRACTION if positive.size else config.CURVE_LOW_FRACTION
    est = memik.estimate(p_min)[0]
    hi = est * config.CURVE_HIGH_FACTOR if isinstance(est, float) else s.maximum * config.CURVE_HIGH_FACTOR
    hi = max(hi, lo * 2.0)
    return np.geomspace(lo, hi, points)


def dump_curves(s: SampleSet, methods: Iterable = tuple(Method),
                grid: Union[GridSettings, ParamGrid, None] = None,
                gamma: float = config.GAMMA, b_grid: Optional[Sequence[float]] = None,
                per_k: Sequence[float] = (), *, fallback: bool = True,
                p_min: float = min(config.SYNTHETIC_PROBABILITIES),
                workers: Optional[int] = None) -> CurveDump:
    """Envelope probabilities of each method, the empirical CCDF and optional single-k bounds."""
    methods = _methods(methods)
    resolved = _as_grid(grid or GridSettings(), s)
    curves = {m: build_pwcet_curve(s, m, resolved, gamma, fallback=fallback, max_workers=workers)
              for m in methods}
    if b_grid is None:
        memik = curves.get(Method.MEMIK) or build_pwcet_curve(
            s, Method.MEMIK, resolved, gamma, fallback=True, max_workers=workers)
        b = default_b_grid(s, memik, p_min)
    else:
        b = _check_b_grid(b_grid)

    envelopes = {m.value.lower(): np.asarray(curves[m].envelope(b), dtype=np.float64) for m in methods}
    singles = {}
    for k in per_k:
        bound = make_bound_curve(s, BoundParams(Family.POWER_K, k))
        with np.errstate(over="ignore"):
            singles[f"k={float(k):g}"] = np.minimum(1.0, np.exp(bound.log_evaluate(b)))
    metadata = {
        "n": s.n,
        "sample_sha256": s.digest(),
        "grid": resolved.describe(),
        "gamma": float(gamma),
        "fallback": {m.value: curves[m].fallback for m in methods},
    }
    return CurveDump(b, exceedance(s, b), envelopes, singles, metadata)
