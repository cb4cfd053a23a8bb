"""Chebyshev-inequality bounds P(X >= b) <= E(f(X)) / f(b) and their envelopes.

Three families of f share one code path:

    POWER_K   f(x) = x^k                  (the MEMIK envelope, min over k)
    ATAN      f(x) = arctan(x/d)^k        (min over d, k)
    TANH      f(x) = tanh(x/d)^k          (min over d, k)

Every comparison happens in log-space; probabilities are clamped to 1 only
when handed back to the caller.  The saturating families cannot certify
probabilities below E(f(X)) / sup(f); inversion reports that as
``UNREACHABLE`` instead of raising.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal, Sequence, Union

import numpy as np

from . import config
from .empirical import (
    LOG_SUPREMUM,
    Family,
    MomentValue,
    SampleSet,
    log_power_sums,
    log_transform,
    moment_transformed,
)
from .errors import EmptyAdmissibleSet, InvalidParameter, InvalidQuery

logger = logging.getLogger(__name__)


class Method(str, Enum):
    MEMIK = "MEMIK"
    ATAN = "ATAN"
    TANH = "TANH"

    @property
    def family(self) -> Family:
        return _METHOD_FAMILY[self]


_METHOD_FAMILY = {
    Method.MEMIK: Family.POWER_K,
    Method.ATAN: Family.ATAN,
    Method.TANH: Family.TANH,
}


class Reach(Enum):
    UNREACHABLE = "UNREACHABLE"

    def __repr__(self) -> str:
        return self.value


UNREACHABLE = Reach.UNREACHABLE
WcetValue = Union[float, Literal[Reach.UNREACHABLE]]


# ── Parameters and grids ────────────────────────────────────────────────────

def _positive(name: str, value: float) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise InvalidParameter(f"{name} must be a number, got {value!r}") from None
    if not (math.isfinite(v) and v > 0):
        raise InvalidParameter(f"{name} must be positive and finite, got {value!r}")
    return v


@dataclass(frozen=True)
class BoundParams:
    family: Family
    k: float
    d: float = 1.0

    def __post_init__(self) -> None:
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "k", _positive("k", self.k))
        d = _positive("d", self.d)
        # d plays no role for x^k
        object.__setattr__(self, "d", 1.0 if family is Family.POWER_K else d)


def _strictly_increasing(name: str, values: Sequence[float]) -> tuple[float, ...]:
    out = tuple(_positive(name, v) for v in values)
    if not out:
        raise InvalidParameter(f"{name} grid is empty")
    if any(b <= a for a, b in zip(out, out[1:])):
        raise InvalidParameter(f"{name} grid must be strictly increasing")
    return out


@dataclass(frozen=True)
class ParamGrid:
    k_values: tuple[float, ...]
    d_values: tuple[float, ...] = (1.0,)

    def __post_init__(self) -> None:
        object.__setattr__(self, "k_values", _strictly_increasing("k", self.k_values))
        object.__setattr__(self, "d_values", _strictly_increasing("d", self.d_values))

    def params(self, family: Family) -> list[BoundParams]:
        """Grid entries in (k, d) order; POWER_K ignores d."""
        family = Family(family)
        if family is Family.POWER_K:
            return [BoundParams(family, k) for k in self.k_values]
        return [BoundParams(family, k, d) for k in self.k_values for d in self.d_values]

    def describe(self) -> dict:
        return {
            "k_min": self.k_values[0], "k_max": self.k_values[-1], "k_count": len(self.k_values),
            "d_min": self.d_values[0], "d_max": self.d_values[-1], "d_count": len(self.d_values),
        }


@dataclass(frozen=True)
class GridSettings:
    """Optional grid overrides; unset fields fall back to config defaults."""

    k_min: float | None = None
    k_max: float | None = None
    k_count: int | None = None
    d_min: float | None = None
    d_max: float | None = None
    d_count: int | None = None

    def resolve(self, s: SampleSet) -> ParamGrid:
        k_lo = self.k_min if self.k_min is not None else config.K_MIN
        k_hi = self.k_max if self.k_max is not None else config.K_MAX
        k_n = self.k_count if self.k_count is not None else config.K_COUNT
        d_n = self.d_count if self.d_count is not None else config.D_COUNT
        ks = _log_spaced("k", k_lo, k_hi, k_n)

        positive = s.values[s.values > 0.0]
        if positive.size == 0 and (self.d_min is None or self.d_max is None):
            return ParamGrid(ks, (1.0,))
        base = s.median if s.median > 0.0 else float(positive[0])
        d_lo = self.d_min if self.d_min is not None else base / config.D_LOW_DIVISOR
        d_hi = self.d_max if self.d_max is not None else s.maximum * config.D_HIGH_FACTOR
        return ParamGrid(ks, _log_spaced("d", d_lo, d_hi, d_n))

    def describe(self) -> dict:
        return {
            "k_min": self.k_min if self.k_min is not None else config.K_MIN,
            "k_max": self.k_max if self.k_max is not None else config.K_MAX,
            "k_count": self.k_count if self.k_count is not None else config.K_COUNT,
            "d_min": self.d_min if self.d_min is not None else f"median/{config.D_LOW_DIVISOR:g}",
            "d_max": self.d_max if self.d_max is not None else f"{config.D_HIGH_FACTOR:g}*max",
            "d_count": self.d_count if self.d_count is not None else config.D_COUNT,
        }


def _log_spaced(name: str, lo: float, hi: float, count: int) -> tuple[float, ...]:
    lo, hi = _positive(f"{name}_min", lo), _positive(f"{name}_max", hi)
    if int(count) != count or count < 1:
        raise InvalidParameter(f"{name}_count must be a positive integer, got {count!r}")
    if count == 1:
        return (lo,)
    if hi <= lo:
        raise InvalidParameter(f"{name}_max ({hi:g}) must exceed {name}_min ({lo:g})")
    return tuple(float(v) for v in np.geomspace(lo, hi, int(count)))


# ── Single bound ────────────────────────────────────────────────────────────

def _invert_log(family: Family, ks, ds, log_moments, p: float) -> np.ndarray:
    """Smallest b with E/f(b) <= p per parameter; inf where f saturates first."""
    ks, ds, lms = (np.asarray(a, dtype=np.float64) for a in (ks, ds, log_moments))
    log_t = (lms - math.log(p)) / ks
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if family is Family.POWER_K:
            return np.exp(log_t)
        log_sup = LOG_SUPREMUM[family]
        saturated = log_t >= log_sup + math.log1p(-config.SATURATION_RTOL)
        t = np.exp(np.minimum(log_t, log_sup))
        b = ds * (np.tan(t) if family is Family.ATAN else np.arctanh(t))
    return np.where(saturated | ~np.isfinite(b), np.inf, b)


def _check_probability(p: float) -> float:
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise InvalidQuery(f"probability must be a number, got {p!r}") from None
    if not (0.0 < p < 1.0):
        raise InvalidQuery(f"probability must lie in (0, 1), got {p!r}")
    return p


def _check_times(b) -> np.ndarray:
    arr = np.asarray(b, dtype=np.float64)
    if arr.size == 0 or not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise InvalidQuery("execution time queries must be positive and finite")
    return arr


@dataclass(frozen=True)
class BoundCurve:
    """One Chebyshev bound with its moment precomputed over a sample set."""

    params: BoundParams
    log_moment: MomentValue

    def log_evaluate(self, b) -> np.ndarray:
        """log(E(f(X)) / f(b)) before clamping."""
        p = self.params
        return self.log_moment.log_value - p.k * log_transform(np.asarray(b, dtype=np.float64), p.family, p.d)

    @property
    def floor(self) -> float:
        """Smallest probability this bound can certify (0 for x^k)."""
        p = self.params
        if p.family is Family.POWER_K:
            return 0.0
        return float(np.exp(self.log_moment.log_value - p.k * LOG_SUPREMUM[p.family]))


def make_bound_curve(s: SampleSet, params: BoundParams) -> BoundCurve:
    return BoundCurve(params, moment_transformed(s, params))


def eval_bound(curve: BoundCurve, b: float) -> float:
    """min(1, E(f(X)) / f(b))."""
    b = _check_times(b)
    if b.ndim:
        raise InvalidQuery("eval_bound takes a single execution time")
    with np.errstate(over="ignore"):
        return float(min(1.0, np.exp(curve.log_evaluate(b))))


def invert_bound(curve: BoundCurve, p: float) -> WcetValue:
    """Smallest b with eval_bound(curve, b) <= p, or UNREACHABLE."""
    p = _check_probability(p)
    prm = curve.params
    b = float(_invert_log(prm.family, [prm.k], [prm.d], [curve.log_moment.log_value], p)[0])
    return UNREACHABLE if math.isinf(b) else b


# ── Grid moments and the safeguard ──────────────────────────────────────────

@dataclass(frozen=True)
class _GridTable:
    """Flattened (k, d)-ordered grid with log sums and top-tail shares."""

    ks: np.ndarray
    ds: np.ndarray
    log_sums: np.ndarray
    log_tail_share: np.ndarray


def tail_count(n: int) -> int:
    """Number of largest samples whose share of a moment sum is screened."""
    return max(1, math.ceil(config.TAIL_FRACTION * n))


def _grid_table(s: SampleSet, family: Family, grid: ParamGrid,
                max_workers: int | None = None) -> _GridTable:
    ks = np.asarray(grid.k_values, dtype=np.float64)
    m = tail_count(s.n)
    if family is Family.POWER_K:
        ds_axis = np.array([1.0])
    else:
        ds_axis = np.asarray(grid.d_values, dtype=np.float64)

    def per_d(d: float) -> tuple[np.ndarray, np.ndarray]:
        logf = log_transform(s.values, family, d)
        sums = log_power_sums(logf, ks)
        # sorted ascending and f is non-decreasing, so the top m sit at the end
        with np.errstate(invalid="ignore"):
            share = log_power_sums(logf[-m:], ks) - sums
        # all-zero samples: nothing can dominate
        return sums, np.where(np.isneginf(sums), -np.inf, share)

    workers = max_workers or config.MAX_WORKERS
    if workers > 1 and ds_axis.size > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(per_d, ds_axis))
    else:
        parts = [per_d(d) for d in ds_axis]

    # rows = d, cols = k  ->  flatten in (k, d) order
    sums = np.stack([p[0] for p in parts]).T.ravel()
    share = np.stack([p[1] for p in parts]).T.ravel()
    kk, dd = np.meshgrid(ks, ds_axis, indexing="ij")
    return _GridTable(kk.ravel(), dd.ravel(), sums, share)


def _check_gamma(gamma: float) -> float:
    try:
        g = float(gamma)
    except (TypeError, ValueError):
        raise InvalidParameter(f"gamma must be a number, got {gamma!r}") from None
    if not (0.0 < g <= 1.0):
        raise InvalidParameter(f"gamma must lie in (0, 1], got {gamma!r}")
    return g


def _admitted_mask(table: _GridTable, gamma: float) -> np.ndarray:
    return table.log_tail_share <= math.log(gamma) + 1e-12


def restrict_params(s: SampleSet, grid: ParamGrid, family: Family,
                    gamma: float = config.GAMMA,
                    max_workers: int | None = None) -> list[BoundParams]:
    """Grid entries whose moment sum is not carried by the largest samples.

    With m = tail_count(n), an entry is admitted when the m largest samples
    contribute at most ``gamma`` of sum f(x_i)^k.  For n below
    1 / TAIL_FRACTION this is the largest-sample share alone.
    """
    family = Family(family)
    gamma = _check_gamma(gamma)
    table = _grid_table(s, family, grid, max_workers)
    mask = _admitted_mask(table, gamma)
    if not mask.any():
        raise EmptyAdmissibleSet(
            f"{family.value}: no parameter in the grid passes the tail-share screen (gamma={gamma:g})"
        )
    return [BoundParams(family, k, d) for k, d in zip(table.ks[mask], table.ds[mask])]


# ── Envelope ────────────────────────────────────────────────────────────────

_EVAL_CHUNK = 2048


@dataclass(frozen=True)
class PwcetCurve:
    """Pointwise minimum over the admitted bounds of one method."""

    method: Method
    admitted: tuple[BoundCurve, ...]
    provenance: str
    fallback: bool = False
    grid_size: int = 0
    _ks: np.ndarray = field(init=False, repr=False, compare=False)
    _ds: np.ndarray = field(init=False, repr=False, compare=False)
    _lms: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.admitted:
            raise EmptyAdmissibleSet(f"{self.method.value}: envelope needs at least one bound")
        object.__setattr__(self, "_ks", np.array([c.params.k for c in self.admitted]))
        object.__setattr__(self, "_ds", np.array([c.params.d for c in self.admitted]))
        object.__setattr__(self, "_lms", np.array([c.log_moment.log_value for c in self.admitted]))

    @property
    def family(self) -> Family:
        return self.method.family

    def log_envelope(self, b) -> np.ndarray:
        """min over admitted bounds of log(E/f(b)), unclamped."""
        b = _check_times(b)
        flat = np.atleast_1d(b).ravel()
        out = np.empty(flat.size)
        for start in range(0, flat.size, _EVAL_CHUNK):
            chunk = flat[start:start + _EVAL_CHUNK]
            if self.family is Family.POWER_K:
                log_f = np.log(chunk)[None, :]
            else:
                log_f = log_transform(chunk[None, :], self.family, self._ds[:, None])
            vals = self._lms[:, None] - self._ks[:, None] * log_f
            out[start:start + chunk.size] = vals.min(axis=0)
        return out.reshape(b.shape)

    def envelope(self, b) -> np.ndarray | float:
        with np.errstate(over="ignore"):
            vals = np.minimum(1.0, np.exp(self.log_envelope(b)))
        return float(vals) if np.ndim(vals) == 0 else vals

    def floor(self) -> float:
        return min(c.floor for c in self.admitted)

    def estimate(self, p: float) -> tuple[WcetValue, BoundParams | None]:
        """WCET at exceedance probability p and the parameters achieving it.

        Ties within TIE_RTOL go to the smallest k, then the smallest d.
        """
        p = _check_probability(p)
        b = _invert_log(self.family, self._ks, self._ds, self._lms, p)
        finite = np.isfinite(b)
        if not finite.any():
            return UNREACHABLE, None
        best = float(b[finite].min())
        winner = int(np.flatnonzero(finite & (b <= best * (1.0 + config.TIE_RTOL)))[0])
        return best, self.admitted[winner].params

    def params(self) -> list[BoundParams]:
        return [c.params for c in self.admitted]


def build_pwcet_curve(s: SampleSet, method: Method, grid: ParamGrid,
                      gamma: float = config.GAMMA, *, fallback: bool = False,
                      max_workers: int | None = None) -> PwcetCurve:
    """Screen the grid, precompute one moment per admitted entry, wrap as an envelope.

    With ``fallback`` an empty admissible set keeps every entry with the
    smallest k and flags the curve instead of raising.
    """
    method = Method(method)
    family = method.family
    gamma = _check_gamma(gamma)
    table = _grid_table(s, family, grid, max_workers)
    mask = _admitted_mask(table, gamma)
    used_fallback = False
    if not mask.any():
        if not fallback:
            raise EmptyAdmissibleSet(
                f"{method.value}: no parameter in the grid passes the tail-share screen (gamma={gamma:g})"
            )
        mask = table.ks == table.ks.min()
        used_fallback = True
        logger.warning("%s: tail-share screen admitted nothing; falling back to k=%g",
                       method.value, table.ks.min())

    log_n = math.log(s.n)
    curves = []
    for k, d, log_sum in zip(table.ks[mask], table.ds[mask], table.log_sums[mask]):
        prm = BoundParams(family, float(k), float(d))
        label = "x" if family is Family.POWER_K else f"{family.value.lower()}(x/{prm.d:g})"
        curves.append(BoundCurve(prm, MomentValue(float(log_sum - log_n), f"{label}^{prm.k:g}")))
    logger.info("%s: %d/%d grid entries admitted (n=%d)", method.value, len(curves), table.ks.size, s.n)
    return PwcetCurve(method, tuple(curves), s.digest(), used_fallback, int(table.ks.size))


def estimate_wcet(curve: PwcetCurve, p: float) -> WcetValue:
    return curve.estimate(p)[0]
