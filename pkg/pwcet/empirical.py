"""Execution-time samples, the empirical CCDF and transformed moments E(f(X)).

Moments are kept in log-space: with k in the hundreds and values in the
thousands, E(X^k) overflows a double long before the envelope comparison
needs it.  Every observation carries weight 1/n; duplicates keep their
multiplicity.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterable

import numpy as np
from scipy.special import logsumexp

from .errors import EmptyInput, InputError, InvalidParameter, InvalidQuery, NegativeValue, NonFinite

if TYPE_CHECKING:
    from .bounds import BoundParams

logger = logging.getLogger(__name__)


class Family(str, Enum):
    """Transform applied to X before taking the k-th power."""

    POWER_K = "POWER_K"
    ATAN = "ATAN"
    TANH = "TANH"


LOG_SUPREMUM = {
    Family.POWER_K: math.inf,
    Family.ATAN: math.log(math.pi / 2.0),
    Family.TANH: 0.0,
}


# ── Sample data ─────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class SampleSet:
    """Sorted, non-negative execution times. Immutable."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64).ravel()
        if arr.size == 0:
            raise EmptyInput("sample set is empty")
        if not np.all(np.isfinite(arr)):
            raise NonFinite("sample set contains NaN or infinite values")
        if np.any(arr < 0.0):
            raise NegativeValue("sample set contains negative values")
        if np.any(np.diff(arr) < 0.0):
            raise InputError("sample set values must be sorted ascending; use load_samples()")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def minimum(self) -> float:
        return float(self.values[0])

    @property
    def maximum(self) -> float:
        return float(self.values[-1])

    @property
    def median(self) -> float:
        return float(np.median(self.values))

    def digest(self) -> str:
        """SHA-256 of the little-endian float64 values, hex encoded."""
        return hashlib.sha256(self.values.astype("<f8").tobytes()).hexdigest()

    def head(self, n: int) -> "SampleSet":
        return SampleSet(self.values[:n])

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SampleSet):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash(self.digest())

    def __repr__(self) -> str:
        return f"SampleSet(n={self.n}, min={self.minimum:g}, max={self.maximum:g})"


@dataclass(frozen=True)
class EmpiricalCcdf:
    """Distinct sample values b with p = P_emp(X >= b)."""

    b: np.ndarray
    p: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return [(float(x), float(q)) for x, q in zip(self.b, self.p)]


@dataclass(frozen=True)
class MomentValue:
    """log E(f(X)); -inf when every f(x_i) is zero."""

    log_value: float
    transform: str

    @property
    def value(self) -> float:
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_value))


def load_samples(raw: Iterable[float]) -> SampleSet:
    """Validate raw observations and return them as a sorted SampleSet."""
    arr = np.array(raw if isinstance(raw, np.ndarray) else list(raw), dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("no samples given")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise NonFinite(f"sample #{bad[0] + 1} is not finite ({arr[bad[0]]!r})")
    neg = np.flatnonzero(arr < 0.0)
    if neg.size:
        raise NegativeValue(f"sample #{neg[0] + 1} is negative ({arr[neg[0]]!r})")
    logger.debug("loaded %d samples, range [%g, %g]", arr.size, arr.min(), arr.max())
    return SampleSet(np.sort(arr, kind="stable"))


# ── Empirical distribution ─────────────────────────────────────────────────

def empirical_ccdf(s: SampleSet) -> EmpiricalCcdf:
    uniq, counts = np.unique(s.values, return_counts=True)
    below = np.concatenate(([0], np.cumsum(counts)[:-1]))
    at_least = s.n - below
    return EmpiricalCcdf(b=uniq, p=at_least / s.n)


def exceedance(s: SampleSet, b) -> np.ndarray:
    """P_emp(X >= b) for scalar or array b."""
    idx = np.searchsorted(s.values, np.asarray(b, dtype=np.float64), side="left")
    return (s.n - idx) / s.n


def empirical_quantile(s: SampleSet, p: float) -> float:
    """Smallest sample x with #(X > x)/n <= p."""
    if not (0.0 < p < 1.0) or not math.isfinite(p):
        raise InvalidQuery(f"probability must lie in (0, 1), got {p!r}")
    # guard against p*n landing a hair under an integer (1e-5 * 1e6)
    allowed = min(int(math.floor(p * s.n * (1.0 + 1e-12))), s.n - 1)
    return float(s.values[s.n - 1 - allowed])


# ── Moments ────────────────────────────────────────────────────────────────

def log_transform(values: np.ndarray, family: Family, d: float = 1.0) -> np.ndarray:
    """log f1(x/d): log x for POWER_K, log arctan(x/d), log tanh(x/d)."""
    values = np.asarray(values, dtype=np.float64)
    with np.errstate(divide="ignore"):
        if family is Family.POWER_K:
            return np.log(values)
        u = values / d
        if family is Family.ATAN:
            return np.log(np.arctan(u))
        if family is Family.TANH:
            return np.log(np.tanh(u))
    raise InvalidParameter(f"unknown transform family {family!r}")


def log_power_sums(logf: np.ndarray, ks: np.ndarray) -> np.ndarray:
    """log sum_i exp(k * logf_i) for every k; -inf when all terms vanish."""
    ks = np.asarray(ks, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.asarray(logsumexp(np.multiply.outer(ks, logf), axis=1), dtype=np.float64)


def _check_positive(name: str, value: float) -> None:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise InvalidParameter(f"{name} must be a number, got {value!r}") from None
    if not (math.isfinite(v) and v > 0):
        raise InvalidParameter(f"{name} must be a positive finite number, got {value!r}")


def moment_power_k(s: SampleSet, k: float) -> MomentValue:
    _check_positive("k", k)
    log_sum = log_power_sums(log_transform(s.values, Family.POWER_K), np.array([k]))[0]
    return MomentValue(float(log_sum - math.log(s.n)), f"x^{k:g}")


def moment_transformed(s: SampleSet, params: "BoundParams") -> MomentValue:
    _check_positive("k", params.k)
    _check_positive("d", params.d)
    family = Family(params.family)
    if family is Family.POWER_K:
        return moment_power_k(s, params.k)
    logf = log_transform(s.values, family, params.d)
    log_sum = log_power_sums(logf, np.array([params.k]))[0]
    name = "arctan" if family is Family.ATAN else "tanh"
    return MomentValue(float(log_sum - math.log(s.n)), f"{name}(x/{params.d:g})^{params.k:g}")
