"""Synthetic execution-time distributions with exact tail quantiles.

Parameter conventions:
    Gaussian  mu, sigma
    Weibull   shape alpha, scale lam        CCDF exp(-(x/lam)^alpha)
    Beta      alpha, beta on (0, 1)
    Gamma     shape alpha, rate lam         mean alpha/lam
    Mixture   component specs + weights

Sampling rejects and redraws negative Gaussian values, so Gaussian-based
samples follow the distribution truncated at 0.  Ground-truth quantiles are
taken from the untruncated CCDF; ``negative_mass`` reports the difference.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import optimize, special

from . import config
from .empirical import SampleSet
from .errors import BracketFailure, InvalidParameter, InvalidQuery, InvalidSpec

logger = logging.getLogger(__name__)

_TINY = 5e-324
_MAX_REDRAW_ROUNDS = 10_000


class DistFamily(str, Enum):
    GAUSSIAN = "GAUSSIAN"
    WEIBULL = "WEIBULL"
    BETA = "BETA"
    GAMMA = "GAMMA"
    MIXTURE = "MIXTURE"


PARAM_NAMES = {
    DistFamily.GAUSSIAN: ("mu", "sigma"),
    DistFamily.WEIBULL: ("alpha", "lam"),
    DistFamily.BETA: ("alpha", "beta"),
    DistFamily.GAMMA: ("alpha", "lam"),
}


# ── Specs ───────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class DistributionSpec:
    family: DistFamily
    params: tuple[float, ...] = ()
    label: str = ""
    components: tuple["DistributionSpec", ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        try:
            family = DistFamily(self.family)
        except ValueError:
            raise InvalidSpec(f"unknown distribution family {self.family!r}") from None
        object.__setattr__(self, "family", family)
        if family is DistFamily.MIXTURE:
            self._validate_mixture()
        else:
            self._validate_simple(family)

    def _validate_simple(self, family: DistFamily) -> None:
        names = PARAM_NAMES[family]
        if len(self.params) != len(names):
            raise InvalidSpec(f"{family.value} takes parameters {names}, got {self.params!r}")
        try:
            params = tuple(float(v) for v in self.params)
        except (TypeError, ValueError):
            raise InvalidSpec(f"{family.value} parameters must be numbers, got {self.params!r}") from None
        if not all(math.isfinite(v) for v in params):
            raise InvalidSpec(f"{family.value} parameters must be finite, got {params!r}")
        # the Gaussian location may be any real; everything else is a shape/scale/rate
        positive = params[1:] if family is DistFamily.GAUSSIAN else params
        if any(v <= 0.0 for v in positive):
            raise InvalidSpec(f"{family.value} parameters {names} out of range: {params!r}")
        if self.components or self.weights:
            raise InvalidSpec(f"{family.value} spec cannot carry mixture components")
        object.__setattr__(self, "params", params)

    def _validate_mixture(self) -> None:
        comps = tuple(self.components)
        if not comps:
            raise InvalidSpec("mixture needs at least one component")
        if any(not isinstance(c, DistributionSpec) or c.family is DistFamily.MIXTURE for c in comps):
            raise InvalidSpec("mixture components must be non-mixture DistributionSpecs")
        try:
            weights = tuple(float(w) for w in self.weights)
        except (TypeError, ValueError):
            raise InvalidSpec(f"mixture weights must be numbers, got {self.weights!r}") from None
        if len(weights) != len(comps):
            raise InvalidSpec(f"mixture has {len(comps)} components but {len(weights)} weights")
        if any(not (math.isfinite(w) and w > 0.0) for w in weights):
            raise InvalidSpec(f"mixture weights must be positive, got {weights!r}")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise InvalidSpec(f"mixture weights must sum to 1, got {math.fsum(weights)!r}")
        if self.params:
            raise InvalidSpec("mixture spec takes components and weights, not params")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", weights)

    @property
    def is_mixture(self) -> bool:
        return self.family is DistFamily.MIXTURE

    @property
    def named_params(self) -> dict[str, float]:
        return dict(zip(PARAM_NAMES.get(self.family, ()), self.params))

    def describe(self) -> dict:
        out: dict = {"label": self.label, "family": self.family.value}
        if self.is_mixture:
            out["weights"] = list(self.weights)
            out["components"] = [c.describe() for c in self.components]
        else:
            out["params"] = self.named_params
        return out


def gaussian(mu: float, sigma: float, label: str = "") -> DistributionSpec:
    return DistributionSpec(DistFamily.GAUSSIAN, (mu, sigma), label)


def weibull(alpha: float, lam: float, label: str = "") -> DistributionSpec:
    return DistributionSpec(DistFamily.WEIBULL, (alpha, lam), label)


def beta(alpha: float, beta_: float, label: str = "") -> DistributionSpec:
    return DistributionSpec(DistFamily.BETA, (alpha, beta_), label)


def gamma(alpha: float, lam: float, label: str = "") -> DistributionSpec:
    return DistributionSpec(DistFamily.GAMMA, (alpha, lam), label)


def mixture(components: Sequence[DistributionSpec], weights: Sequence[float],
            label: str = "") -> DistributionSpec:
    return DistributionSpec(DistFamily.MIXTURE, (), label, tuple(components), tuple(weights))


_MIX_W = (0.6, 0.39, 0.01)


def builtin_specs() -> list[DistributionSpec]:
    """The twelve evaluation distributions, in reporting order."""
    return [
        gaussian(100, 10, "GaussianA"),
        gaussian(100, 50, "GaussianB"),
        weibull(4, 80, "WeibullA"),
        weibull(8, 80, "WeibullB"),
        beta(8, 0.25, "BetaA"),
        beta(8, 0.125, "BetaB"),
        gamma(100, 1, "GammaA"),
        gamma(150, 1, "GammaB"),
        mixture([gaussian(m, 10) for m in (5, 50, 100)], _MIX_W, "MixtureA"),
        mixture([gaussian(m, 50) for m in (50, 100, 400)], _MIX_W, "MixtureB"),
        mixture([weibull(4, lam) for lam in (5, 50, 100)], _MIX_W, "MixtureC"),
        mixture([weibull(8, lam) for lam in (5, 50, 100)], _MIX_W, "MixtureD"),
    ]


BUILTIN_NAMES = tuple(s.label for s in builtin_specs())


def spec_by_name(name: str) -> DistributionSpec:
    for spec in builtin_specs():
        if spec.label == name:
            return spec
    raise InvalidSpec(f"unknown distribution {name!r}; valid names: {', '.join(BUILTIN_NAMES)}")


# ── Distribution functions ──────────────────────────────────────────────────

def ccdf(spec: DistributionSpec, x):
    """P(X >= x) of the untruncated distribution; vectorized over x."""
    x = np.asarray(x, dtype=np.float64)
    fam = spec.family
    if fam is DistFamily.MIXTURE:
        out = sum(w * np.asarray(ccdf(c, x)) for c, w in zip(spec.components, spec.weights))
    elif fam is DistFamily.GAUSSIAN:
        mu, sigma = spec.params
        out = special.ndtr((mu - x) / sigma)
    else:
        a, b = spec.params
        pos = np.maximum(x, 0.0)
        with np.errstate(over="ignore", divide="ignore"):
            if fam is DistFamily.WEIBULL:
                out = np.exp(-np.power(pos / b, a))
            elif fam is DistFamily.GAMMA:
                out = special.gammaincc(a, b * pos)
            else:
                out = special.betainc(b, a, np.clip(1.0 - x, 0.0, 1.0))
        out = np.where(x <= 0.0, 1.0, out)
    out = np.asarray(out, dtype=np.float64)
    return float(out) if out.ndim == 0 else out


def mean(spec: DistributionSpec) -> float:
    """Analytic mean of the untruncated distribution."""
    fam = spec.family
    if fam is DistFamily.MIXTURE:
        return math.fsum(w * mean(c) for c, w in zip(spec.components, spec.weights))
    a, b = spec.params
    if fam is DistFamily.GAUSSIAN:
        return a
    if fam is DistFamily.WEIBULL:
        return b * math.gamma(1.0 + 1.0 / a)
    if fam is DistFamily.GAMMA:
        return a / b
    return a / (a + b)


def negative_mass(spec: DistributionSpec) -> float:
    """P(X < 0) under the untruncated distribution; nonzero only for Gaussian parts."""
    return 1.0 - float(ccdf(spec, 0.0))


# ── Quantiles ───────────────────────────────────────────────────────────────

def _check_p(p: float) -> float:
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise InvalidQuery(f"probability must be a number, got {p!r}") from None
    if not (0.0 < p < 1.0):
        raise InvalidQuery(f"probability must lie in (0, 1), got {p!r}")
    return p


def _log_gap(tail: float, log_p: float) -> float:
    return math.log(max(tail, _TINY)) - log_p


def _root(gap, lo: float, hi: float, what: str, **tol) -> float:
    """brentq on a sign-changing bracket; solver failures become BracketFailure."""
    try:
        return float(optimize.brentq(gap, lo, hi, rtol=config.QUANTILE_RTOL, **tol))
    except (RuntimeError, ValueError) as exc:
        raise BracketFailure(f"{what}: root solve failed on [{lo:g}, {hi:g}] ({exc})") from exc


def _beta_upper_gap(a: float, b: float, p: float) -> float:
    """y = 1 - x with P(X >= x) = p, solved in log y.

    The tail of a Beta with small second parameter sits within a few ulps
    of 1, where x itself cannot resolve it, and y can be as small as 1e-120.
    """
    log_p = math.log(p)

    def gap(t: float) -> float:
        return _log_gap(float(special.betainc(b, a, math.exp(t))), log_p)

    hi = math.log(0.5)
    if gap(hi) < 0.0:
        lo, hi = hi, 0.0
    else:
        lo = 2.0 * hi
        for _ in range(config.MAX_BRACKET_DOUBLINGS):
            if gap(lo) < 0.0:
                break
            hi, lo = lo, 2.0 * lo
        else:
            raise BracketFailure(f"Beta({a:g}, {b:g}): p={p:g} is below numeric resolution")
    return math.exp(_root(gap, lo, hi, f"Beta({a:g}, {b:g}) at p={p:g}", xtol=config.LOG_XTOL))


def _gamma_quantile(a: float, rate: float, p: float) -> float:
    log_p = math.log(p)

    def gap(x: float) -> float:
        return _log_gap(float(special.gammaincc(a, rate * x)), log_p)

    hi = max(a / rate, 1.0)
    for _ in range(config.MAX_BRACKET_DOUBLINGS):
        if gap(hi) < 0.0:
            break
        hi *= 2.0
    else:
        raise BracketFailure(f"Gamma({a:g}, {rate:g}): no bracket for p={p:g}")
    return _root(gap, 0.0, hi, f"Gamma({a:g}, {rate:g}) at p={p:g}", xtol=_TINY)


def true_quantile_analytic(spec: DistributionSpec, p: float) -> float:
    """x with P(X >= x) = p for a single-family distribution."""
    p = _check_p(p)
    fam = spec.family
    if fam is DistFamily.MIXTURE:
        raise InvalidSpec(f"{spec.label or 'mixture'}: use true_quantile_bisection for mixtures")
    a, b = spec.params
    if fam is DistFamily.GAUSSIAN:
        return float(a - b * special.ndtri(p))
    if fam is DistFamily.WEIBULL:
        return float(b * (-math.log(p)) ** (1.0 / a))
    if fam is DistFamily.GAMMA:
        return _gamma_quantile(a, b, p)
    return 1.0 - _beta_upper_gap(a, b, p)


def true_quantile_bisection(spec: DistributionSpec, p: float) -> float:
    """x with sum_j w_j P_j(X >= x) = p, by bracketing and bisection."""
    p = _check_p(p)
    if not spec.is_mixture:
        raise InvalidSpec(f"{spec.label or spec.family.value}: bisection path expects a mixture")
    log_p = math.log(p)

    def gap(x: float) -> float:
        return _log_gap(float(ccdf(spec, x)), log_p)

    hi = max(1.0, max(mean(c) for c in spec.components))
    for _ in range(config.MAX_BRACKET_DOUBLINGS):
        if gap(hi) < 0.0:
            break
        hi *= 2.0
    else:
        raise BracketFailure(f"{spec.label or 'mixture'}: no finite bracket for p={p:g}")

    lo = 0.0
    if gap(lo) < 0.0:
        # Gaussian components put mass below 0
        lo = -1.0
        for _ in range(config.MAX_BRACKET_DOUBLINGS):
            if gap(lo) >= 0.0:
                break
            lo *= 2.0
        else:
            raise BracketFailure(f"{spec.label or 'mixture'}: no lower bracket for p={p:g}")
    if gap(lo) == 0.0:
        return lo
    try:
        return float(optimize.bisect(gap, lo, hi, xtol=_TINY, rtol=config.BISECTION_RTOL, maxiter=2000))
    except (RuntimeError, ValueError) as exc:
        raise BracketFailure(f"{spec.label or 'mixture'}: bisection failed for p={p:g} ({exc})") from exc


def true_quantile(spec: DistributionSpec, p: float) -> float:
    if spec.is_mixture:
        return true_quantile_bisection(spec, p)
    return true_quantile_analytic(spec, p)


# ── Sampling ────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Draw:
    samples: SampleSet
    rejected: int


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _draw_component(spec: DistributionSpec, rng: np.random.Generator, n: int) -> tuple[np.ndarray, int]:
    fam = spec.family
    a, b = spec.params
    if fam is DistFamily.WEIBULL:
        return b * rng.weibull(a, n), 0
    if fam is DistFamily.GAMMA:
        return rng.gamma(a, 1.0 / b, n), 0
    if fam is DistFamily.BETA:
        return rng.beta(a, b, n), 0

    if float(ccdf(spec, 0.0)) <= 0.0:
        raise InvalidSpec(f"Gaussian({a:g}, {b:g}) has no mass at or above 0")
    vals = rng.normal(a, b, n)
    rejected = 0
    for _ in range(_MAX_REDRAW_ROUNDS):
        neg = np.flatnonzero(vals < 0.0)
        if neg.size == 0:
            return vals, rejected
        rejected += int(neg.size)
        vals[neg] = rng.normal(a, b, neg.size)
    raise InvalidSpec(f"Gaussian({a:g}, {b:g}): too few non-negative draws to fill the sample")


def draw(spec: DistributionSpec, n: int, seed: int) -> Draw:
    """n i.i.d. non-negative draws from spec; deterministic in (spec, n, seed)."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidParameter(f"sample size must be a positive integer, got {n!r}")
    if isinstance(seed, bool) or int(seed) != seed or seed < 0:
        raise InvalidParameter(f"seed must be a non-negative integer, got {seed!r}")
    n, seed = int(n), int(seed)
    rng = make_rng(seed)

    if spec.is_mixture:
        which = rng.choice(len(spec.components), size=n, p=np.asarray(spec.weights))
        vals = np.empty(n)
        rejected = 0
        for j, comp in enumerate(spec.components):
            slot = np.flatnonzero(which == j)
            if slot.size:
                part, rej = _draw_component(comp, rng, slot.size)
                vals[slot] = part
                rejected += rej
    else:
        vals, rejected = _draw_component(spec, rng, n)

    if rejected:
        logger.debug("%s: redrew %d negative values (seed=%d)", spec.label or spec.family.value, rejected, seed)
    logger.info("drew n=%d from %s (seed=%d)", n, spec.label or spec.family.value, seed)
    return Draw(SampleSet(np.sort(vals, kind="stable")), rejected)


def sample(spec: DistributionSpec, n: int, seed: int) -> SampleSet:
    return draw(spec, n, seed).samples
