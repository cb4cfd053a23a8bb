import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from pwcet.bounds import BoundParams
from pwcet.empirical import (
    EmpiricalCcdf,
    Family,
    SampleSet,
    empirical_ccdf,
    empirical_quantile,
    exceedance,
    load_samples,
    log_transform,
    moment_power_k,
    moment_transformed,
)
from pwcet.errors import EmptyInput, InputError, InvalidParameter, InvalidQuery, NegativeValue, NonFinite


# ── load_samples / SampleSet ────────────────────────────────────────────────

def test_load_samples_sorts():
    s = load_samples([3.0, 1.0, 2.0])
    assert s.values.tolist() == [1.0, 2.0, 3.0]
    assert s.n == 3


def test_singleton():
    s = load_samples([5.0])
    assert s.values.tolist() == [5.0]
    assert (s.minimum, s.maximum, s.median) == (5.0, 5.0, 5.0)


@pytest.mark.parametrize(
    "raw, exc",
    [
        ([], EmptyInput),
        ([1.0, -0.1], NegativeValue),
        ([1.0, float("nan")], NonFinite),
        ([float("inf")], NonFinite),
    ],
)
def test_load_samples_rejects(raw, exc):
    with pytest.raises(exc):
        load_samples(raw)


def test_negative_message_names_position():
    with pytest.raises(NegativeValue, match="#3"):
        load_samples([1.0, 2.0, -3.0])


def test_errors_are_value_errors():
    with pytest.raises(ValueError):
        load_samples([])


def test_sampleset_requires_sorted_values():
    with pytest.raises(InputError):
        SampleSet(np.array([2.0, 1.0]))


def test_sampleset_is_read_only():
    s = load_samples([1.0, 2.0])
    with pytest.raises(ValueError):
        s.values[0] = 5.0


def test_sampleset_digest_and_equality():
    a = load_samples([2.0, 1.0, 3.0])
    b = load_samples([1.0, 3.0, 2.0])
    assert a == b
    assert hash(a) == hash(b)
    assert a.digest() == b.digest()
    assert a.digest() != load_samples([1.0, 2.0, 3.5]).digest()


def test_zero_samples_allowed():
    s = load_samples([0.0, 0.0, 1.0])
    assert s.minimum == 0.0


# ── Empirical CCDF ──────────────────────────────────────────────────────────

def _exact_points(ccdf: EmpiricalCcdf):
    return [(b, Fraction(p).limit_denominator(10**6)) for b, p in ccdf.points]


def test_ccdf_counts():
    ccdf = empirical_ccdf(load_samples([1.0, 2.0, 3.0]))
    assert _exact_points(ccdf) == [(1.0, 1), (2.0, Fraction(2, 3)), (3.0, Fraction(1, 3))]


def test_ccdf_singleton():
    assert empirical_ccdf(load_samples([5.0])).points == [(5.0, 1.0)]


def test_ccdf_keeps_multiplicity():
    ccdf = empirical_ccdf(load_samples([2.0, 2.0, 4.0]))
    assert _exact_points(ccdf) == [(2.0, 1), (4.0, Fraction(1, 3))]


def test_ccdf_matches_bruteforce(rng):
    values = rng.integers(0, 20, size=200).astype(float)
    s = load_samples(values)
    for b, p in empirical_ccdf(s).points:
        assert p == sum(1 for x in values if x >= b) / len(values)


def test_ccdf_non_increasing_and_max_multiplicity(weibull_samples):
    ccdf = empirical_ccdf(weibull_samples)
    assert np.all(np.diff(ccdf.p) < 0)
    assert ccdf.p[-1] == np.count_nonzero(weibull_samples.values == weibull_samples.maximum) / weibull_samples.n


def test_exceedance_uses_closed_inequality():
    s = load_samples([1.0, 2.0, 2.0, 3.0])
    assert exceedance(s, [0.5, 2.0, 2.5, 3.0, 4.0]).tolist() == [1.0, 0.75, 0.25, 0.25, 0.0]


def test_empirical_quantile():
    s = load_samples(np.arange(1.0, 11.0))
    assert empirical_quantile(s, 0.1) == 9.0
    assert empirical_quantile(s, 0.05) == 10.0
    assert empirical_quantile(s, 0.5) == 5.0


def test_empirical_quantile_exact_multiple():
    n = 10**6
    s = SampleSet(np.arange(n, dtype=float))
    # 10 observations may lie strictly above the quantile
    assert empirical_quantile(s, 1e-5) == float(n - 11)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.5, float("nan")])
def test_empirical_quantile_rejects(p):
    with pytest.raises(InvalidQuery):
        empirical_quantile(load_samples([1.0]), p)


# ── Moments ─────────────────────────────────────────────────────────────────

def test_moment_power_k_small():
    m = moment_power_k(load_samples([1.0, 2.0, 3.0]), 2)
    assert m.value == pytest.approx(14.0 / 3.0, rel=1e-14)


@pytest.mark.parametrize("k", [0.5, 1.0, 7.0, 100.0])
def test_moment_of_constant(k):
    c = 3.7
    m = moment_power_k(load_samples([c] * 5), k)
    assert m.log_value == pytest.approx(k * math.log(c), rel=1e-13)


def test_moment_large_k_against_mpmath():
    m = moment_power_k(load_samples([1e3, 1e4]), 100)
    exact = (mpmath.mpf(1e3) ** 100 + mpmath.mpf(1e4) ** 100) / 2
    assert float(abs(mpmath.exp(mpmath.mpf(m.log_value)) / exact - 1)) < 1e-10
    assert math.isinf(m.value)


def test_moment_random_sets_against_mpmath(rng):
    mpmath.mp.dps = 50
    for _ in range(200):
        n = int(rng.integers(1, 33))
        k = float(rng.uniform(0.1, 64.0))
        values = rng.uniform(0.0, 1000.0, size=n)
        values[rng.random(n) < 0.1] = 0.0
        if not np.any(values > 0):
            values[0] = 1.0
        m = moment_power_k(load_samples(values), k)
        exact = mpmath.fsum(mpmath.mpf(float(x)) ** k for x in values) / n
        assert float(abs(mpmath.exp(mpmath.mpf(m.log_value)) / exact - 1)) < 1e-10


def test_moment_transformed_random_sets_against_mpmath(rng):
    mpmath.mp.dps = 50
    for family, fn in ((Family.ATAN, mpmath.atan), (Family.TANH, mpmath.tanh)):
        for _ in range(50):
            n = int(rng.integers(1, 33))
            k = float(rng.uniform(0.1, 64.0))
            d = float(rng.uniform(0.5, 500.0))
            values = rng.uniform(0.0, 1000.0, size=n)
            m = moment_transformed(load_samples(values), BoundParams(family, k, d))
            exact = mpmath.fsum(fn(mpmath.mpf(float(x)) / d) ** k for x in values) / n
            assert float(abs(mpmath.exp(mpmath.mpf(m.log_value)) / exact - 1)) < 1e-10


def test_moment_bounded_by_extremes(weibull_samples):
    for k in (0.5, 3.0, 40.0):
        lv = moment_power_k(weibull_samples, k).log_value
        assert k * math.log(weibull_samples.minimum) <= lv <= k * math.log(weibull_samples.maximum)


def test_zero_samples_contribute_nothing():
    m = moment_power_k(load_samples([0.0, 2.0]), 3)
    assert m.value == pytest.approx(4.0)
    assert moment_power_k(load_samples([0.0, 0.0]), 3).log_value == -math.inf


def test_atan_moment_of_ones():
    m = moment_transformed(load_samples([1.0, 1.0, 1.0]), BoundParams(Family.ATAN, 1, 1))
    assert m.value == pytest.approx(math.pi / 4, rel=1e-14)


def test_tanh_moment_of_zero():
    m = moment_transformed(load_samples([0.0]), BoundParams(Family.TANH, 3, 2))
    assert m.value == 0.0


def test_tanh_moment_of_one():
    m = moment_transformed(load_samples([1.0]), BoundParams(Family.TANH, 1, 1))
    assert m.value == pytest.approx(float(mpmath.tanh(1)), rel=1e-14)


def test_saturating_moments_below_supremum(weibull_samples):
    for k in (1.0, 10.0, 100.0):
        atan = moment_transformed(weibull_samples, BoundParams(Family.ATAN, k, 1.0))
        tanh = moment_transformed(weibull_samples, BoundParams(Family.TANH, k, 1e4))
        assert atan.log_value < k * math.log(math.pi / 2)
        assert tanh.log_value < 0.0


def test_moment_monotone_in_each_sample(rng):
    values = rng.uniform(1.0, 100.0, size=20)
    params = BoundParams(Family.ATAN, 5.0, 30.0)
    base = moment_transformed(load_samples(values), params).log_value
    for i in range(values.size):
        bigger = values.copy()
        bigger[i] *= 1.5
        assert moment_transformed(load_samples(bigger), params).log_value >= base


@pytest.mark.parametrize("k", [0.0, -1.0, float("inf"), float("nan"), "two"])
def test_moment_rejects_bad_k(k):
    with pytest.raises(InvalidParameter):
        moment_power_k(load_samples([1.0]), k)


def test_log_transform_rejects_unknown_family():
    with pytest.raises(InvalidParameter):
        log_transform(np.array([1.0]), "SQUARE")
