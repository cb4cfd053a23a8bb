import math

import numpy as np
import pytest

from pwcet import config
from pwcet.bounds import (
    UNREACHABLE,
    BoundParams,
    GridSettings,
    Method,
    ParamGrid,
    build_pwcet_curve,
    estimate_wcet,
    eval_bound,
    invert_bound,
    make_bound_curve,
    restrict_params,
    tail_count,
)
from pwcet.empirical import Family, empirical_ccdf, load_samples, log_transform
from pwcet.errors import EmptyAdmissibleSet, InvalidParameter, InvalidQuery
from pwcet.synthetic import sample, spec_by_name, true_quantile


# ── Parameters and grids ────────────────────────────────────────────────────

def test_power_k_ignores_d():
    assert BoundParams(Family.POWER_K, 2.0, 7.0).d == 1.0
    assert BoundParams(Family.ATAN, 2.0, 7.0).d == 7.0


@pytest.mark.parametrize("k, d", [(0, 1), (-1, 1), (1, 0), (1, float("inf")), (float("nan"), 1)])
def test_bound_params_validation(k, d):
    with pytest.raises(InvalidParameter):
        BoundParams(Family.TANH, k, d)


@pytest.mark.parametrize("ks", [(), (1.0, 1.0), (2.0, 1.0), (0.0, 1.0)])
def test_param_grid_validation(ks):
    with pytest.raises(InvalidParameter):
        ParamGrid(ks)


def test_param_grid_order():
    grid = ParamGrid((1.0, 2.0), (10.0, 20.0))
    assert [(p.k, p.d) for p in grid.params(Family.ATAN)] == [(1, 10), (1, 20), (2, 10), (2, 20)]
    assert [(p.k, p.d) for p in grid.params(Family.POWER_K)] == [(1, 1), (2, 1)]


def test_grid_settings_defaults(weibull_samples):
    grid = GridSettings().resolve(weibull_samples)
    assert len(grid.k_values) == config.K_COUNT
    assert grid.k_values[0] == pytest.approx(config.K_MIN)
    assert grid.k_values[-1] == pytest.approx(config.K_MAX)
    assert len(grid.d_values) == config.D_COUNT
    assert grid.d_values[0] == pytest.approx(weibull_samples.median / 100)
    assert grid.d_values[-1] == pytest.approx(weibull_samples.maximum * 100)


def test_grid_settings_overrides(weibull_samples):
    grid = GridSettings(k_min=1, k_max=8, k_count=4, d_min=5, d_max=5, d_count=1).resolve(weibull_samples)
    assert grid.k_values == pytest.approx((1, 2, 4, 8))
    assert grid.d_values == (5.0,)


def test_grid_settings_zero_median():
    grid = GridSettings(k_count=2, d_count=3).resolve(load_samples([0.0, 0.0, 0.0, 4.0]))
    assert grid.d_values[0] == pytest.approx(4.0 / 100)


def test_grid_settings_all_zero():
    assert GridSettings().resolve(load_samples([0.0, 0.0])).d_values == (1.0,)


def test_grid_settings_bad_range(weibull_samples):
    with pytest.raises(InvalidParameter):
        GridSettings(k_min=8, k_max=1).resolve(weibull_samples)


# ── Single bounds ───────────────────────────────────────────────────────────

def test_markov_on_constant():
    curve = make_bound_curve(load_samples([3.0]), BoundParams(Family.POWER_K, 1))
    assert eval_bound(curve, 6.0) == pytest.approx(0.5)


def test_atan_at_sample_value_is_one():
    curve = make_bound_curve(load_samples([1.0, 1.0, 1.0]), BoundParams(Family.ATAN, 1, 1))
    assert eval_bound(curve, 1.0) == pytest.approx(1.0)


def test_power_k_direct_summation():
    curve = make_bound_curve(load_samples([1.0, 2.0, 3.0]), BoundParams(Family.POWER_K, 2))
    assert eval_bound(curve, 3.0) == pytest.approx((14 / 3) / 9, rel=1e-14)


def test_eval_clamps_to_one():
    curve = make_bound_curve(load_samples([10.0]), BoundParams(Family.POWER_K, 2))
    assert eval_bound(curve, 1.0) == 1.0


@pytest.mark.parametrize("b", [0.0, -1.0, float("inf"), float("nan")])
def test_eval_rejects_bad_b(b):
    curve = make_bound_curve(load_samples([1.0]), BoundParams(Family.POWER_K, 1))
    with pytest.raises(InvalidQuery):
        eval_bound(curve, b)


def test_invert_power_k():
    curve = make_bound_curve(load_samples([1.0]), BoundParams(Family.POWER_K, 1))
    assert invert_bound(curve, 0.5) == pytest.approx(2.0)


def test_invert_atan_saturation_boundary():
    curve = make_bound_curve(load_samples([1.0]), BoundParams(Family.ATAN, 1, 1))
    assert invert_bound(curve, 0.5) is UNREACHABLE


def test_invert_atan_forward_check():
    curve = make_bound_curve(load_samples([1.0]), BoundParams(Family.ATAN, 1, 1))
    b = invert_bound(curve, 0.9)
    assert b == pytest.approx(math.tan(math.pi / 4 / 0.9), rel=1e-12)
    assert eval_bound(curve, b) == pytest.approx(0.9, rel=1e-9)


def test_invert_tanh_unreachable_below_floor():
    curve = make_bound_curve(load_samples([1.0]), BoundParams(Family.TANH, 1, 1))
    assert curve.floor == pytest.approx(math.tanh(1.0))
    assert invert_bound(curve, 0.7) is UNREACHABLE
    assert isinstance(invert_bound(curve, 0.8), float)


@pytest.mark.parametrize("p", [0.0, 1.0, 1.5, -0.1])
def test_invert_rejects_bad_p(p):
    curve = make_bound_curve(load_samples([1.0]), BoundParams(Family.POWER_K, 1))
    with pytest.raises(InvalidQuery):
        invert_bound(curve, p)


def test_inversion_consistency(rng, weibull_samples):
    for _ in range(200):
        family = [Family.POWER_K, Family.ATAN, Family.TANH][int(rng.integers(0, 3))]
        params = BoundParams(family, float(rng.uniform(0.5, 60)), float(rng.uniform(5, 5000)))
        curve = make_bound_curve(weibull_samples, params)
        p = float(10 ** rng.uniform(-12, -0.5))
        b = invert_bound(curve, p)
        if b is UNREACHABLE:
            assert curve.floor >= p * (1 - 1e-12)
            continue
        assert eval_bound(curve, b) == pytest.approx(p, rel=1e-9)
        below = eval_bound(curve, b * (1 - 1e-6))
        assert below > p if family is Family.POWER_K else below >= p


def test_transforms_monotone_and_non_negative(rng):
    n = 10_000
    a = rng.uniform(0, 1000, n)
    a[:10] = 0.0
    b = a + rng.uniform(0, 1000, n)
    d, k = rng.uniform(0.01, 1000, n), rng.uniform(0.01, 100, n)
    for family in (Family.ATAN, Family.TANH):
        fa = np.exp(k * log_transform(a, family, d))
        fb = np.exp(k * log_transform(b, family, d))
        assert np.all(fa >= 0.0)
        assert np.all(fa <= fb)
        assert np.all(fa[:10] == 0.0)


def test_bounds_non_increasing_in_b(rng, weibull_samples):
    for _ in range(200):
        family = [Family.POWER_K, Family.ATAN, Family.TANH][int(rng.integers(0, 3))]
        params = BoundParams(family, float(rng.uniform(0.01, 100)), float(rng.uniform(0.01, 1000)))
        curve = make_bound_curve(weibull_samples, params)
        bs = np.sort(rng.uniform(1e-3, 1000, 50))
        assert np.all(np.diff(curve.log_evaluate(bs)) <= 0.0)
        lo, hi = float(bs[0]), float(bs[-1])
        assert 1.0 >= eval_bound(curve, lo) >= eval_bound(curve, hi) >= 0.0


def test_saturation_floors(weibull_samples):
    big = 1e12 * weibull_samples.maximum
    for family in (Family.ATAN, Family.TANH):
        curve = make_bound_curve(weibull_samples, BoundParams(family, 3.0, 50.0))
        assert eval_bound(curve, big) == pytest.approx(curve.floor, rel=1e-9)
    atan = make_bound_curve(weibull_samples, BoundParams(Family.ATAN, 3.0, 50.0))
    assert atan.floor == pytest.approx(atan.log_moment.value / (math.pi / 2) ** 3)


# ── Safeguard ───────────────────────────────────────────────────────────────

def test_restrict_identical_samples():
    grid = ParamGrid((0.5, 1.0, 8.0, 64.0))
    admitted = restrict_params(load_samples([1.0] * 4), grid, Family.POWER_K, 0.5)
    assert [p.k for p in admitted] == [0.5, 1.0, 8.0, 64.0]


def test_restrict_rejects_dominated_power():
    s = load_samples([1.0, 1.0, 1.0, 100.0])
    with pytest.raises(EmptyAdmissibleSet):
        restrict_params(s, ParamGrid((4.0,)), Family.POWER_K, 0.5)


def test_restrict_admits_saturated_tanh():
    s = load_samples([1.0, 1.0, 1.0, 100.0])
    admitted = restrict_params(s, ParamGrid((4.0,), (1.0,)), Family.TANH, 0.5)
    assert admitted == [BoundParams(Family.TANH, 4.0, 1.0)]
    share = 1.0 / (3 * math.tanh(1.0) ** 4 + 1.0)
    assert share == pytest.approx(0.498, abs=1e-3)


def test_restrict_screens_cartesian_product():
    s = load_samples([1.0, 1.0, 1.0, 100.0])
    admitted = restrict_params(s, ParamGrid((1.0, 4.0), (1.0, 1000.0)), Family.TANH, 0.5)
    # at d = 1000 tanh is nearly linear and the sample at 100 dominates for every k
    assert [(p.k, p.d) for p in admitted] == [(1.0, 1.0), (4.0, 1.0)]


def test_tail_count():
    assert [tail_count(n) for n in (1, 999, 1000, 1001, 100_000)] == [1, 1, 1, 2, 100]


def test_restrict_screens_top_tail_not_just_the_maximum():
    # n = 2000 screens the two largest samples together
    s = load_samples([1.0] * 1998 + [100.0, 100.0])
    admitted = restrict_params(s, ParamGrid((1.0, 1.5, 2.0)), Family.POWER_K, 0.5)
    assert [p.k for p in admitted] == [1.0]


def test_gaussian_memik_desk_scale_is_safe():
    spec = spec_by_name("GaussianA")
    s = sample(spec, config.DESK_N, 1)
    curve = build_pwcet_curve(s, Method.MEMIK, GridSettings().resolve(s))
    assert max(p.k for p in curve.params()) < 80
    for p in config.SYNTHETIC_PROBABILITIES:
        assert estimate_wcet(curve, p) >= true_quantile(spec, p)


@pytest.mark.parametrize("gamma", [0.0, 1.5, -0.1, "x"])
def test_restrict_rejects_bad_gamma(gamma):
    with pytest.raises(InvalidParameter):
        restrict_params(load_samples([1.0]), ParamGrid((1.0,)), Family.POWER_K, gamma)


def test_restrict_is_worker_independent(weibull_samples, small_grid):
    one = restrict_params(weibull_samples, small_grid, Family.ATAN, max_workers=1)
    four = restrict_params(weibull_samples, small_grid, Family.ATAN, max_workers=4)
    assert one == four


# ── Envelopes ───────────────────────────────────────────────────────────────

def test_constant_sample_envelope_uses_largest_k():
    c = 2.0
    curve = build_pwcet_curve(load_samples([c] * 10), Method.MEMIK, ParamGrid((1.0, 2.0, 4.0)))
    for b in (2.5, 4.0, 10.0):
        assert curve.envelope(b) == pytest.approx((c / b) ** 4, rel=1e-12)


@pytest.mark.parametrize("method", list(Method))
def test_envelope_dominates_empirical(method, rng):
    for _ in range(100):
        values = rng.gamma(float(rng.uniform(0.5, 20)), 10.0, size=int(rng.integers(1, 60)))
        s = load_samples(values)
        grid = GridSettings(k_count=8, d_count=6).resolve(s)
        curve = build_pwcet_curve(s, method, grid, fallback=True, max_workers=1)
        ccdf = empirical_ccdf(s)
        positive = ccdf.b > 0
        env = curve.envelope(ccdf.b[positive])
        assert np.all(env >= ccdf.p[positive] * (1 - 1e-12))


@pytest.mark.parametrize("method", list(Method))
def test_envelope_non_increasing(method, weibull_samples, small_grid):
    curve = build_pwcet_curve(weibull_samples, method, small_grid, fallback=True)
    env = curve.envelope(np.geomspace(1.0, 1e4, 400))
    assert np.all(np.diff(env) <= 0)


def test_envelope_equals_bruteforce(rng):
    s = load_samples(rng.weibull(2.0, 100) * 50)
    grid = ParamGrid(tuple(float(k) for k in range(1, 9)))
    curve = build_pwcet_curve(s, Method.MEMIK, grid, gamma=1.0)
    for b in np.geomspace(s.minimum, 10 * s.maximum, 20):
        brute = min(eval_bound(make_bound_curve(s, BoundParams(Family.POWER_K, k)), float(b))
                    for k in grid.k_values)
        assert curve.envelope(float(b)) == pytest.approx(brute, rel=1e-12)


@pytest.mark.parametrize("method", [Method.ATAN, Method.TANH])
def test_saturating_envelope_bruteforce(method, weibull_samples, small_grid):
    curve = build_pwcet_curve(weibull_samples, method, small_grid, gamma=1.0)
    for b in np.geomspace(10.0, 1e3, 20):
        brute = min(eval_bound(make_bound_curve(weibull_samples, p), float(b))
                    for p in small_grid.params(method.family))
        assert curve.envelope(float(b)) == pytest.approx(brute, rel=1e-12)


def test_near_linear_regime_matches_power_k(weibull_samples):
    top = weibull_samples.maximum
    grid = ParamGrid((1.0, 2.0, 4.0), (100 * top, 1000 * top))
    memik = build_pwcet_curve(weibull_samples, Method.MEMIK, grid, gamma=1.0)
    for method in (Method.ATAN, Method.TANH):
        curve = build_pwcet_curve(weibull_samples, method, grid, gamma=1.0)
        b = np.linspace(weibull_samples.minimum, top, 50)
        assert curve.envelope(b) == pytest.approx(memik.envelope(b), rel=0.02)


def test_estimate_single_curve():
    curve = build_pwcet_curve(load_samples([1.0]), Method.MEMIK, ParamGrid((1.0,)), gamma=1.0)
    value, params = curve.estimate(0.5)
    assert value == pytest.approx(2.0)
    assert params == BoundParams(Family.POWER_K, 1.0)


def test_estimate_unreachable():
    curve = build_pwcet_curve(load_samples([1.0]), Method.ATAN, ParamGrid((1.0,), (1.0,)), gamma=1.0)
    assert estimate_wcet(curve, 0.4) is UNREACHABLE
    assert curve.estimate(0.4) == (UNREACHABLE, None)


def test_estimate_matches_per_k_closed_forms(weibull_samples):
    grid = ParamGrid((1.0, 2.0, 4.0, 8.0))
    curve = build_pwcet_curve(weibull_samples, Method.MEMIK, grid, gamma=1.0)
    brute = min(invert_bound(make_bound_curve(weibull_samples, BoundParams(Family.POWER_K, k)), 1e-5)
                for k in grid.k_values)
    assert estimate_wcet(curve, 1e-5) == pytest.approx(brute, rel=1e-12)


@pytest.mark.parametrize("method", list(Method))
def test_estimate_is_envelope_infimum(method, weibull_samples, small_grid):
    curve = build_pwcet_curve(weibull_samples, method, small_grid, fallback=True)
    p = 1e-3
    est = estimate_wcet(curve, p)
    assert isinstance(est, float)
    assert curve.envelope(est) == pytest.approx(p, rel=1e-9)
    scan = np.linspace(est * 0.5, est * (1 - 1e-6), 500)
    assert np.all(curve.envelope(scan) > p)


def test_estimate_non_increasing_in_p(weibull_samples, small_grid):
    curve = build_pwcet_curve(weibull_samples, Method.ATAN, small_grid, fallback=True)
    values = [estimate_wcet(curve, p) for p in (1e-2, 1e-5, 1e-10, 1e-15)]
    finite = [v for v in values if v is not UNREACHABLE]
    # the saturating floor can only cut off the smallest probabilities
    assert finite and values[:len(finite)] == finite
    assert all(v is UNREACHABLE for v in values[len(finite):])
    assert all(a <= b for a, b in zip(finite, finite[1:]))


def test_tie_break_prefers_smallest_k_then_d():
    # all-zero samples: every bound inverts to b = 0
    s = load_samples([0.0, 0.0])
    curve = build_pwcet_curve(s, Method.ATAN, ParamGrid((1.0, 2.0), (3.0, 5.0)), gamma=1.0)
    assert curve.estimate(0.5) == (0.0, BoundParams(Family.ATAN, 1.0, 3.0))


def test_largest_k_wins_on_unit_samples():
    # E(X^k) = 1 for every k, so b = p^(-1/k) shrinks with k
    curve = build_pwcet_curve(load_samples([1.0]), Method.MEMIK, ParamGrid((1.0, 2.0)), gamma=1.0)
    value, params = curve.estimate(0.5)
    assert value == pytest.approx(math.sqrt(2.0))
    assert params.k == 2.0


def test_fallback_keeps_smallest_k():
    s = load_samples([1.0, 1.0, 1.0, 100.0])
    grid = ParamGrid((4.0, 8.0))
    with pytest.raises(EmptyAdmissibleSet):
        build_pwcet_curve(s, Method.MEMIK, grid)
    curve = build_pwcet_curve(s, Method.MEMIK, grid, fallback=True)
    assert curve.fallback
    assert [p.k for p in curve.params()] == [4.0]


def test_curve_provenance(weibull_samples, small_grid):
    curve = build_pwcet_curve(weibull_samples, Method.TANH, small_grid, fallback=True)
    assert curve.provenance == weibull_samples.digest()
    assert curve.grid_size == 12


def test_worker_count_does_not_change_curve(weibull_samples, small_grid):
    a = build_pwcet_curve(weibull_samples, Method.ATAN, small_grid, fallback=True, max_workers=1)
    b = build_pwcet_curve(weibull_samples, Method.ATAN, small_grid, fallback=True, max_workers=3)
    assert a.params() == b.params()
    assert a.estimate(1e-9) == b.estimate(1e-9)
