import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kacgap import intensity as I
from kacgap.gap_process import GapRecord
from kacgap.sampling import parse_law
from kacgap.stats import (
    EmpiricalCDF,
    _fit_slope,
    cover_probability,
    double_cover_fraction,
    factorial_moments,
    gap_intensity_histogram,
    ks_distance,
    ks_two_sample,
    lkr_check,
    scaling_regression,
    toy_points,
)


# -- KS -----------------------------------------------------------------------

def test_ks_inverse_transform_sample(rng):
    c = I.c_star().value
    u = rng.random(10_000)
    # survival exp(-c s^4/4) inverted at 1 - u
    s = (-4 * np.log(u) / c) ** 0.25
    assert ks_distance(s, lambda v: I.min_gap_survival(v, c)) <= 1.63 / math.sqrt(10_000)


def test_ks_trivial_cases():
    c = I.c_star().value
    med = I.survival_median(c)
    assert ks_distance([med], lambda v: I.min_gap_survival(v, c)) == pytest.approx(0.5, abs=1e-12)
    assert ks_distance([0.3, 2.0, 7.0], lambda v: np.ones_like(v)) == 1.0
    with pytest.raises(ValueError):
        EmpiricalCDF([])


@given(st.lists(st.floats(0, 50), min_size=1, max_size=50), st.floats(1e-6, 1e-2))
def test_ks_in_unit_interval(xs, c):
    d = ks_distance(xs, lambda v: np.exp(-c * np.asarray(v) ** 4 / 4))
    assert 0.0 <= d <= 1.0


def test_ks_two_sample_identical():
    x = np.linspace(0, 1, 50)
    assert ks_two_sample(x, x) == 0.0
    assert ks_two_sample(x, x + 2) == 1.0


# -- factorial moments --------------------------------------------------------

def test_factorial_moments_trivial():
    r = factorial_moments([0] * 20, 3)
    assert r.empirical == [0, 0, 0]
    r = factorial_moments([2] * 7, 2)
    assert r.empirical == [2.0, 2.0]
    with pytest.raises(ValueError):
        factorial_moments([1], 5)


@given(st.lists(st.integers(0, 9), min_size=1, max_size=40))
def test_first_factorial_moment_is_mean(xs):
    assert factorial_moments(xs, 1).empirical[0] == pytest.approx(np.mean(xs), rel=1e-15)


def test_factorial_moments_poisson(rng):
    lam = 0.7
    x = rng.poisson(lam, 100_000)
    r = factorial_moments(x, 3, lam)
    for m, e, s, t in zip(r.orders, r.empirical, r.stderr, r.theory):
        assert s > 0
        assert t == pytest.approx(lam**m)
        assert abs(e - lam**m) <= 4 * s


# -- histogram ----------------------------------------------------------------

def _rec(n, gaps, trial=0):
    return GapRecord(trial, 0, n, "gaussian", 1.0, list(gaps), {}, 1.0, 0.0)


def test_histogram_zero_and_ratio():
    h = gap_intensity_histogram([_rec(100, []) for _ in range(5)], [(0, 1), (1, 2)], 10.0)
    assert h.pairs == [0, 0] and h.rate == [0.0, 0.0]
    assert h.theory[1] / h.theory[0] == pytest.approx(15.0, rel=1e-12)
    assert h.theory[0] == pytest.approx(I.c_star_K(10.0) / 4)


def test_histogram_totals_and_errors():
    recs = [_rec(100, [0.2, 0.9, 1.5, 4.0], 0), _rec(100, [1.0, 2.5], 1)]
    h = gap_intensity_histogram(recs, [(0, 1), (1, 2), (2, 3)], 10.0)
    assert h.pairs == [2, 2, 1]
    assert sum(h.pairs) == sum(1 for r in recs for g in r.gaps if 0 <= g < 3)
    assert h.rate == [1.0, 1.0, 0.5]
    with pytest.raises(ValueError, match="mix"):
        gap_intensity_histogram([_rec(100, []), _rec(200, [])], [(0, 1)], 10.0)


# -- scaling ------------------------------------------------------------------

def test_double_cover_fraction_vs_sampled_centres(rng):
    pts = toy_points(64, rng, width=0.05)
    eps, arc = 0.12, (0.3, 2.0)
    exact = double_cover_fraction(pts, eps, arc, 1.0)
    phi = np.linspace(*arc, 200_001)
    c = np.exp(1j * phi)
    inside = (np.abs(c[:, None] - pts[None, :]) <= eps).sum(axis=1)
    assert exact == pytest.approx(np.mean(inside >= 2), abs=1e-4)
    assert exact > 0


def test_cover_probability_band_average(rng):
    pts = toy_points(40, rng, width=0.05)
    band = (0.97, 1.03)
    p = cover_probability(pts, 0.1, (0.5, 2.5), band, nodes=400)
    # centres sampled by area in the polar band
    N = 40_000
    r = np.sqrt(band[0] ** 2 + rng.random(N) * (band[1] ** 2 - band[0] ** 2))
    c = r * np.exp(1j * rng.uniform(0.5, 2.5, N))
    mc = np.mean((np.abs(c[:, None] - pts[None, :]) <= 0.1).sum(axis=1) >= 2)
    assert p == pytest.approx(mc, abs=4 * math.sqrt(mc * (1 - mc) / N) + 1e-3)


def test_slope_invariant_under_doubling():
    radii = np.geomspace(1e-3, 1e-2, 5)
    probs = 3.0 * radii**4 * (1 + 0.05 * np.sin(np.arange(5)))
    hits = [10, 20, 40, 80, 160]
    a = _fit_slope(radii, probs, hits, 100, "toy", 10)
    b = _fit_slope(2 * radii, probs, hits, 100, "toy", 10)
    assert a.slope == pytest.approx(b.slope, rel=1e-12)
    assert a.slope == pytest.approx(4, abs=0.1)


def test_slope_zero_hits_error():
    with pytest.raises(ValueError, match="zero hits"):
        _fit_slope([1e-3, 2e-3, 4e-3], [0.0, 0.0, 1e-5], [0, 0, 3], 10, "roots", 10)


def test_scaling_range_error():
    with pytest.raises(ValueError, match="radii"):
        scaling_regression(None, 100, 1j, [1e-2, 0.5], 10, model="toy")


def test_toy_slope_four():
    n = 128
    r = scaling_regression(None, n, 1j, np.geomspace(n**-1.5, 0.25 / n, 5), 400, seed=5, model="toy",
                           arc_halfwidth=1.2, nodes=16)
    assert r.slope == pytest.approx(4, abs=0.4)


def test_root_model_is_steeper_than_toy():
    n = 128
    radii = np.geomspace(0.2 / n, 1.0 / n, 4)
    r = scaling_regression(parse_law("gaussian"), n, 1j, radii, 300, seed=5, arc_halfwidth=1.2, nodes=16)
    assert r.slope > 4.5


# -- anti-concentration -------------------------------------------------------

def test_lkr_single_term():
    r = lkr_check(parse_law("rademacher"), [1.0], 1.0, 2000, seed=1)
    assert r.max_prob <= 1.0
    assert r.max_prob == 1.0  # a ball of radius 1 at 0 holds both signs


def test_lkr_rademacher_400():
    r = lkr_check(parse_law("rademacher"), np.ones(400), 1.0, 40_000, seed=1)
    assert r.max_prob <= 5 / math.sqrt(400)
    # S is even, so the best unit ball, centred at an odd x, holds two atoms
    # of mass P[S = 0] ~ sqrt(2/(pi n)) each
    p0 = math.comb(400, 200) / 2**400
    assert p0 == pytest.approx(math.sqrt(2 / (math.pi * 400)), rel=1e-2)
    assert r.max_prob == pytest.approx(2 * p0, rel=0.05)


def test_lkr_decreasing_in_n():
    law = parse_law("gaussian")
    p = [lkr_check(law, np.ones(n), 1.0, 20_000, seed=2).max_prob for n in (100, 400, 1600)]
    se = 0.01
    assert p[1] <= p[0] + 2 * se and p[2] <= p[1] + 2 * se


def test_lkr_precondition():
    with pytest.raises(ValueError):
        lkr_check(parse_law("gaussian"), [0.5, 1.0], 1.0, 10)
    with pytest.raises(ValueError):
        lkr_check(parse_law("gaussian"), [1.0], 0.5, 10)
