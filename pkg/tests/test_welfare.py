import math

import numpy as np
import pytest

from gen import consistent_single_good, off_dataset_bundle, random_dataset
from qlbounds.model import Dataset, OracleCapError
from qlbounds.rationality import epsilon_star_lp
from qlbounds.welfare import (
    FINITE_GUARANTEED,
    INFINITE_GUARANTEED,
    WelfareQuery,
    h_function,
    indirect_diff_bounds,
    surplus_integral,
    utility_diff_bounds,
    utility_diff_lower_sequences,
    utility_diff_upper_sequences,
)

SINGLE = Dataset.single_good([2.0], [1.0])
PAIR = Dataset.single_good([2.0, 1.0], [1.0, 2.0])


def test_utility_upper_one_step():
    assert utility_diff_bounds(SINGLE, [3.0], [2.0], eps=0.0).upper == pytest.approx(1.0, abs=1e-9)


def test_utility_upper_grows_with_eps():
    assert utility_diff_bounds(SINGLE, [3.0], [2.0], eps=0.25).upper == pytest.approx(1.25, abs=1e-9)


def test_utility_upper_off_dataset_is_infinite():
    b = utility_diff_bounds(SINGLE, [3.0], [5.0], eps=0.0)
    assert b.upper == math.inf and b.lower == -math.inf


def test_utility_lower_needs_observed_first_bundle():
    b = utility_diff_bounds(SINGLE, [2.0], [3.0], eps=0.0)
    assert b.lower == pytest.approx(-1.0, abs=1e-9) and b.upper == math.inf


def test_utility_same_bundle_is_zero():
    b = utility_diff_bounds(PAIR, [1.5], [1.5], eps=0.1)
    assert (b.lower, b.upper) == (0.0, 0.0)


def test_utility_below_minimal_error_is_infeasible():
    two_cycle = Dataset.single_good([1.0, 2.0], [1.0, 2.0])
    assert utility_diff_bounds(two_cycle, [1.0], [3.0], eps=0.3).status == "Infeasible"


def test_upper_sequences_single_observation():
    s = utility_diff_upper_sequences(SINGLE, 0.2, [3.0], 0)
    assert s.value == pytest.approx(1.2) and s.sequence == (0,)


def test_upper_sequences_two_observations():
    s = utility_diff_upper_sequences(PAIR, 0.0, [1.0], 0)
    assert s.value == pytest.approx(-1.0)


def test_sequence_oracles_refuse_beyond_cap():
    d = random_dataset(np.random.default_rng(0), 9, 1)
    with pytest.raises(OracleCapError):
        utility_diff_upper_sequences(d, 5.0, [1.0], 0)
    with pytest.raises(OracleCapError):
        h_function(d, 5.0, 0, [1.0])


def test_utility_bounds_match_sequences():
    rng = np.random.default_rng(1)
    for _ in range(40):
        d = random_dataset(rng, int(rng.integers(1, 6)), int(rng.integers(1, 3)))
        eps = epsilon_star_lp(d) + float(rng.choice([0.0, 0.2]))
        s = int(rng.integers(d.T))
        x = off_dataset_bundle(rng, d)
        upper = utility_diff_bounds(d, x, d.quantities[s], eps).upper
        lower = utility_diff_bounds(d, d.quantities[s], x, eps).lower
        assert upper == pytest.approx(utility_diff_upper_sequences(d, eps, x, s).value, abs=1e-6)
        assert lower == pytest.approx(utility_diff_lower_sequences(d, eps, s, x).value, abs=1e-6)


def test_utility_antisymmetry():
    rng = np.random.default_rng(2)
    for _ in range(30):
        d = random_dataset(rng, 4, 2)
        eps = epsilon_star_lp(d) + 0.1
        a, b = d.quantities[0], d.quantities[3]
        assert utility_diff_bounds(d, a, b, eps).upper == pytest.approx(-utility_diff_bounds(d, b, a, eps).lower, abs=1e-7)


def test_utility_upper_strictly_increasing_in_bundle():
    rng = np.random.default_rng(3)
    for _ in range(30):
        d = random_dataset(rng, 4, 2)
        eps = epsilon_star_lp(d)
        x = off_dataset_bundle(rng, d)
        base = utility_diff_bounds(d, x, d.quantities[0], eps).upper
        for k in range(2):
            bumped = x.copy()
            bumped[k] += 0.05
            assert utility_diff_bounds(d, bumped, d.quantities[0], eps).upper > base


def test_welfare_equals_h_at_zero_error():
    b = indirect_diff_bounds(SINGLE, [1.0], [2.0], eps=0.0)
    assert b.upper == pytest.approx(2.0, abs=1e-9)


def test_welfare_within_sandwich():
    h = h_function(SINGLE, 0.1, 0, [2.0]).value
    assert h == pytest.approx(2.1)
    upper = indirect_diff_bounds(SINGLE, [1.0], [2.0], eps=0.1).upper
    assert h - 0.1 - 1e-7 <= upper <= h + 0.1 + 1e-7


def test_h_function_examples():
    assert h_function(SINGLE, 0.0, 0, [2.0]).value == pytest.approx(2.0)
    assert h_function(SINGLE, 0.3, 0, [2.0]).value == pytest.approx(2.3)


def test_equal_prices_give_symmetric_eps_interval():
    rng = np.random.default_rng(4)
    for _ in range(20):
        d = random_dataset(rng, 4, 2)
        eps = epsilon_star_lp(d) + float(rng.uniform(0, 0.3))
        p = rng.uniform(0.5, 2.0, 2)
        b = indirect_diff_bounds(d, p, p, eps)
        assert b.upper == pytest.approx(eps, abs=1e-7) and b.lower == pytest.approx(-eps, abs=1e-7)


def test_welfare_query_object_and_flags():
    b = WelfareQuery(np.array([1.0]), np.array([2.0]), 0.0).bounds(SINGLE)
    assert b.flags == ("upper: " + FINITE_GUARANTEED, "lower: " + FINITE_GUARANTEED)
    low = indirect_diff_bounds(SINGLE, [0.5], [2.0], eps=0.0)
    assert low.upper == math.inf
    assert low.flags[0] == "upper: " + INFINITE_GUARANTEED


def test_welfare_antisymmetry_and_eps_monotonicity():
    rng = np.random.default_rng(5)
    for _ in range(30):
        d = random_dataset(rng, 4, 2)
        star = epsilon_star_lp(d)
        p1, p0 = d.prices[1], rng.uniform(0.5, 2.0, 2)
        forward = indirect_diff_bounds(d, p1, p0, star)
        backward = indirect_diff_bounds(d, p0, p1, star)
        assert forward.upper == pytest.approx(-backward.lower, abs=1e-7)
        wider = indirect_diff_bounds(d, p1, p0, star + 0.2)
        assert wider.upper >= forward.upper - 1e-7 and wider.lower <= forward.lower + 1e-7


def test_welfare_upper_convex_and_decreasing_in_new_price():
    rng = np.random.default_rng(6)
    d = random_dataset(rng, 5, 2, price=(1.0, 2.0))
    star = epsilon_star_lp(d)
    p0 = np.array([1.5, 1.5])
    grid = np.linspace(1.6, 2.4, 9)
    values = np.array([[indirect_diff_bounds(d, [a, b], p0, star).upper for b in grid] for a in grid])
    assert np.all(np.isfinite(values))
    assert np.all(np.diff(values, axis=0) <= 1e-7) and np.all(np.diff(values, axis=1) <= 1e-7)
    assert np.all(values[1:-1, :] <= 0.5 * (values[:-2, :] + values[2:, :]) + 1e-7)
    assert np.all(values[:, 1:-1] <= 0.5 * (values[:, :-2] + values[:, 2:]) + 1e-7)


def test_surplus_integral_price_rise_uses_lower_bound():
    # the upper welfare bound for a rise from 2 to 3 is 0; the lower one is -2
    b = indirect_diff_bounds(SINGLE, [3.0], [2.0], eps=0.0)
    assert b.upper == pytest.approx(0.0, abs=1e-9)
    assert b.lower == pytest.approx(-2.0, abs=1e-9)
    assert surplus_integral(SINGLE, 3.0, 2.0) == pytest.approx(b.upper, abs=1e-9)


def test_surplus_integral_zero_length():
    assert surplus_integral(PAIR, 1.5, 1.5) == 0.0


def test_surplus_integral_two_observations():
    n = 10_000
    b = indirect_diff_bounds(PAIR, [2.0], [1.2], eps=0.0)
    assert b.upper == pytest.approx(-0.8, abs=1e-9)
    value = surplus_integral(PAIR, 2.0, 1.2, n)
    assert value == pytest.approx(b.upper, abs=2 / n * 1.0)


def test_surplus_integral_price_fall_matches_upper():
    rng = np.random.default_rng(7)
    for _ in range(5):
        d = consistent_single_good(rng, 4)
        lo, hi = float(d.prices.min()), float(d.prices.max())
        p1 = float(rng.uniform(lo + 0.01, hi))
        p0 = p1 + float(rng.uniform(0.1, 1.0))
        v = indirect_diff_bounds(d, [p1], [p0], eps=0.0).upper
        assert surplus_integral(d, p1, p0) == pytest.approx(v, abs=1e-3)


def test_surplus_integral_preconditions():
    with pytest.raises(ValueError):
        surplus_integral(Dataset.single_good([1.0, 2.0], [1.0, 2.0]), 1.5, 2.0)
    with pytest.raises(ValueError):
        surplus_integral(SINGLE, 0.5, 0.8)
    with pytest.raises(ValueError):
        surplus_integral(Dataset([[1.0, 1.0]], [[1.0, 1.0]]), 2.0, 3.0)
