import math

import numpy as np
import pytest

from gen import random_dataset
from qlbounds import lp
from qlbounds.counterfactual import (
    ExpenditureConstraint,
    bound_curve,
    epsilon_sweep,
    halfspace_system,
    hull_margin,
    member,
    quantity_bounds,
    quantity_program,
    upper_bound_finite,
)
from qlbounds.model import CandidatePoint, Dataset, OracleCapError, augment
from qlbounds.rationality import epsilon_star_lp

SINGLE = Dataset.single_good([2.0], [1.0])
PAIR = Dataset.single_good([2.0, 1.0], [1.0, 2.0])


def test_member_inside():
    assert member(PAIR, 0.0, CandidatePoint([1.5], [1.5]))


def test_member_outside():
    assert not member(PAIR, 0.0, CandidatePoint([3.0], [1.5]))


def test_member_duplicate_row_keeps_error():
    rng = np.random.default_rng(0)
    d = random_dataset(rng, 4, 2)
    star = epsilon_star_lp(d)
    point = CandidatePoint(d.quantities[2], d.prices[2])
    assert member(d, star, point)
    assert epsilon_star_lp(augment(d, point)) == pytest.approx(star, abs=1e-7)


def test_bounds_single_observation_higher_price():
    b = quantity_bounds(SINGLE, [2.0], eps=0.0)
    assert (b.lower, b.upper) == pytest.approx((0.0, 2.0), abs=1e-9)


def test_bounds_between_two_prices():
    b = quantity_bounds(PAIR, [1.5], eps=0.0)
    assert (b.lower, b.upper) == pytest.approx((1.0, 2.0), abs=1e-9)


def test_bounds_at_the_only_price_are_unbounded_above():
    b = quantity_bounds(SINGLE, [1.0], eps=0.0)
    assert b.lower == pytest.approx(0.0, abs=1e-12) and b.upper == math.inf


def test_bounds_agree_with_halfspaces_on_examples():
    for d, p in ((SINGLE, 2.0), (PAIR, 1.5), (SINGLE, 1.0)):
        a = quantity_bounds(d, [p], eps=0.0)
        b = halfspace_system(d, 0.0, [p]).extrema(0)
        assert a.lower == pytest.approx(b.lower, abs=1e-9)
        assert a.upper == pytest.approx(b.upper, abs=1e-9)


def test_halfspace_count_two_observations():
    system = halfspace_system(PAIR, 0.0, [1.5])
    assert len(system) == 4
    assert sorted(system.sequences) == [(0,), (0, 1), (1,), (1, 0)]


def test_halfspace_cap_refusal():
    with pytest.raises(OracleCapError):
        halfspace_system(random_dataset(np.random.default_rng(0), 8, 1), 10.0, [1.0])


def test_halfspace_membership_matches_member():
    rng = np.random.default_rng(1)
    for _ in range(40):
        d = random_dataset(rng, 3, 2)
        eps = epsilon_star_lp(d) + 0.1
        p = rng.uniform(0.5, 2.0, 2)
        system = halfspace_system(d, eps, p)
        x = rng.uniform(0, 3, 2)
        margin = np.min(system.offsets - system.normals @ x)
        if abs(margin) > 1e-6:
            assert system.contains(x) == member(d, eps, CandidatePoint(x, p))


@pytest.mark.parametrize(
    "prices,target,expected",
    [([[1.0, 1.0]], [2.0, 2.0], True), ([[1.0, 1.0]], [1.0, 1.0], False), ([[1.0, 3.0], [3.0, 1.0]], [2.1, 2.1], True)],
)
def test_upper_bound_finite_examples(prices, target, expected):
    d = Dataset(prices, np.ones_like(np.asarray(prices)))
    assert upper_bound_finite(d, target) is expected


def test_hull_margin_sign():
    assert hull_margin([[1.0, 3.0], [3.0, 1.0]], [2.0, 2.0]) == pytest.approx(0.0, abs=1e-12)
    assert hull_margin([[1.0, 3.0], [3.0, 1.0]], [1.5, 1.5]) < 0


def test_infeasible_below_minimal_error():
    two_cycle = Dataset.single_good([1.0, 2.0], [1.0, 2.0])
    assert quantity_bounds(two_cycle, [1.5], eps=0.4).status == "Infeasible"
    assert quantity_bounds(two_cycle, [1.5], eps=0.5).status == "Feasible"
    assert quantity_bounds(two_cycle, [1.5]).status == "Feasible"


def test_invalid_arguments_raise():
    with pytest.raises(ValueError):
        quantity_bounds(PAIR, [1.5], good=1)
    with pytest.raises(ValueError):
        quantity_bounds(PAIR, [0.0])
    with pytest.raises(ValueError):
        quantity_bounds(PAIR, [1.0, 1.0])


def test_monotone_in_eps_and_lower_nonnegative():
    rng = np.random.default_rng(2)
    for _ in range(40):
        d = random_dataset(rng, int(rng.integers(1, 6)), int(rng.integers(1, 3)))
        p = rng.uniform(0.5, 2.0, d.K)
        star = epsilon_star_lp(d)
        rows = epsilon_sweep(d, p, [star, star + 0.05, star + 0.5])
        for (_, a), (_, b) in zip(rows, rows[1:]):
            assert b.upper >= a.upper - 1e-7
            assert b.lower <= a.lower + 1e-7
        for _, b in rows:
            assert 0.0 <= b.lower < math.inf


def test_bound_curve_single_good_is_nonincreasing():
    d = Dataset.single_good([3.0, 2.0, 2.5, 1.0], [1.0, 1.5, 2.0, 3.0])
    curve = bound_curve(d, [[p] for p in np.linspace(0.8, 3.5, 30)])
    for a, b in zip(curve, curve[1:]):
        assert b.upper <= a.upper + 1e-7 and b.lower <= a.lower + 1e-7


def test_expenditure_limits_shrink_bounds():
    d = Dataset([[1.0, 2.0], [2.0, 1.0]], [[2.0, 1.0], [1.0, 2.0]])
    p = [1.5, 1.5]
    free = quantity_bounds(d, p)
    capped = quantity_bounds(d, p, extra=ExpenditureConstraint(m_high=3.0))
    assert capped.upper <= 3.0 / 1.5 + 1e-9
    assert capped.upper <= free.upper + 1e-9
    boxed = quantity_bounds(d, p, good=1, extra=ExpenditureConstraint(box_high=(0.5, 10.0)))
    assert boxed.feasible
    impossible = quantity_bounds(d, p, extra=ExpenditureConstraint(m_low=100.0, box_high=(1.0, 1.0)))
    assert impossible.status == "Infeasible"


def test_program_solution_is_a_member():
    rng = np.random.default_rng(3)
    for _ in range(20):
        d = random_dataset(rng, 4, 2)
        star = epsilon_star_lp(d)
        p = rng.uniform(0.5, 2.0, 2)
        prog = quantity_program(d, star, p, 0)
        out = lp.solve_min(prog)
        x = out.solution[: d.K]
        assert member(d, star, CandidatePoint(np.maximum(x, 0.0), p))
