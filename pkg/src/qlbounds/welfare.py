"""Welfare bounds: utility differences between bundles and indirect-utility
differences between prices.

Both are programs over utility levels at the observations plus one or two
hypothetical points.  Closed-form sequence minimizations (``*_sequences`` and
``h_function``) serve as oracles for small datasets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import lp
from .counterfactual import hull_margin, quantity_bounds
from .model import (
    BoundInterval,
    Dataset,
    bundles_equal,
    check_bundle,
    check_price,
    compact,
    matching_rows,
    require_valid,
)
from .rationality import RATIONALIZABLE_TOL, afriat_rows, epsilon_star_lp, resolve_epsilon
from .sequences import DEFAULT_CAP, acyclic_paths, check_cap, edge_weights

CONSISTENT_TOL = 1e-9

FINITE_GUARANTEED = "finite guaranteed"
INFINITE_GUARANTEED = "infinite guaranteed"
OUTSIDE_REGION = "outside guaranteed-finite region"


@dataclass(frozen=True)
class SequenceBound:
    """Extremal value of a sequence formula and one sequence attaining it."""

    value: float
    sequence: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class WelfareQuery:
    """Move from price ``p0`` to price ``p1``; ``eps=None`` means adaptive."""

    p1: NDArray[np.float64]
    p0: NDArray[np.float64]
    eps: float | None = None

    def bounds(self, data: Dataset) -> BoundInterval:
        return indirect_diff_bounds(data, self.p1, self.p0, eps=self.eps)


def _levels_program(data: Dataset, eps: float, bundle: NDArray[np.float64]):
    """Builder with columns ``u_1..u_T`` and a level for ``bundle`` at ``T``.

    Adds the pairwise data rows and ``u~ <= u_r + p^r.(bundle - x^r) + eps``.
    """
    T = data.T
    n = T + 1
    b = lp.ProgramBuilder(n)
    A, rhs = afriat_rows(data, n, 0, eps=eps)
    b.block_le(A, rhs)
    A2 = np.zeros((T, n))
    A2[:, T] = 1.0
    A2[np.arange(T), np.arange(T)] = -1.0
    b.block_le(A2, data.prices @ bundle - np.einsum("tk,tk->t", data.prices, data.quantities) + eps)
    return b


def _tie(builder: lp.ProgramBuilder, a: int, others: list[int]) -> None:
    for o in others:
        if o != a:
            builder.eq({a: 1.0, o: -1.0}, 0.0)


def utility_diff_bounds(
    data: Dataset, x1: ArrayLike, x0: ArrayLike, eps: float | None = None
) -> BoundInterval:
    """Bounds on ``u(x1) - u(x0)`` over utilities that eps-rationalize ``data``.

    The upper bound is finite only when ``x0`` is an observed bundle and the
    lower bound only when ``x1`` is.  Bundles match observations at the model
    tolerance, and every matching row is tied to the hypothetical level.
    """
    require_valid(data)
    x1 = check_bundle(x1, data.K)
    x0 = check_bundle(x0, data.K)
    eps, star = resolve_epsilon(data, eps)
    if eps < star - RATIONALIZABLE_TOL:
        return BoundInterval.infeasible("eps below minimal approximation error")
    if bundles_equal(x1, x0):
        return BoundInterval(0.0, 0.0)
    data = compact(data)
    eps = max(eps, star)
    T = data.T
    at1, at0 = matching_rows(data, x1), matching_rows(data, x0)

    upper = math.inf
    if at0:
        b = _levels_program(data, eps, x1)
        _tie(b, T, at1)
        _tie(b, at0[0], at0[1:])
        c = np.zeros(T + 1)
        c[T], c[at0[0]] = 1.0, -1.0
        out = lp.solve(b.build(c))
        assert not isinstance(out, lp.Infeasible), out
        upper = out.value if isinstance(out, lp.Optimal) else math.inf

    lower = -math.inf
    if at1:
        b = _levels_program(data, eps, x0)
        _tie(b, T, at0)
        _tie(b, at1[0], at1[1:])
        c = np.zeros(T + 1)
        c[at1[0]], c[T] = 1.0, -1.0
        out = lp.solve_min(b.build(c))
        assert not isinstance(out, lp.Infeasible), out
        lower = out.value if isinstance(out, lp.Optimal) else -math.inf
    return BoundInterval(lower, upper)


def utility_diff_upper_sequences(
    data: Dataset, eps: float, x1: ArrayLike, start: int, cap: int = DEFAULT_CAP
) -> SequenceBound:
    """Minimum over sequences ``s`` from ``start`` of
    ``p^{s_M}.(x1 - x^{s_M}) + sum_m p^{s_m}.(x^{s_{m+1}} - x^{s_m}) + M eps``.
    """
    require_valid(data)
    check_cap(data, cap)
    x1 = check_bundle(x1, data.K)
    if bundles_equal(x1, data.quantities[start]):
        raise ValueError("the bundle coincides with the starting observation")
    P, X = data.prices, data.quantities
    own = np.einsum("tk,tk->t", P, X)
    at_x1 = P @ x1
    best = SequenceBound(math.inf, ())
    for seq, w in acyclic_paths(edge_weights(data), start):
        last = seq[-1]
        v = at_x1[last] - own[last] - w + len(seq) * eps
        if v < best.value:
            best = SequenceBound(float(v), seq)
    return best


def utility_diff_lower_sequences(
    data: Dataset, eps: float, start: int, x0: ArrayLike, cap: int = DEFAULT_CAP
) -> SequenceBound:
    """Maximum over sequences ``s`` from ``start`` of
    ``p^{s_M}.(x^{s_M} - x0) + sum_m p^{s_m}.(x^{s_m} - x^{s_{m+1}}) - M eps``.
    """
    require_valid(data)
    check_cap(data, cap)
    x0 = check_bundle(x0, data.K)
    if bundles_equal(x0, data.quantities[start]):
        raise ValueError("the bundle coincides with the starting observation")
    P, X = data.prices, data.quantities
    own = np.einsum("tk,tk->t", P, X)
    at_x0 = P @ x0
    best = SequenceBound(-math.inf, ())
    for seq, w in acyclic_paths(edge_weights(data), start):
        last = seq[-1]
        v = own[last] - at_x0[last] + w - len(seq) * eps
        if v > best.value:
            best = SequenceBound(float(v), seq)
    return best


def indirect_program(data: Dataset, eps: float, p1: NDArray[np.float64], p0: NDArray[np.float64]) -> lp.LinearProgram:
    """Program whose maximum bounds ``V(p1) - V(p0)`` from above.

    Columns: bundle at ``p0`` (``K``), bundle at ``p1`` (``K``), data levels
    (``T``), level at ``p0``, level at ``p1``.  Minimizing gives the lower bound.
    """
    T, K = data.T, data.K
    P, X = data.prices, data.quantities
    own = np.einsum("tk,tk->t", P, X)
    a0, a1 = slice(0, K), slice(K, 2 * K)
    u = 2 * K + np.arange(T)
    v0, v1 = 2 * K + T, 2 * K + T + 1
    n = 2 * K + T + 2
    b = lp.ProgramBuilder(n)
    A, rhs = afriat_rows(data, n, 2 * K, eps=eps)
    b.block_le(A, rhs)
    rows_t = np.arange(T)
    for level, cols in ((v0, a0), (v1, a1)):
        # new level below each observation
        A2 = np.zeros((T, n))
        A2[:, level] = 1.0
        A2[rows_t, u] = -1.0
        A2[:, cols] = -P
        b.block_le(A2, -own + eps)
    for level, cols, price in ((v0, a0, p0), (v1, a1, p1)):
        # each observation below the new level
        A3 = np.zeros((T, n))
        A3[rows_t, u] = 1.0
        A3[:, level] = -1.0
        A3[:, cols] = price
        b.block_le(A3, X @ price + eps)
    # the two new points against each other
    r = np.zeros(n)
    r[v0], r[v1] = 1.0, -1.0
    r[a0], r[a1] = -p1, p1
    b.le(r, eps)
    r = np.zeros(n)
    r[v1], r[v0] = 1.0, -1.0
    r[a1], r[a0] = -p0, p0
    b.le(r, eps)
    c = np.zeros(n)
    c[v1], c[a1] = 1.0, -p1
    c[v0], c[a0] = -1.0, p0
    return b.build(c)


def _region(data: Dataset, target: NDArray[np.float64], other: NDArray[np.float64]) -> str:
    if hull_margin(data.prices, target) >= -1e-9:
        return FINITE_GUARANTEED
    if hull_margin(np.vstack([data.prices, other]), target) < -1e-9:
        return INFINITE_GUARANTEED
    return OUTSIDE_REGION


def indirect_diff_bounds(
    data: Dataset, p1: ArrayLike, p0: ArrayLike, eps: float | None = None
) -> BoundInterval:
    """Bounds on ``V(p1) - V(p0)`` for approximate indirect utilities.

    ``flags`` records, for the upper and then the lower bound, whether the
    price configuration guarantees a finite value, an infinite one, or neither.
    """
    require_valid(data)
    p1 = check_price(p1, data.K)
    p0 = check_price(p0, data.K)
    eps, star = resolve_epsilon(data, eps)
    if eps < star - RATIONALIZABLE_TOL:
        return BoundInterval.infeasible("eps below minimal approximation error")
    data = compact(data)
    prog = indirect_program(data, max(eps, star), p1, p0)
    hi = lp.solve(prog)
    lo = lp.solve_min(prog)
    assert not isinstance(hi, lp.Infeasible) and not isinstance(lo, lp.Infeasible)
    upper = hi.value if isinstance(hi, lp.Optimal) else math.inf
    lower = lo.value if isinstance(lo, lp.Optimal) else -math.inf
    flags = ("upper: " + _region(data, p1, p0), "lower: " + _region(data, p0, p1))
    return BoundInterval(lower, upper, True, flags)


def h_function(
    data: Dataset, eps: float, start: int, p0: ArrayLike, cap: int = DEFAULT_CAP
) -> SequenceBound:
    """Minimum over sequences ``s`` from ``start`` of
    ``x^{s_M}.(p0 - p^{s_M}) + sum_m x^{s_m}.(p^{s_{m+1}} - p^{s_m}) + M eps``.

    For ``p1 = p^start`` this lies within ``eps`` of the upper welfare bound.
    """
    require_valid(data)
    check_cap(data, cap)
    p0 = check_price(p0, data.K)
    P, X = data.prices, data.quantities
    xp = X @ P.T  # xp[r, s] = x^r . p^s
    H = xp - np.diag(xp)[:, None]  # x^r . (p^s - p^r)
    own = np.diag(xp)
    at_p0 = X @ p0
    best = SequenceBound(math.inf, ())
    for seq, w in acyclic_paths(H, start):
        last = seq[-1]
        v = at_p0[last] - own[last] + w + len(seq) * eps
        if v < best.value:
            best = SequenceBound(float(v), seq)
    return best


def _fill_monotone(f, n: int, tol: float = 1e-12) -> NDArray[np.float64]:
    """Evaluate a monotone ``f`` on ``0..n``, skipping runs whose ends agree
    within ``tol`` (solver noise would otherwise defeat the shortcut)."""
    vals = np.full(n + 1, np.nan)
    vals[0], vals[n] = f(0), f(n)
    stack = [(0, n)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        if vals[i] == vals[j] or abs(vals[i] - vals[j]) <= tol * max(1.0, abs(vals[i])):
            vals[i + 1 : j] = vals[i]
            continue
        mid = (i + j) // 2
        vals[mid] = f(mid)
        stack.extend([(i, mid), (mid, j)])
    return vals


def surplus_integral(data: Dataset, p1: float, p0: float, n_steps: int = 10_000) -> float:
    """Trapezoid approximation of the single-good welfare bound as an integral
    of demand bounds along the segment from ``p0`` to ``p1`` at ``eps = 0``.

    The upper demand bound is integrated for a price fall and the lower one
    for a price rise, since the factor ``p0 - p1`` changes sign.  Demand bounds
    are monotone in price, so grid runs with equal endpoint values are filled
    without re-solving.
    """
    require_valid(data)
    if data.K != 1:
        raise ValueError("the integral formula needs a single good")
    if epsilon_star_lp(data) > CONSISTENT_TOL:
        raise ValueError("the integral formula needs exactly rationalizable data")
    p1, p0 = float(p1), float(p0)
    if not p1 > min(float(data.prices.min()), p0):
        raise ValueError("p1 must exceed the smallest of the observed prices and p0")
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    if p1 == p0:
        return 0.0
    use_upper = p1 < p0

    def demand(i: int) -> float:
        t = i / n_steps
        b = quantity_bounds(data, [t * p1 + (1 - t) * p0], eps=0.0)
        return b.upper if use_upper else b.lower

    vals = _fill_monotone(demand, n_steps)
    trap = (vals.sum() - 0.5 * (vals[0] + vals[-1])) / n_steps
    return float(trap * (p0 - p1))
