"""Counterfactual demand: membership, finiteness and bounds on quantities.

The set of interest holds every bundle ``x`` that could be demanded at a new
price ``p`` without pushing the dataset's approximation error above ``eps``.
Bounds come from a compact program over utility levels; an enumeration of
sequence halfspaces is kept alongside as an oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import lp
from .model import (
    BoundInterval,
    CandidatePoint,
    Dataset,
    augment,
    check_epsilon,
    check_price,
    compact,
    require_valid,
)
from .rationality import RATIONALIZABLE_TOL, afriat_rows, epsilon_star_lp, resolve_epsilon
from .sequences import DEFAULT_CAP, acyclic_paths, check_cap, edge_weights

HULL_TOL = 1e-9


@dataclass(frozen=True)
class ExpenditureConstraint:
    """Optional limits on spending ``p . x`` and per-good quantity boxes."""

    m_low: float | None = None
    m_high: float | None = None
    box_low: tuple[float, ...] | None = None
    box_high: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.m_low is not None and self.m_high is not None and self.m_low > self.m_high:
            raise ValueError("expenditure lower limit exceeds upper limit")
        for box in (self.box_low, self.box_high):
            if box is not None and min(box) < 0:
                raise ValueError("quantity box bounds must be nonnegative")


def member(data: Dataset, eps: float, point: CandidatePoint) -> bool:
    """True iff adding ``point`` keeps the approximation error within ``eps``."""
    eps = check_epsilon(eps)
    return epsilon_star_lp(augment(data, point)) <= eps + RATIONALIZABLE_TOL


def quantity_program(
    data: Dataset,
    eps: float,
    price: ArrayLike,
    good: int,
    extra: ExpenditureConstraint | None = None,
) -> lp.LinearProgram:
    """Program maximizing ``x[good]`` over the counterfactual set at ``price``.

    Columns are the counterfactual bundle (``K``), the data utility levels
    (``T``) and the counterfactual utility level.
    """
    p_new = np.asarray(price, dtype=float)
    T, K = data.T, data.K
    P, X = data.prices, data.quantities
    n = K + T + 1
    uc = K + T
    A1, b1 = afriat_rows(data, n, K, eps=eps)

    # new point below each observation: u~ - u_r - p^r.x~ <= -p^r.x^r + eps
    A2 = np.zeros((T, n))
    A2[:, :K] = -P
    A2[np.arange(T), K + np.arange(T)] = -1.0
    A2[:, uc] = 1.0
    b2 = -np.einsum("tk,tk->t", P, X) + eps

    # each observation below the new point: u_r - u~ + p~.x~ <= p~.x^r + eps
    A3 = np.zeros((T, n))
    A3[:, :K] = p_new
    A3[np.arange(T), K + np.arange(T)] = 1.0
    A3[:, uc] = -1.0
    b3 = X @ p_new + eps

    rows, rhs = [A1, A2, A3], [b1, b2, b3]
    if extra is not None:
        spend = np.zeros(n)
        spend[:K] = p_new
        if extra.m_high is not None:
            rows.append(spend[None, :])
            rhs.append(np.array([extra.m_high]))
        if extra.m_low is not None:
            rows.append(-spend[None, :])
            rhs.append(np.array([-extra.m_low]))
        if extra.box_high is not None:
            rows.append(np.eye(n)[:K])
            rhs.append(np.asarray(extra.box_high, dtype=float))
        if extra.box_low is not None:
            rows.append(-np.eye(n)[:K])
            rhs.append(-np.asarray(extra.box_low, dtype=float))
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    return lp.LinearProgram(np.eye(n)[good], A, (lp.LE,) * b.size, b, np.ones(n, dtype=bool))


def quantity_bounds(
    data: Dataset,
    price: ArrayLike,
    good: int = 0,
    eps: float | None = None,
    extra: ExpenditureConstraint | None = None,
) -> BoundInterval:
    """Smallest and largest demand for ``good`` at ``price``.

    ``eps=None`` uses the dataset's own minimal error.  Requests below that
    error are infeasible; within the 1e-7 tolerance they are lifted to it.
    """
    require_valid(data)
    p_new = check_price(price, data.K)
    if not 0 <= good < data.K:
        raise ValueError(f"good index {good} out of range for K={data.K}")
    eps, star = resolve_epsilon(data, eps)
    if eps < star - RATIONALIZABLE_TOL:
        return BoundInterval.infeasible("eps below minimal approximation error")
    prog = quantity_program(compact(data), max(eps, star), p_new, good, extra)

    hi = lp.solve(prog)
    if isinstance(hi, lp.Infeasible):
        return BoundInterval.infeasible("extra constraints exclude every candidate")
    lo = lp.solve_min(prog)
    assert isinstance(lo, lp.Optimal), lo
    upper = math.inf if isinstance(hi, lp.Unbounded) else hi.value
    return BoundInterval(max(lo.value, 0.0), upper)


def bound_curve(
    data: Dataset,
    prices: Iterable[ArrayLike],
    good: int = 0,
    eps: float | None = None,
) -> list[BoundInterval]:
    """``quantity_bounds`` over a sequence of prices with a shared ``eps``."""
    eps, _ = resolve_epsilon(data, eps)
    return [quantity_bounds(data, p, good, eps) for p in prices]


@dataclass(frozen=True, eq=False)
class HalfspaceSystem:
    """Rows ``normals[h] . x <= offsets[h]`` plus ``x >= 0``.

    ``sequences[h]`` is the index sequence that generated row ``h``.
    """

    normals: NDArray[np.float64]
    offsets: NDArray[np.float64]
    sequences: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.sequences)

    def contains(self, bundle: ArrayLike, tol: float = 1e-9) -> bool:
        x = np.asarray(bundle, dtype=float)
        return bool(np.all(x >= -tol) and np.all(self.normals @ x <= self.offsets + tol))

    def program(self, good: int) -> lp.LinearProgram:
        K = self.normals.shape[1]
        return lp.LinearProgram(np.eye(K)[good], self.normals, (lp.LE,) * len(self), self.offsets, np.ones(K, dtype=bool))

    def extrema(self, good: int) -> BoundInterval:
        prog = self.program(good)
        hi = lp.solve(prog)
        if isinstance(hi, lp.Infeasible):
            return BoundInterval.infeasible()
        lo = lp.solve_min(prog)
        return BoundInterval(lo.value, math.inf if isinstance(hi, lp.Unbounded) else hi.value)


def halfspace_system(
    data: Dataset, eps: float, price: ArrayLike, cap: int = DEFAULT_CAP
) -> HalfspaceSystem:
    """One halfspace per sequence of distinct observations ``t_1 .. t_M``.

    The row reads ``(p~ - p^{t_M}) . x <= (M+1) eps + p~ . x^{t_1}
    - p^{t_M} . x^{t_M} - sum_m p^{t_m} . (x^{t_m} - x^{t_{m+1}})``.
    """
    require_valid(data)
    check_cap(data, cap)
    eps = check_epsilon(eps)
    if eps < epsilon_star_lp(data) - RATIONALIZABLE_TOL:
        raise ValueError("eps is below the minimal approximation error")
    p_new = check_price(price, data.K)
    P, X = data.prices, data.quantities
    own = np.einsum("tk,tk->t", P, X)
    normals, offsets, seqs = [], [], []
    for seq, w in acyclic_paths(edge_weights(data)):
        first, last = seq[0], seq[-1]
        normals.append(p_new - P[last])
        offsets.append((len(seq) + 1) * eps + p_new @ X[first] - own[last] - w)
        seqs.append(seq)
    return HalfspaceSystem(np.array(normals), np.array(offsets), tuple(seqs))


def hull_margin(points: ArrayLike, price: ArrayLike) -> float:
    """Largest ``d`` with ``price - sum_t a_t points[t] >= d`` in every coordinate.

    The weights ``a`` range over the simplex.  A positive margin places
    ``price`` in the interior of the upper comprehensive convex hull of
    ``points``; a nonnegative one places it in the hull.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    p = np.asarray(price, dtype=float)
    T, K = pts.shape
    # columns: a_1..a_T >= 0, d free
    A = np.hstack([pts.T, np.ones((K, 1))])
    Aeq = np.concatenate([np.ones(T), [0.0]])[None, :]
    prog = lp.LinearProgram(
        np.eye(T + 1)[T],
        np.vstack([A, Aeq]),
        (lp.LE,) * K + (lp.EQ,),
        np.concatenate([p, [1.0]]),
        np.concatenate([np.ones(T, dtype=bool), [False]]),
    )
    out = lp.solve(prog)
    assert isinstance(out, lp.Optimal), out
    return out.value


def upper_bound_finite(data: Dataset, price: ArrayLike) -> bool:
    """True iff ``price`` lies in the interior of the hull of observed prices."""
    require_valid(data)
    return hull_margin(data.prices, check_price(price, data.K)) > HULL_TOL


def epsilon_sweep(data: Dataset, price: ArrayLike, eps_values: Iterable[float], good: int = 0) -> list[tuple[float, BoundInterval]]:
    """Bounds at ``price`` for each requested ``eps``, for sensitivity tables."""
    return [(float(e), quantity_bounds(data, price, good, e)) for e in eps_values]
