"""Explicit rationalizing utilities and conjugate-duality round trips."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import lp
from .model import Dataset, check_epsilon, require_valid
from .rationality import RATIONALIZABLE_TOL, epsilon_star_lp
from .sequences import DEFAULT_CAP, acyclic_paths, check_cap, edge_weights

log = logging.getLogger(__name__)

ROUNDTRIP_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class PiecewiseAffineUtility:
    """``u(x) = min_j slopes[j] . x + intercepts[j]`` (concave)."""

    slopes: NDArray[np.float64]
    intercepts: NDArray[np.float64]

    def __post_init__(self) -> None:
        s = np.atleast_2d(np.asarray(self.slopes, dtype=float))
        b = np.atleast_1d(np.asarray(self.intercepts, dtype=float))
        if s.shape[0] == 0 or s.shape[0] != b.size:
            raise ValueError("need at least one piece and one intercept per slope")
        object.__setattr__(self, "slopes", s)
        object.__setattr__(self, "intercepts", b)

    @property
    def K(self) -> int:
        return self.slopes.shape[1]

    def __call__(self, x: ArrayLike) -> float:
        return float(np.min(self.slopes @ np.atleast_1d(np.asarray(x, dtype=float)) + self.intercepts))


@dataclass(frozen=True, eq=False)
class MaxAffineFunction:
    """``V(p) = max_j slopes[j] . p + intercepts[j]`` (convex)."""

    slopes: NDArray[np.float64]
    intercepts: NDArray[np.float64]

    def __post_init__(self) -> None:
        s = np.atleast_2d(np.asarray(self.slopes, dtype=float))
        b = np.atleast_1d(np.asarray(self.intercepts, dtype=float))
        if s.shape[0] == 0 or s.shape[0] != b.size:
            raise ValueError("need at least one piece and one intercept per slope")
        object.__setattr__(self, "slopes", s)
        object.__setattr__(self, "intercepts", b)

    def __call__(self, p: ArrayLike) -> float:
        return float(np.max(self.slopes @ np.atleast_1d(np.asarray(p, dtype=float)) + self.intercepts))


def build_rationalizing_utility(data: Dataset, eps: float, cap: int = DEFAULT_CAP) -> PiecewiseAffineUtility:
    """Min-of-affine utility rooted at observation 0.

    Each sequence ``s`` of distinct observations starting at 0 contributes a
    piece with slope ``p^{s_M}`` and intercept
    ``-p^{s_M}.x^{s_M} + sum_m p^{s_m}.(x^{s_{m+1}} - x^{s_m}) + M eps``.
    """
    require_valid(data)
    check_cap(data, cap)
    eps = check_epsilon(eps)
    if eps < epsilon_star_lp(data) - RATIONALIZABLE_TOL:
        raise ValueError("eps is below the minimal approximation error")
    P, X = data.prices, data.quantities
    own = np.einsum("tk,tk->t", P, X)
    slopes, intercepts = [], []
    for seq, w in acyclic_paths(edge_weights(data), 0):
        last = seq[-1]
        slopes.append(P[last])
        intercepts.append(-own[last] - w + len(seq) * eps)
    return PiecewiseAffineUtility(np.array(slopes), np.array(intercepts))


def _best_response_program(u: PiecewiseAffineUtility, p: NDArray[np.float64]) -> lp.LinearProgram:
    # columns: x (K, nonneg), z (free); maximize z - p.x with z <= slope.x + b
    J, K = u.slopes.shape
    A = np.hstack([-u.slopes, np.ones((J, 1))])
    nonneg = np.concatenate([np.ones(K, dtype=bool), [False]])
    return lp.LinearProgram(np.concatenate([-p, [1.0]]), A, (lp.LE,) * J, u.intercepts, nonneg)


def indirect_utility(u: PiecewiseAffineUtility, price: ArrayLike) -> float:
    """``sup_x u(x) - p.x`` over nonnegative bundles, ``inf`` when unbounded."""
    p = np.asarray(price, dtype=float)
    if p.shape != (u.K,) or np.any(p <= 0):
        raise ValueError("price must be a strictly positive vector of matching length")
    out = lp.solve(_best_response_program(u, p))
    if isinstance(out, lp.Unbounded):
        return math.inf
    assert isinstance(out, lp.Optimal), out
    return out.value


def rationalization_slack(u: PiecewiseAffineUtility, data: Dataset, eps: float) -> NDArray[np.float64]:
    """Per observation, ``u(x^t) - p^t.x^t + eps - V_u(p^t)``; negative entries fail."""
    out = np.empty(data.T)
    for t in range(data.T):
        best = indirect_utility(u, data.prices[t])
        out[t] = u(data.quantities[t]) - data.prices[t] @ data.quantities[t] + eps - best
    return out


def verify_rationalization(u: PiecewiseAffineUtility, data: Dataset, eps: float) -> bool:
    """True iff each observed bundle is within ``eps`` of the best payoff."""
    slack = rationalization_slack(u, data, eps)
    bad = np.flatnonzero(slack < -RATIONALIZABLE_TOL)
    if bad.size:
        log.info("rationalization fails at observations %s (slack %s)", bad.tolist(), slack[bad].tolist())
        return False
    return True


def dual_utility(V: MaxAffineFunction, bundle: ArrayLike) -> float:
    """``u_V(x) = inf_{q >= 0} V(q) + q.x``; ``-inf`` when unbounded below."""
    x = np.asarray(bundle, dtype=float)
    J, K = V.slopes.shape
    # columns: q (K, nonneg), z (free); minimize z + q.x with z >= a_j.q + b_j
    A = np.hstack([V.slopes, -np.ones((J, 1))])
    nonneg = np.concatenate([np.ones(K, dtype=bool), [False]])
    prog = lp.LinearProgram(np.concatenate([x, [1.0]]), A, (lp.LE,) * J, -V.intercepts, nonneg)
    out = lp.solve_min(prog)
    if isinstance(out, lp.Unbounded):
        return -math.inf
    assert isinstance(out, lp.Optimal), out
    return out.value


def _dual_indirect(V: MaxAffineFunction, p: NDArray[np.float64]) -> lp.Optimal:
    # sup_x u_V(x) - p.x, with u_V(x) written through LP duality as
    # max { sum_j w_j b_j : w in the simplex, -sum_j w_j a_j <= x }
    J, K = V.slopes.shape
    n = K + J
    A = np.hstack([-np.eye(K), -V.slopes.T])
    Aeq = np.concatenate([np.zeros(K), np.ones(J)])[None, :]
    prog = lp.LinearProgram(
        np.concatenate([-p, V.intercepts]),
        np.vstack([A, Aeq]),
        (lp.LE,) * K + (lp.EQ,),
        np.concatenate([np.zeros(K), [1.0]]),
        np.ones(n, dtype=bool),
    )
    out = lp.solve(prog)
    assert isinstance(out, lp.Optimal), out
    return out


def dual_roundtrip_check(V: MaxAffineFunction, grid: ArrayLike, tol: float = ROUNDTRIP_TOL) -> bool:
    """Recover ``V`` from its dual utility on every grid price.

    At each price the maximizing bundle of ``u_V(x) - p.x`` is found, ``u_V``
    is re-evaluated there through its defining infimum, and both the program
    value and the re-evaluation must match ``V(p)`` within ``tol``.
    """
    if np.any(V.slopes > 0):
        raise ValueError("V must be weakly decreasing (nonpositive slopes)")
    pts = np.asarray(grid, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    K = V.slopes.shape[1]
    for p in pts:
        out = _dual_indirect(V, p)
        x = out.solution[:K]
        direct = dual_utility(V, x) - p @ x
        target = V(p)
        if abs(out.value - target) > tol or abs(direct - target) > tol:
            log.info("round trip fails at p=%s: %s / %s vs %s", p, out.value, direct, target)
            return False
    return True
