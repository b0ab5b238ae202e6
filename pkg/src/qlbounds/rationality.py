"""Minimal approximation error of a dataset, computed three ways.

``epsilon_star_lp`` solves the Afriat-style program, ``epsilon_star_cycles``
runs Karp's minimum-mean-cycle algorithm on negated edge weights, and
``epsilon_star_bruteforce`` enumerates simple cycles.  Indices are 0-based.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import lp
from .model import Dataset, OracleCapError, check_epsilon, compact, require_valid
from .sequences import edge_weights

RATIONALIZABLE_TOL = 1e-7
BRUTEFORCE_CAP = 8


@dataclass(frozen=True)
class CycleCertificate:
    """A directed cycle ``t_1 -> ... -> t_M -> t_1`` and its mean edge weight."""

    sequence: tuple[int, ...]
    mean_weight: float


def cycle_mean(data: Dataset, sequence) -> float:
    """Mean of ``p^{t_m} . (x^{t_m} - x^{t_{m+1}})`` around the closed cycle."""
    seq = list(sequence)
    p, x = data.prices, data.quantities
    total = sum(float(p[a] @ (x[a] - x[b])) for a, b in zip(seq, seq[1:] + seq[:1]))
    return total / len(seq)


def afriat_rows(data: Dataset, n_vars: int, u0: int, eps: float | None = None, eps_col: int | None = None):
    """Rows ``u_s - u_r (- eps) <= p^r.(x^s - x^r) (+ eps)`` for all ``r != s``.

    Utility levels occupy columns ``u0 .. u0+T-1``.  Either a fixed ``eps`` is
    folded into the right-hand side or ``eps_col`` names a variable for it.
    """
    T = data.T
    W = edge_weights(data)
    r_idx, s_idx = np.nonzero(~np.eye(T, dtype=bool))
    A = np.zeros((r_idx.size, n_vars))
    rows = np.arange(r_idx.size)
    A[rows, u0 + s_idx] += 1.0
    A[rows, u0 + r_idx] -= 1.0
    b = -W[r_idx, s_idx]
    if eps_col is not None:
        A[:, eps_col] = -1.0
    else:
        b = b + eps
    return A, b


def epsilon_star_lp(data: Dataset) -> float:
    """Smallest ``eps >= 0`` admitting utility levels that satisfy every pair."""
    require_valid(data)
    data = compact(data)
    T = data.T
    n = T + 1
    A, b = afriat_rows(data, n, 0, eps_col=T)
    prog = lp.LinearProgram(-np.eye(n)[T], A, (lp.LE,) * len(b), b, np.ones(n, dtype=bool))
    out = lp.solve(prog)
    if not isinstance(out, lp.Optimal):
        raise RuntimeError(f"approximation-error program returned {out}")
    return max(0.0, -out.value)


def epsilon_star_cycles(data: Dataset) -> tuple[float, CycleCertificate | None]:
    """Karp's algorithm; returns ``eps*`` and a cycle attaining it when positive."""
    require_valid(data)
    T = data.T
    if T < 2:
        return 0.0, None
    cost = -edge_weights(data)
    np.fill_diagonal(cost, np.inf)
    # best[k, v]: cheapest walk with exactly k edges from vertex 0 to v
    best = np.full((T + 1, T), np.inf)
    best[0, 0] = 0.0
    pred = np.zeros((T + 1, T), dtype=int)
    for k in range(1, T + 1):
        cand = best[k - 1][:, None] + cost
        pred[k] = np.argmin(cand, axis=0)
        best[k] = cand[pred[k], np.arange(T)]
    with np.errstate(invalid="ignore"):
        ratios = (best[T][None, :] - best[:T]) / (T - np.arange(T))[:, None]
    ratios[~np.isfinite(best[:T])] = -np.inf
    worst = ratios.max(axis=0)
    worst[~np.isfinite(best[T])] = np.inf
    v = int(np.argmin(worst))
    max_mean = -float(worst[v])
    if max_mean <= 0:
        return 0.0, None

    walk = [v]
    for k in range(T, 0, -1):
        walk.append(int(pred[k, walk[-1]]))
    walk.reverse()
    seen: dict[int, int] = {}
    cycle: tuple[int, ...] = ()
    for pos, node in enumerate(walk):
        if node in seen:
            cycle = tuple(walk[seen[node] : pos])
            break
        seen[node] = pos
    mean = cycle_mean(data, cycle)
    return max_mean, CycleCertificate(cycle, mean)


def epsilon_star_bruteforce(data: Dataset, cap: int = BRUTEFORCE_CAP) -> float:
    """Maximum mean over all simple directed cycles, clamped at 0."""
    require_valid(data)
    if data.T > cap:
        raise OracleCapError(f"brute-force cycle enumeration limited to {cap} observations, got {data.T}")
    W = edge_weights(data)
    T = data.T
    best = 0.0
    for first in range(T):
        rest = range(first + 1, T)
        for M in range(1, T - first):
            for tail in itertools.permutations(rest, M):
                seq = (first,) + tail
                total = sum(W[a, b] for a, b in zip(seq, seq[1:] + seq[:1]))
                best = max(best, total / len(seq))
    return best


def is_rationalizable(data: Dataset, eps: float) -> bool:
    """True iff ``eps >= eps*(data) - 1e-7``."""
    eps = check_epsilon(eps)
    return eps >= epsilon_star_lp(data) - RATIONALIZABLE_TOL


def resolve_epsilon(data: Dataset, eps: float | None) -> tuple[float, float]:
    """``(requested eps, eps*)``; ``None`` selects the adaptive choice ``eps*``."""
    star = epsilon_star_lp(data)
    if eps is None:
        return star, star
    return check_epsilon(eps), star
