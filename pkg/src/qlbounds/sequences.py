"""Enumeration of acyclic observation sequences for the closed-form oracles."""

from __future__ import annotations

from typing import Iterator

import numpy as np
from numpy.typing import NDArray

from .model import Dataset, OracleCapError

DEFAULT_CAP = 7


def edge_weights(data: Dataset) -> NDArray[np.float64]:
    """``W[r, s] = p^r . (x^r - x^s)``, the cost of moving from ``r`` to ``s``."""
    px = data.prices @ data.quantities.T  # px[r, s] = p^r . x^s
    return np.diag(px)[:, None] - px


def check_cap(data: Dataset, cap: int) -> None:
    if data.T > cap:
        raise OracleCapError(f"enumeration oracle limited to {cap} observations, got {data.T}")


def acyclic_paths(
    weights: NDArray[np.float64], start: int | None = None
) -> Iterator[tuple[tuple[int, ...], float]]:
    """Yield every sequence of distinct indices with its summed edge weight.

    The weight of ``(t_1, ..., t_M)`` is ``sum_{m<M} W[t_m, t_{m+1}]``.  With
    ``start`` given only sequences beginning there are produced.
    """
    n = weights.shape[0]
    firsts = range(n) if start is None else (start,)
    for first in firsts:
        stack: list[tuple[tuple[int, ...], float]] = [((first,), 0.0)]
        while stack:
            seq, w = stack.pop()
            yield seq, w
            last = seq[-1]
            for nxt in range(n - 1, -1, -1):
                if nxt not in seq:
                    stack.append((seq + (nxt,), w + weights[last, nxt]))
