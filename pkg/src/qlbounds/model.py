"""Datasets of price-quantity observations and the small value types around them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

BUNDLE_TOL = 1e-9


class DatasetError(ValueError):
    """A dataset or candidate point fails validation."""


class OracleCapError(ValueError):
    """An enumeration oracle was asked for more observations than its cap."""


def _frozen(a: ArrayLike) -> NDArray[np.float64]:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """``T`` observations of prices and chosen quantities for ``K`` goods.

    Row ``t`` of ``prices`` and ``quantities`` is one observation.  The
    constructor only checks shapes; use :func:`validate` for value checks.
    """

    prices: NDArray[np.float64]
    quantities: NDArray[np.float64]

    def __post_init__(self) -> None:
        p = np.array(self.prices, dtype=float)
        x = np.array(self.quantities, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if x.ndim == 1:
            x = x[:, None]
        if p.ndim != 2 or p.shape != x.shape:
            raise DatasetError(f"prices {p.shape} and quantities {x.shape} must be matching T x K matrices")
        object.__setattr__(self, "prices", _frozen(p))
        object.__setattr__(self, "quantities", _frozen(x))

    @classmethod
    def single_good(cls, quantities: ArrayLike, prices: ArrayLike) -> "Dataset":
        """One-good dataset from parallel lists of quantities and prices."""
        return cls(np.asarray(prices, dtype=float)[:, None], np.asarray(quantities, dtype=float)[:, None])

    @property
    def T(self) -> int:
        return self.prices.shape[0]

    @property
    def K(self) -> int:
        return self.prices.shape[1]

    def drop_last(self) -> "Dataset":
        return Dataset(self.prices[:-1], self.quantities[:-1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return np.array_equal(self.prices, other.prices) and np.array_equal(self.quantities, other.quantities)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Dataset(T={self.T}, K={self.K})"


@dataclass(frozen=True)
class Violation:
    row: int | None
    column: int | None
    reason: str

    def __str__(self) -> str:
        return self.reason


def validate(data: Dataset) -> list[Violation]:
    """Every invariant violation in ``data``; an empty list means valid.

    Positions in the messages are 1-based ``(row, column)``.
    """
    out: list[Violation] = []
    if data.T < 1:
        out.append(Violation(None, None, "dataset has no observations"))
    if data.K < 1:
        out.append(Violation(None, None, "dataset has no goods"))
    for (t, k), v in np.ndenumerate(data.prices):
        if not math.isfinite(v):
            out.append(Violation(t, k, f"non-finite price at ({t + 1},{k + 1})"))
        elif v <= 0:
            out.append(Violation(t, k, f"nonpositive price at ({t + 1},{k + 1})"))
    for (t, k), v in np.ndenumerate(data.quantities):
        if not math.isfinite(v):
            out.append(Violation(t, k, f"non-finite quantity at ({t + 1},{k + 1})"))
        elif v < 0:
            out.append(Violation(t, k, f"negative quantity at ({t + 1},{k + 1})"))
    return out


def require_valid(data: Dataset) -> Dataset:
    problems = validate(data)
    if problems:
        raise DatasetError("; ".join(map(str, problems)))
    return data


@dataclass(frozen=True, eq=False)
class CandidatePoint:
    """A hypothetical bundle ``quantity`` chosen at ``price``."""

    quantity: NDArray[np.float64]
    price: NDArray[np.float64]

    def __post_init__(self) -> None:
        object.__setattr__(self, "quantity", _frozen(np.atleast_1d(np.asarray(self.quantity, dtype=float))))
        object.__setattr__(self, "price", _frozen(np.atleast_1d(np.asarray(self.price, dtype=float))))

    def problems(self) -> list[str]:
        out = []
        if self.quantity.shape != self.price.shape or self.quantity.ndim != 1:
            out.append("quantity and price must be vectors of equal length")
            return out
        if not np.all(np.isfinite(self.price)) or np.any(self.price <= 0):
            out.append("candidate price must be strictly positive")
        if not np.all(np.isfinite(self.quantity)) or np.any(self.quantity < 0):
            out.append("candidate quantity must be nonnegative")
        return out


def augment(data: Dataset, point: CandidatePoint) -> Dataset:
    """``data`` with ``point`` appended as observation ``T+1``."""
    require_valid(data)
    issues = point.problems()
    if not issues and point.price.size != data.K:
        issues.append(f"candidate has {point.price.size} goods, dataset has {data.K}")
    if issues:
        raise DatasetError("; ".join(issues))
    return Dataset(
        np.vstack([data.prices, point.price[None, :]]),
        np.vstack([data.quantities, point.quantity[None, :]]),
    )


def compact(data: Dataset) -> Dataset:
    """Drop exact duplicate observations, keeping first occurrences in order.

    Repeating an observation never changes a bound: any sequence that passes
    through both copies is dominated by one that skips the second.
    """
    rows = np.hstack([data.prices, data.quantities])
    _, first = np.unique(rows, axis=0, return_index=True)
    if first.size == data.T:
        return data
    keep = np.sort(first)
    return Dataset(data.prices[keep], data.quantities[keep])


def bundles_equal(a: ArrayLike, b: ArrayLike, tol: float = BUNDLE_TOL) -> bool:
    return bool(np.max(np.abs(np.asarray(a, float) - np.asarray(b, float))) <= tol)


def matching_rows(data: Dataset, bundle: ArrayLike, tol: float = BUNDLE_TOL) -> list[int]:
    """Indices ``t`` with ``x^t`` equal to ``bundle`` up to ``tol``."""
    diff = np.max(np.abs(data.quantities - np.asarray(bundle, float)[None, :]), axis=1)
    return [int(t) for t in np.flatnonzero(diff <= tol)]


def check_epsilon(eps: float) -> float:
    eps = float(eps)
    if not eps >= 0 or math.isinf(eps):
        raise ValueError(f"approximation error must be a finite nonnegative number, got {eps}")
    return eps


def check_price(price: ArrayLike, K: int) -> NDArray[np.float64]:
    p = np.atleast_1d(np.asarray(price, dtype=float))
    if p.shape != (K,):
        raise ValueError(f"price vector must have {K} entries")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise ValueError("prices must be strictly positive")
    return p


def check_bundle(bundle: ArrayLike, K: int) -> NDArray[np.float64]:
    x = np.atleast_1d(np.asarray(bundle, dtype=float))
    if x.shape != (K,):
        raise ValueError(f"bundle must have {K} entries")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise ValueError("bundles must be nonnegative")
    return x


class InfeasibleBoundError(RuntimeError):
    """Raised when reading the endpoints of an infeasible interval."""


@dataclass(frozen=True)
class BoundInterval:
    """Lower and upper bounds, possibly infinite, or an infeasible marker.

    ``flags`` carries diagnostics such as finiteness-region notes.
    """

    _lower: float = 0.0
    _upper: float = 0.0
    feasible: bool = True
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        # normalize -0.0 so that printed bounds read "0"
        object.__setattr__(self, "_lower", float(self._lower) + 0.0)
        object.__setattr__(self, "_upper", float(self._upper) + 0.0)

    @classmethod
    def infeasible(cls, *flags: str) -> "BoundInterval":
        return cls(math.nan, math.nan, False, tuple(flags))

    @property
    def status(self) -> str:
        return "Feasible" if self.feasible else "Infeasible"

    @property
    def lower(self) -> float:
        if not self.feasible:
            raise InfeasibleBoundError("bounds of an infeasible problem are undefined")
        return self._lower

    @property
    def upper(self) -> float:
        if not self.feasible:
            raise InfeasibleBoundError("bounds of an infeasible problem are undefined")
        return self._upper

    def __iter__(self):
        yield self.lower
        yield self.upper
