"""Pseudo-datasets from a cross-section via a partially linear demand model.

Demand is modeled as ``X = g(P, Y) + beta'W + U``.  ``beta`` is estimated by a
double-residual regression, then ``g(p, y)`` at a fixed income is estimated by
a product-biweight Nadaraya-Watson average of ``X - beta'W``.  Evaluating it at
each observed price gives a single-good dataset for the bound routines.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .model import Dataset

log = logging.getLogger(__name__)

DEFAULT_BANDWIDTH = 0.75


class NoSupportError(ValueError):
    """No record falls inside the kernel window around the evaluation point."""


@dataclass(frozen=True, eq=False)
class CrossSection:
    """Quantities ``X``, prices ``P``, incomes ``Y`` and covariates ``W`` (n x d)."""

    X: NDArray[np.float64]
    P: NDArray[np.float64]
    Y: NDArray[np.float64]
    W: NDArray[np.float64]

    def __post_init__(self) -> None:
        X, P, Y = (np.asarray(a, dtype=float).reshape(-1) for a in (self.X, self.P, self.Y))
        W = np.asarray(self.W, dtype=float)
        if W.ndim == 1:
            W = W[:, None]
        n = X.size
        if n < 2:
            raise ValueError("a cross-section needs at least 2 records")
        if P.size != n or Y.size != n or W.shape[0] != n:
            raise ValueError("X, P, Y and W must have one entry per record")
        if np.any(P <= 0):
            raise ValueError("prices must be strictly positive")
        if not all(np.all(np.isfinite(a)) for a in (X, P, Y, W)):
            raise ValueError("cross-section values must be finite")
        for name, a in (("X", X), ("P", P), ("Y", Y), ("W", W)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n(self) -> int:
        return self.X.size


@dataclass(frozen=True)
class KernelConfig:
    h_p: float
    h_y: float
    trim_low: float = 0.05
    trim_high: float = 0.95

    def __post_init__(self) -> None:
        if not (self.h_p > 0 and self.h_y > 0):
            raise ValueError("bandwidths must be positive")
        if not 0 <= self.trim_low < self.trim_high <= 1:
            raise ValueError("need 0 <= trim_low < trim_high <= 1")


def biweight(u: ArrayLike) -> NDArray[np.float64] | float:
    """``(15/16)(1 - u^2)^2`` on ``|u| <= 1`` and zero outside."""
    u = np.asarray(u, dtype=float)
    out = np.where(np.abs(u) <= 1.0, 0.9375 * (1.0 - u * u) ** 2, 0.0)
    return float(out) if out.ndim == 0 else out


def bandwidth_rule(cs: CrossSection, h_y: float) -> float:
    """Price bandwidth keeping ``h_p / h_y`` equal to the ratio of standard deviations."""
    sp, sy = float(np.std(cs.P)), float(np.std(cs.Y))
    if sp == 0 or sy == 0:
        raise ValueError("price and income must both vary")
    return h_y * sp / sy


def default_config(cs: CrossSection, bandwidth: float = DEFAULT_BANDWIDTH) -> KernelConfig:
    """Bandwidth ``bandwidth`` in standardized units for both price and income."""
    h_y = bandwidth * float(np.std(cs.Y))
    return KernelConfig(h_p=bandwidth_rule(cs, h_y), h_y=h_y)


def _weights(cs: CrossSection, p: ArrayLike, y: ArrayLike, cfg: KernelConfig) -> NDArray[np.float64]:
    """Product kernel weights, one row per evaluation point."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return biweight((cs.P[None, :] - p[:, None]) / cfg.h_p) * biweight((cs.Y[None, :] - y[:, None]) / cfg.h_y)


@dataclass(frozen=True)
class BetaFit:
    beta: NDArray[np.float64]
    n_excluded: int = 0
    residual_rank: int = field(default=0)


def robinson_beta(cs: CrossSection, cfg: KernelConfig) -> NDArray[np.float64]:
    """Coefficient on ``W`` from the double-residual regression."""
    return robinson_fit(cs, cfg).beta


def robinson_fit(cs: CrossSection, cfg: KernelConfig) -> BetaFit:
    """Regress ``X - m_X(P, Y)`` on ``W - m_W(P, Y)``, both smoothed leave-in.

    Records whose kernel window is empty are excluded and counted.
    """
    w = _weights(cs, cs.P, cs.Y, cfg)
    denom = w.sum(axis=1)
    ok = denom > 0
    n_excluded = int((~ok).sum())
    if n_excluded:
        log.warning("%d records have an empty kernel window and are excluded", n_excluded)
    w, denom = w[ok], denom[ok]
    rx = cs.X[ok] - (w @ cs.X) / denom
    rw = cs.W[ok] - (w @ cs.W) / denom[:, None]
    sv = np.linalg.svd(rw, compute_uv=False)
    scale = max(1.0, float(np.abs(cs.W).max()))
    rank = int(np.sum(sv > 1e-10 * scale * np.sqrt(rw.shape[0])))
    if rank < rw.shape[1]:
        raise np.linalg.LinAlgError("residualized covariates are rank deficient")
    beta, *_ = np.linalg.lstsq(rw, rx, rcond=None)
    return BetaFit(beta, n_excluded, rank)


def kernel_demand(cs: CrossSection, beta: ArrayLike, p: float, y: float, cfg: KernelConfig) -> float:
    """Nadaraya-Watson estimate of ``g(p, y)`` from ``X - beta'W``."""
    w = _weights(cs, p, y, cfg)[0]
    denom = w.sum()
    if denom <= 0:
        raise NoSupportError(f"no records within the kernel window at p={p}, y={y}")
    resid = cs.X - cs.W @ np.asarray(beta, dtype=float)
    return float(w @ resid / denom)


@dataclass(frozen=True, eq=False)
class PseudoDataset:
    """A pseudo-dataset plus bookkeeping from its construction."""

    dataset: Dataset
    kept: NDArray[np.int_]
    n_clamped: int


def trim_prices(P: NDArray[np.float64], low: float, high: float) -> NDArray[np.int_]:
    """Indices with price strictly between the ``low`` and ``high`` quantiles."""
    lo, hi = np.quantile(P, [low, high])
    return np.flatnonzero((P > lo) & (P < hi))


def build_pseudo_dataset(cs: CrossSection, y: float, cfg: KernelConfig, beta: ArrayLike) -> PseudoDataset:
    """Estimated demand at income ``y`` at every retained record's price.

    Negative estimates are set to 0 and counted.  Observations are sorted by
    price; records sharing a price give repeated rows.
    """
    kept = trim_prices(cs.P, cfg.trim_low, cfg.trim_high)
    if kept.size == 0:
        raise ValueError("quantile trimming removed every record")
    kept = kept[np.argsort(cs.P[kept], kind="stable")]
    prices = cs.P[kept]
    resid = cs.X - cs.W @ np.asarray(beta, dtype=float)
    uniq, inverse = np.unique(prices, return_inverse=True)
    w = _weights(cs, uniq, np.full(uniq.size, float(y)), cfg)
    denom = w.sum(axis=1)
    if np.any(denom <= 0):
        bad = uniq[denom <= 0][0]
        raise NoSupportError(f"no records within the kernel window at p={bad}, y={y}")
    g = (w @ resid / denom)[inverse]
    neg = g < 0
    n_clamped = int(neg.sum())
    if n_clamped:
        log.warning("%d negative demand estimates set to 0", n_clamped)
    g = np.where(neg, 0.0, g)
    return PseudoDataset(Dataset.single_good(g, prices), kept, n_clamped)


@dataclass(frozen=True)
class SynthSpec:
    """Data-generating process for synthetic cross-sections.

    ``g(p, y) = min_j (a_j - b_j p + c_j y)`` with one triple per piece.
    Prices are drawn from ``price_levels`` when given (as with a few
    regional price points), otherwise uniformly on ``price_range``.
    """

    pieces: tuple[tuple[float, float, float], ...] = ((6.0, 2.0, 0.1),)
    beta: tuple[float, ...] = (0.5,)
    sigma_u: float = 0.1
    price_range: tuple[float, float] = (1.0, 2.0)
    price_levels: tuple[float, ...] | None = None
    income_mean: float = 5.0
    income_sd: float = 1.0
    w_sd: float = 1.0

    def g(self, p: ArrayLike, y: ArrayLike) -> NDArray[np.float64]:
        p = np.asarray(p, dtype=float)
        y = np.asarray(y, dtype=float)
        vals = [a - b * p + c * y for a, b, c in self.pieces]
        return np.min(np.stack(vals), axis=0)


def synth_cross_section(seed: int, n: int, spec: SynthSpec = SynthSpec()) -> CrossSection:
    """Draw ``n`` records.  The draws do not depend on ``spec.sigma_u``, so one
    seed gives the same prices, incomes, covariates and noise shape at every
    noise level."""
    rng = np.random.default_rng(seed)
    if spec.price_levels is not None:
        P = rng.choice(np.asarray(spec.price_levels, dtype=float), size=n)
    else:
        P = rng.uniform(*spec.price_range, size=n)
    Y = rng.normal(spec.income_mean, spec.income_sd, size=n)
    d = len(spec.beta)
    W = rng.normal(0.0, spec.w_sd, size=(n, d))
    Z = rng.standard_normal(n)
    X = spec.g(P, Y) + W @ np.asarray(spec.beta, dtype=float) + spec.sigma_u * Z
    return CrossSection(X, P, Y, W)
