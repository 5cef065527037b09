"""Obligor credit spreads, default times and the EUR/USD exchange rate.

The 5y CDS spread of each obligor is lognormal with a driver built by beta
projection on credit-index Brownian motions plus an idiosyncratic Brownian
motion. The rest of the spread curve moves proportionally to the 5y pillar,
so curve shape ratios never change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

FIVE_YEAR = 5.0


class DefaultMode(str, Enum):
    SIMULATE = "simulate"
    COUNTERPARTY_DEFAULT_FREE = "counterparty_default_free"
    BOTH_DEFAULT_FREE = "both_default_free"


@dataclass(frozen=True)
class ObligorSpec:
    label: str
    spread_curve: Mapping[float, float]
    spread_vol: float
    betas: tuple[float, ...]
    recovery: float = 0.4
    funding_currency: str = "EUR"
    tenors: np.ndarray = field(init=False, repr=False, compare=False)
    spreads: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        curve = {float(k): float(v) for k, v in self.spread_curve.items()}
        if FIVE_YEAR not in curve:
            raise ValueError(f"{self.label}: spread curve needs a 5y pillar")
        if any(v <= 0 for v in curve.values()):
            raise ValueError(f"{self.label}: initial spreads must be positive")
        if self.spread_vol < 0:
            raise ValueError(f"{self.label}: spread_vol must be >= 0")
        if sum(b * b for b in self.betas) > 1.0 + 1e-12:
            raise ValueError(f"{self.label}: sum of squared betas exceeds 1")
        if not 0.0 <= self.recovery <= 1.0:
            raise ValueError(f"{self.label}: recovery must lie in [0, 1]")
        tenors = np.array(sorted(curve))
        object.__setattr__(self, "spread_curve", curve)
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "tenors", tenors)
        object.__setattr__(self, "spreads", np.array([curve[t] for t in tenors]))

    @property
    def five_year_spread(self) -> float:
        return self.spread_curve[FIVE_YEAR]

    @property
    def hazard_rate(self) -> float:
        """Flat hazard implied by the 5y spread, spread / (1 - R)."""
        if self.recovery >= 1.0:
            raise ValueError(f"{self.label}: hazard undefined for full recovery")
        return self.five_year_spread / (1.0 - self.recovery)

    def spread_at(self, tenor: float) -> float:
        try:
            return self.spread_curve[float(tenor)]
        except KeyError:
            raise KeyError(f"{self.label}: spread curve has no {tenor}y pillar") from None


@dataclass(frozen=True)
class SpreadState:
    """Spread curve of ``spec`` at ``time`` given its 5y spread (scalar or per path)."""

    time: float
    spec: ObligorSpec
    five_year_spread: np.ndarray | float

    def spread_at(self, tenor: float):
        ratio = np.asarray(self.five_year_spread) / self.spec.five_year_spread
        out = self.spec.spread_at(tenor) * ratio
        return float(out) if out.ndim == 0 else out


def composite_driver(betas, index_draws, idio_draw):
    """sum_k beta_k I_k - sqrt(1 - sum_k beta_k^2) * eps.

    ``index_draws`` has the index axis last; works on Brownian values as
    well as on single normal draws since the map is linear.
    """
    betas = np.asarray(betas, dtype=float)
    index_draws = np.asarray(index_draws, dtype=float)
    if index_draws.shape[-1] != betas.size:
        raise ValueError(
            f"{betas.size} betas but {index_draws.shape[-1]} index draws"
        )
    b2 = float(betas @ betas)
    if b2 > 1.0 + 1e-12:
        raise ValueError("sum of squared betas exceeds 1")
    proj = 0.0
    for k, b in enumerate(betas):
        proj = proj + b * index_draws[..., k]
    out = proj - math.sqrt(max(1.0 - b2, 0.0)) * np.asarray(idio_draw)
    return float(out) if np.ndim(out) == 0 else out


def evolve_spread_5y(kappa0: float, sigma: float, w, t: float):
    """Lognormal 5y spread kappa0 * exp(sigma w - sigma^2 t / 2)."""
    if not kappa0 > 0:
        raise ValueError("kappa0 must be > 0")
    if t < 0:
        raise ValueError("t must be >= 0")
    out = kappa0 * np.exp(sigma * np.asarray(w) - 0.5 * sigma * sigma * t)
    return float(out) if np.ndim(out) == 0 else out


def shift_spread_curve(spec: ObligorSpec, kappa5_t) -> np.ndarray:
    """Spread curve at ``spec.tenors`` scaled by kappa5_t / kappa5_0.

    A vector of 5y spreads gives one curve per row.
    """
    kappa5_t = np.asarray(kappa5_t, dtype=float)
    if np.any(kappa5_t <= 0):
        raise ValueError("5y spread must be > 0")
    ratio = kappa5_t / spec.five_year_spread
    return ratio[..., None] * spec.spreads


def evolve_fx(eta0: float, sigma: float, w, t: float):
    """Lognormal exchange rate eta0 * exp(sigma w - sigma^2 t / 2)."""
    if not eta0 > 0:
        raise ValueError("eta0 must be > 0")
    out = eta0 * np.exp(sigma * np.asarray(w) - 0.5 * sigma * sigma * t)
    return float(out) if np.ndim(out) == 0 else out


def default_time(spec: ObligorSpec, u, horizon: float = math.inf, default_free: bool = False):
    """Inverse-transform default time -ln(u)/h under the flat 5y hazard.

    Times beyond ``horizon`` (and every time when ``default_free``) come
    back as ``inf``.
    """
    u = np.asarray(u, dtype=float)
    if default_free:
        out = np.full(u.shape, math.inf)
    else:
        if np.any((u <= 0) | (u >= 1)):
            raise ValueError("u must lie in (0, 1)")
        tau = -np.log(u) / spec.hazard_rate
        out = np.where(tau > horizon, math.inf, tau)
    return float(out) if out.ndim == 0 else out
