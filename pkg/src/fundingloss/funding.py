"""Funding spreads, funding flows and the funding loss distribution.

The investor holds ``-P`` to hedge a contract worth ``P``: a positive ``P``
has to be borrowed from treasury at the weighted cost of funding spread,
a negative ``P`` is invested at the weighted cost of investment spread.
The funding loss is the discounted integral of that flow up to the first
of the two defaults and the contract maturity. Positive loss is a cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import stats
from .credit_fx import SpreadState
from .credit_valuation import Estimate
from .rates import CurveState, interp_zero_rate


class Regime(str, Enum):
    UNCOLLATERALIZED = "uncollateralized"
    COLLATERALIZED = "collateralized"
    COLLATERALIZED_NOT_PASSED = "collateralized_not_passed"


@dataclass(frozen=True)
class FactorSchedule:
    """Piecewise-constant factor in [0, 1]: ``values[i]`` applies from ``times[i]`` on."""

    times: tuple[float, ...] = (0.0,)
    values: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        values = tuple(float(v) for v in self.values)
        if len(times) != len(values) or not times:
            raise ValueError("factor schedule needs matching, non-empty times and values")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("factor schedule times must be strictly increasing")
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ValueError(f"factor values must lie in [0, 1], got {values}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, value: float) -> "FactorSchedule":
        return cls((0.0,), (float(value),))

    @property
    def is_constant(self) -> bool:
        return len(self.values) == 1

    def __call__(self, t: float) -> float:
        i = max(int(np.searchsorted(self.times, t, side="right")) - 1, 0)
        return self.values[i]


@dataclass(frozen=True)
class FundingPolicy:
    regime: Regime = Regime.UNCOLLATERALIZED
    funding_factor: FactorSchedule = field(default_factory=lambda: FactorSchedule.constant(1.0))
    # None means "same as funding_factor" (WCIS = WCFS)
    investment_factor: FactorSchedule | None = None
    short_tenor: float = 3.0
    long_tenor: float = 10.0
    csa_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        for name in ("funding_factor", "investment_factor"):
            v = getattr(self, name)
            if isinstance(v, (int, float)):
                object.__setattr__(self, name, FactorSchedule.constant(v))
        if not 0 < self.short_tenor < self.long_tenor:
            raise ValueError("need 0 < short_tenor < long_tenor")

    def theta(self, t: float) -> float:
        return self.funding_factor(t)

    def gamma(self, t: float) -> float:
        sched = self.investment_factor or self.funding_factor
        return sched(t)


@dataclass(frozen=True)
class SpreadQuad:
    """Short/long funding (+) and investing (-) spreads, scalar or per path."""

    short_funding: np.ndarray | float
    long_funding: np.ndarray | float
    short_investing: np.ndarray | float
    long_investing: np.ndarray | float


@dataclass(frozen=True)
class FundingLossSample:
    phi: float
    stop_time: float
    path_id: int = 0


@dataclass(frozen=True)
class LossDistribution:
    """Funding loss sample (sorted ascending) and its summary statistics."""

    samples: np.ndarray = field(repr=False)
    mean: float
    stderr: float
    prob_positive: float

    def quantile(self, alpha: float) -> float:
        return stats.quantile(self.samples, alpha)

    def tail(self, alpha: float) -> float:
        return stats.tail_expectation(self.samples, alpha)

    def histogram(self, bins: int = 50):
        """Counts and edges over [min, max] of the samples."""
        counts, edges = np.histogram(self.samples, bins=bins)
        return counts, edges


def wcfs(theta, short_spread, long_spread):
    """Weighted cost of funding: theta * short + (1 - theta) * long."""
    theta = np.asarray(theta, dtype=float)
    if np.any((theta < 0) | (theta > 1)):
        raise ValueError(f"funding factor must lie in [0, 1], got {theta}")
    out = theta * short_spread + (1.0 - theta) * np.asarray(long_spread)
    return float(out) if np.ndim(out) == 0 else out


def funding_spreads_at(curve: CurveState, spreads: SpreadState, policy: FundingPolicy) -> SpreadQuad:
    """Zero rate plus CDS spread at the short and long funding tenors.

    Investing spreads mirror the funding ones.
    """
    ccy = spreads.spec.funding_currency
    if curve.currency is not None and curve.currency != ccy:
        raise ValueError(
            f"{spreads.spec.label} funds in {ccy} but the curve is in {curve.currency}"
        )
    short = interp_zero_rate(curve, policy.short_tenor) + spreads.spread_at(policy.short_tenor)
    long = interp_zero_rate(curve, policy.long_tenor) + spreads.spread_at(policy.long_tenor)
    return SpreadQuad(short, long, short, long)


def funding_requirement(P_hat):
    """(-P)^- - (-P)^+: positive when the hedge has to be financed."""
    m = -np.asarray(P_hat, dtype=float)
    out = np.maximum(-m, 0.0) - np.maximum(m, 0.0)
    return float(out) if out.ndim == 0 else out


def instantaneous_flow(P_hat, quad: SpreadQuad, theta, gamma, psi: float, regime: Regime | str):
    """Funding cost rate (per year) of holding ``-P_hat`` under ``regime``."""
    regime = Regime(regime)
    P_hat = np.asarray(P_hat, dtype=float)
    borrow = np.maximum(P_hat, 0.0)  # (-P)^-
    lend = np.maximum(-P_hat, 0.0)  # (-P)^+
    if regime is Regime.COLLATERALIZED:
        out = psi * P_hat
    else:
        cost = wcfs(theta, quad.short_funding, quad.long_funding)
        if regime is Regime.UNCOLLATERALIZED:
            out = cost * borrow - wcfs(gamma, quad.short_investing, quad.long_investing) * lend
        else:
            out = cost * borrow - psi * lend
    return float(out) if np.ndim(out) == 0 else out


def accrual_weight(t0: float, t1: float, stop_time):
    """Length of [t0, t1] that lies before ``stop_time``."""
    return np.clip(np.minimum(t1, stop_time) - t0, 0.0, None)


def accumulate_funding_loss(flows, discounts, grid: Sequence[float], stop_time) -> np.ndarray | float:
    """Left-point sum of D(0,t_j) F(t_j) over the grid, truncated at ``stop_time``.

    ``flows`` and ``discounts`` hold one value per grid point on the last
    axis (the final grid point only closes the last interval).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty grid")
    flows = np.asarray(flows, dtype=float)
    discounts = np.asarray(discounts, dtype=float)
    phi = np.zeros(flows.shape[:-1])
    for j in range(grid.size - 1):
        phi = phi + discounts[..., j] * flows[..., j] * accrual_weight(grid[j], grid[j + 1], stop_time)
    return float(phi) if phi.ndim == 0 else phi


def distribution_stats(samples) -> LossDistribution:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    return LossDistribution(
        samples=np.sort(x),
        mean=stats.mean(x),
        stderr=stats.standard_error(x),
        prob_positive=float(np.count_nonzero(x > 0)) / x.size,
    )


def fva(samples) -> Estimate:
    """Mean of the funding loss with its standard error."""
    d = distribution_stats(samples)
    return Estimate(d.mean, d.stderr)


def fra(dist: LossDistribution, statistic: str = "mean", alpha: float | None = None) -> float:
    """Risk statistic of the funding loss: ``mean``, ``quantile`` or ``tail``."""
    if statistic == "mean":
        return dist.mean
    if alpha is None or not 0.0 < alpha < 1.0:
        raise ValueError(f"statistic {statistic!r} needs a level in (0, 1), got {alpha}")
    if statistic == "quantile":
        return dist.quantile(alpha)
    if statistic == "tail":
        return dist.tail(alpha)
    raise ValueError(f"unknown statistic {statistic!r}")


def frcva(fra_value: float, cva_value: float, fra_currency: str = "EUR", cva_currency: str = "EUR") -> float:
    if fra_currency != cva_currency:
        raise ValueError(f"currency mismatch: FRA in {fra_currency}, CVA in {cva_currency}")
    return fra_value + cva_value
