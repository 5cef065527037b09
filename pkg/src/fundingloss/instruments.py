"""Forward-starting interest rate swaps and their exposure profiles."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .rates import CurveState, discount_factor
from .stats import column_quantiles

# schedule dates closer than this to t count as "at" the date
DATE_TOL = 1e-9


class Direction(str, Enum):
    PAYER = "payer"
    RECEIVER = "receiver"

    @property
    def sign(self) -> float:
        return 1.0 if self is Direction.PAYER else -1.0


@dataclass(frozen=True)
class SwapSpec:
    """Swap exchanging floating for ``fixed_rate`` on ``schedule``.

    ``schedule`` is ``(T_0, ..., T_m)``: ``T_0`` is the first reset, payments
    fall on ``T_1 ... T_m``. ``direction`` is seen from the investor (bank).
    """

    name: str
    notional: float
    fixed_rate: float
    schedule: tuple[float, ...]
    direction: Direction = Direction.PAYER
    currency: str = "EUR"

    def __post_init__(self):
        sched = tuple(float(t) for t in self.schedule)
        if len(sched) < 2:
            raise ValueError(f"swap {self.name!r}: schedule needs at least two dates")
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError(f"swap {self.name!r}: schedule must be strictly increasing")
        if sched[0] < 0:
            raise ValueError(f"swap {self.name!r}: schedule must start at t >= 0")
        if not self.notional > 0:
            raise ValueError(f"swap {self.name!r}: notional must be > 0")
        object.__setattr__(self, "schedule", sched)
        object.__setattr__(self, "direction", Direction(self.direction))

    @classmethod
    def forward_starting(
        cls,
        name: str,
        start: float,
        tenor: float,
        fixed_rate: float,
        notional: float = 1e6,
        frequency: int = 1,
        direction: Direction | str = Direction.PAYER,
        currency: str = "EUR",
    ) -> "SwapSpec":
        n = round(tenor * frequency)
        if n < 1 or abs(n - tenor * frequency) > 1e-9:
            raise ValueError("tenor must be a whole number of periods")
        sched = tuple(start + k / frequency for k in range(n + 1))
        return cls(name, notional, fixed_rate, sched, Direction(direction), currency)

    @property
    def maturity(self) -> float:
        return self.schedule[-1]

    @property
    def m(self) -> int:
        return len(self.schedule) - 1

    @property
    def accruals(self) -> np.ndarray:
        return np.diff(self.schedule)


@dataclass(frozen=True)
class ExposureProfile:
    times: np.ndarray
    epe: np.ndarray
    q95: np.ndarray
    q99: np.ndarray


def cashflow_coefficients(spec: SwapSpec, first_reset_index: int) -> np.ndarray:
    """Coefficients c_l for l = i+1..m of the bond-replication formula.

    ``c_l = N kappa alpha_l`` except the last, ``c_m = N (1 + kappa) alpha_m``.
    """
    i = first_reset_index
    if not 0 <= i < spec.m:
        raise ValueError(f"first reset index must be in [0, {spec.m}), got {i}")
    alpha = spec.accruals[i:]
    c = spec.notional * spec.fixed_rate * alpha
    c[-1] = spec.notional * (1.0 + spec.fixed_rate) * alpha[-1]
    return c


def reset_position(spec: SwapSpec, t: float) -> tuple[int, bool]:
    """Index of the prevailing reset and whether ``t`` sits on it.

    Before ``T_0`` the prevailing reset is 0 (not yet fixed).
    """
    sched = np.asarray(spec.schedule)
    k = int(np.searchsorted(sched, t + DATE_TOL, side="right")) - 1
    if k < 0:
        return 0, False
    return k, abs(t - sched[k]) <= DATE_TOL


def fixing_discount(cs: CurveState, spec: SwapSpec, reset_index: int):
    """B(T_k, T_{k+1}) read off a curve observed at the reset date."""
    return discount_factor(cs, spec.accruals[reset_index])


def swap_price(cs: CurveState, spec: SwapSpec, t: float, fixing=None):
    """Risk-free value of the swap to the investor at time ``t``.

    Payer value is ``N B(t,T_i) - sum_{l>i} c_l B(t,T_l)``. Strictly between
    reset dates ``T_k < t < T_{k+1}`` the floating leg carries the fixing:
    ``N B(t,T_{k+1}) / B(T_k,T_{k+1})``, where ``fixing`` is that
    ``B(T_k, T_{k+1})`` (per path when the curve holds several paths).
    Values on a payment date are ex-coupon.
    """
    batch = cs.pillar_rates.shape[:-1]
    if t > spec.maturity + DATE_TOL:
        raise ValueError(f"swap {spec.name!r} expired at {spec.maturity}, valuation at {t}")
    if t >= spec.maturity - DATE_TOL:
        return np.zeros(batch) if batch else 0.0

    sched = np.asarray(spec.schedule)
    k, on_date = reset_position(spec, t)
    c = cashflow_coefficients(spec, k)
    bonds = discount_factor(cs, sched[k + 1 :] - t)
    fixed = 0.0
    for l in range(c.size):  # fixed order, no BLAS: results independent of batch size
        fixed = fixed + bonds[..., l] * c[l]
    if t < sched[0] - DATE_TOL:
        floating = spec.notional * discount_factor(cs, sched[0] - t)
    elif on_date:
        floating = spec.notional
    else:
        if fixing is None:
            raise ValueError(f"swap {spec.name!r}: fixing of reset {k} required at t={t}")
        floating = spec.notional * bonds[..., 0] / np.asarray(fixing)
    value = spec.direction.sign * (floating - fixed)
    return float(value) if np.ndim(value) == 0 else value


def exposure_stats(price_paths, times=None, levels=(0.95, 0.99)) -> ExposureProfile:
    """EPE and percentile exposures per time step of a (paths x times) matrix."""
    p = np.asarray(price_paths, dtype=float)
    if p.ndim != 2 or p.size == 0:
        raise ValueError("price_paths must be a non-empty (paths x times) matrix")
    pos = np.maximum(p, 0.0)
    times = np.arange(p.shape[1], dtype=float) if times is None else np.asarray(times, dtype=float)
    lo, hi = levels
    return ExposureProfile(
        times=times,
        epe=pos.mean(axis=0),
        q95=column_quantiles(pos, lo),
        q99=column_quantiles(pos, hi),
    )
