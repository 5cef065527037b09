"""Zero-rate term structure simulation.

Each pillar zero rate is an exponential Ornstein-Uhlenbeck process around a
deterministic level::

    Z_i(t) = z_i(t) * exp(X_i(t) - nu_i^2(t) / 2)
    dX_i   = -lambda_i X_i dt + sigma_i dW_i,   X_i(0) = 0

so that ``E[Z_i(t)] = z_i(t)``. Curves between pillars are linear in the
continuously compounded rate with flat extrapolation.

All functions broadcast over a leading path axis: a ``CurveState`` may hold
``pillar_rates`` of shape ``(n_pillars,)`` or ``(n_paths, n_pillars)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_TENORS = (0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 20.0, 30.0)


class NotPositiveSemiDefiniteError(ValueError):
    """Raised when a correlation matrix cannot be factorized."""

    def __init__(self, minor: int, pivot: float):
        self.minor = minor
        self.pivot = pivot
        super().__init__(
            f"correlation matrix is not positive semi-definite: "
            f"leading minor {minor} has pivot {pivot:.3e}"
        )


@dataclass(frozen=True)
class OUParams:
    mean_reversion: float
    volatility: float

    def __post_init__(self):
        if not self.mean_reversion > 0:
            raise ValueError(f"mean_reversion must be > 0, got {self.mean_reversion}")
        if not self.volatility >= 0:
            raise ValueError(f"volatility must be >= 0, got {self.volatility}")

    @property
    def long_term_variance(self) -> float:
        return self.volatility**2 / (2.0 * self.mean_reversion)


@dataclass(frozen=True)
class LevelSchedule:
    """Deterministic function of time, linear between knots, flat outside.

    A single knot gives a constant level.
    """

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.times) != len(self.values) or not self.times:
            raise ValueError("times and values must be non-empty and of equal length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("schedule times must be strictly increasing")

    @classmethod
    def constant(cls, value: float) -> "LevelSchedule":
        return cls((0.0,), (float(value),))

    def __call__(self, t: float) -> float:
        if len(self.times) == 1:
            return self.values[0]
        return float(np.interp(t, self.times, self.values))


@dataclass(frozen=True)
class PillarModel:
    tenor: float
    forward_level: LevelSchedule
    ou: OUParams

    def __post_init__(self):
        if not self.tenor > 0:
            raise ValueError(f"pillar tenor must be > 0, got {self.tenor}")
        if min(self.forward_level.values) <= 0:
            raise ValueError(f"forward level of the {self.tenor}y pillar must be positive")


@dataclass(frozen=True)
class CurveState:
    """Pillar zero rates observed at ``time``."""

    time: float
    tenors: np.ndarray
    pillar_rates: np.ndarray = field(repr=False)
    currency: str | None = None

    def __post_init__(self):
        tenors = np.asarray(self.tenors, dtype=float)
        rates = np.asarray(self.pillar_rates, dtype=float)
        if tenors.ndim != 1 or tenors.size == 0:
            raise ValueError("curve needs at least one pillar")
        if rates.shape[-1] != tenors.size:
            raise ValueError(
                f"pillar_rates last axis ({rates.shape[-1]}) does not match "
                f"the {tenors.size} tenors"
            )
        if np.any(np.diff(tenors) <= 0):
            raise ValueError("tenors must be strictly increasing")
        object.__setattr__(self, "tenors", tenors)
        object.__setattr__(self, "pillar_rates", rates)

    @classmethod
    def flat(cls, rate: float, tenors: Sequence[float] = DEFAULT_TENORS, time: float = 0.0,
             currency: str | None = None):
        return cls(time, np.asarray(tenors, dtype=float), np.full(len(tenors), rate), currency)


def ou_variance(ou: OUParams, t) -> np.ndarray | float:
    """Variance of X(t) started at 0: sigma^2 (1 - exp(-2 lambda t)) / (2 lambda)."""
    lam = ou.mean_reversion
    if not lam > 0:
        raise ValueError("mean_reversion must be > 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    out = ou.volatility**2 * -np.expm1(-2.0 * lam * t) / (2.0 * lam)
    return float(out) if out.ndim == 0 else out


def evolve_ou(x, dt: float, ou: OUParams, xi):
    """Exact transition of the OU state over ``dt`` with standard normal shock ``xi``."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    decay = math.exp(-ou.mean_reversion * dt)
    return x * decay + math.sqrt(ou_variance(ou, dt)) * xi


def pillar_rate(pm: PillarModel, x, t: float):
    """Pillar zero rate z(t) * exp(x - nu^2(t)/2)."""
    return pm.forward_level(t) * np.exp(x - 0.5 * ou_variance(pm.ou, t))


def _interp_weights(tenors: np.ndarray, maturity: np.ndarray):
    """Bracketing indices and linear weights, flat outside the pillar range."""
    m = np.clip(maturity, tenors[0], tenors[-1])
    hi = np.searchsorted(tenors, m, side="left")
    hi = np.clip(hi, 1, tenors.size - 1) if tenors.size > 1 else np.zeros_like(hi)
    lo = np.maximum(hi - 1, 0)
    span = tenors[hi] - tenors[lo]
    w = np.divide(m - tenors[lo], span, out=np.zeros_like(m), where=span > 0)
    return lo, hi, w


def interp_zero_rate(cs: CurveState, maturity):
    """Zero rate for residual maturity (or array of maturities).

    Result shape is ``cs.pillar_rates.shape[:-1] + np.shape(maturity)``.
    """
    maturity = np.asarray(maturity, dtype=float)
    lo, hi, w = _interp_weights(cs.tenors, maturity)
    r = cs.pillar_rates
    out = r[..., lo] * (1.0 - w) + r[..., hi] * w
    return float(out) if out.ndim == 0 else out


def discount_factor(cs: CurveState, maturity):
    """exp(-Z(T) * T) for residual maturity ``T``; equals 1 at ``T = 0``."""
    maturity = np.asarray(maturity, dtype=float)
    if np.any(maturity < 0):
        raise ValueError("maturity must be >= 0")
    out = np.exp(-interp_zero_rate(cs, maturity) * maturity)
    return float(out) if np.ndim(out) == 0 else out


def cholesky(rho, tol: float = 1e-12) -> np.ndarray:
    """Lower-triangular factor of a correlation matrix.

    Semi-definite matrices are accepted: a zero pivot yields a zero column.
    Raises :class:`NotPositiveSemiDefiniteError` naming the first leading
    minor whose pivot is negative.
    """
    a = np.asarray(rho, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape != (n, n):
        raise ValueError(f"correlation matrix must be square, got shape {a.shape}")
    if not np.allclose(a, a.T, atol=1e-12, rtol=0):
        raise ValueError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(a), 1.0, atol=1e-12, rtol=0):
        raise ValueError("correlation matrix must have a unit diagonal")
    if np.any(np.abs(a) > 1.0 + 1e-12):
        raise ValueError("correlation entries must lie in [-1, 1]")

    L = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if pivot < -tol:
            raise NotPositiveSemiDefiniteError(j + 1, pivot)
        if pivot <= tol:
            # zero pivot: the remaining column must vanish too
            resid = a[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]
            if np.any(np.abs(resid) > 1e-9):
                raise NotPositiveSemiDefiniteError(j + 1, pivot)
            continue
        L[j, j] = math.sqrt(pivot)
        L[j + 1 :, j] = (a[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def correlated_draws(L: np.ndarray, iid):
    """Map iid standard normals (last axis = drivers) to correlated ones.

    Accumulates column by column instead of calling BLAS, so every output
    element is summed in the same order whatever the batch shape.
    """
    iid = np.asarray(iid, dtype=float)
    L = np.asarray(L, dtype=float)
    if iid.shape[-1] != L.shape[1]:
        raise ValueError(
            f"draw dimension {iid.shape[-1]} does not match factor dimension {L.shape[1]}"
        )
    shape = iid.shape
    x = np.ascontiguousarray(np.moveaxis(iid, -1, 0)).reshape(shape[-1], -1)
    out = np.zeros((L.shape[0], x.shape[1]))
    tmp = np.empty(x.shape[1])
    for i in range(L.shape[0]):
        row = out[i]
        for k in range(L.shape[1]):
            if L[i, k] != 0.0:
                np.multiply(x[k], L[i, k], out=tmp)
                row += tmp  # 0 + a*x is exact, so the first term needs no special case
    return np.moveaxis(out.reshape((L.shape[0],) + shape[:-1]), 0, -1)
