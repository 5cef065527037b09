"""Settlement values, loss given default and Monte-Carlo CVA.

Replacement cost is taken to be the risk-free value ``P``. Index 1 is the
investor, index 2 the counterparty; ``P`` is always the investor's value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import stats


@dataclass(frozen=True)
class CollateralState:
    posted_by_counterparty: float = 0.0
    posted_by_investor: float = 0.0

    def __post_init__(self):
        if self.posted_by_counterparty < 0 or self.posted_by_investor < 0:
            raise ValueError("collateral amounts must be nonnegative")


@dataclass(frozen=True)
class DefaultScenarios:
    """Per-path default times with exposure and discount sampled at default.

    ``exposure_at_tau2`` / ``discount_at_tau2`` are only read where the
    counterparty defaults first and before ``maturity`` (same for tau1).
    """

    tau1: np.ndarray
    tau2: np.ndarray
    maturity: float
    exposure_at_tau1: np.ndarray
    exposure_at_tau2: np.ndarray
    discount_at_tau1: np.ndarray
    discount_at_tau2: np.ndarray

    @classmethod
    def build(cls, tau1, tau2, maturity, exposure_at_tau1=None, exposure_at_tau2=None,
              discount_at_tau1=None, discount_at_tau2=None):
        tau1 = np.asarray(tau1, dtype=float)
        tau2 = np.asarray(tau2, dtype=float)
        n = tau2.shape
        z = np.zeros(n)
        o = np.ones(n)

        def arr(x, fill):
            return fill if x is None else np.broadcast_to(np.asarray(x, dtype=float), n)

        return cls(tau1, tau2, float(maturity), arr(exposure_at_tau1, z),
                   arr(exposure_at_tau2, z), arr(discount_at_tau1, o), arr(discount_at_tau2, o))

    @property
    def n_paths(self) -> int:
        return self.tau2.size

    def counterparty_first(self) -> np.ndarray:
        return (self.tau2 < self.tau1) & (self.tau2 < self.maturity)

    def investor_first(self) -> np.ndarray:
        return (self.tau1 < self.tau2) & (self.tau1 < self.maturity)


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float

    def as_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr}


def settlement_value(P, R2):
    """R2 * P^+ - P^-."""
    P = np.asarray(P, dtype=float)
    out = R2 * np.maximum(P, 0.0) - np.maximum(-P, 0.0)
    return float(out) if out.ndim == 0 else out


def lgd_uncollateralized(P, R2):
    """(1 - R2) * P^+."""
    out = (1.0 - R2) * np.maximum(np.asarray(P, dtype=float), 0.0)
    return float(out) if out.ndim == 0 else out


def lgd_collateralized(P, R2, col: CollateralState):
    """(1 - R2) [1{P>=0} (P - C+)^+ + 1{P<0} (P + C-)^+]."""
    P = np.asarray(P, dtype=float)
    cp = col.posted_by_counterparty
    cm = col.posted_by_investor
    loss = np.where(P >= 0, np.maximum(P - cp, 0.0), np.maximum(P + cm, 0.0))
    out = (1.0 - R2) * loss
    return float(out) if out.ndim == 0 else out


def _mc(contrib) -> Estimate:
    contrib = np.asarray(contrib, dtype=float)
    if contrib.size == 0:
        raise ValueError("no scenarios")
    return Estimate(stats.mean(contrib), stats.standard_error(contrib))


def cva_contributions(sc: DefaultScenarios, R2: float) -> np.ndarray:
    hit = sc.counterparty_first()
    return np.where(hit, sc.discount_at_tau2 * lgd_uncollateralized(sc.exposure_at_tau2, R2), 0.0)


def dva_contributions(sc: DefaultScenarios, R1: float) -> np.ndarray:
    """Counterparty's discounted loss (1 - R1) (-P)^+ on investor-first default."""
    hit = sc.investor_first()
    return np.where(hit, sc.discount_at_tau1 * lgd_uncollateralized(-sc.exposure_at_tau1, R1), 0.0)


def cva_unilateral(sc: DefaultScenarios, R2: float) -> Estimate:
    """E[D(0,tau2) (1-R2) P(tau2)^+ 1{tau2 < min(tau1, T)}]."""
    return _mc(cva_contributions(sc, R2))


def cva_bilateral(sc: DefaultScenarios, R1: float, R2: float) -> Estimate:
    """Investor-side expected loss minus counterparty-side expected loss."""
    return _mc(cva_contributions(sc, R2) - dva_contributions(sc, R1))

