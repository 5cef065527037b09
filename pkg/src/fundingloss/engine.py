"""Monte-Carlo path engine.

Random inputs of path ``p`` come from a Philox stream keyed by
``(seed, p)``: two uniforms for the default times, then an
``(n_steps, n_drivers)`` block of standard normals. Paths are processed in
chunks of fixed size, so the numbers produced do not depend on how many
workers share the chunks.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .config import SimulationConfig
from .credit_fx import (
    DefaultMode,
    SpreadState,
    composite_driver,
    default_time,
    evolve_fx,
    evolve_spread_5y,
)
from .credit_valuation import DefaultScenarios, Estimate, cva_bilateral, cva_unilateral
from .funding import (
    LossDistribution,
    accrual_weight,
    distribution_stats,
    frcva,
    funding_spreads_at,
    instantaneous_flow,
)
from .instruments import ExposureProfile, exposure_stats, fixing_discount, reset_position, swap_price
from .rates import CurveState, cholesky, correlated_draws, ou_variance

log = logging.getLogger(__name__)

CHUNK_SIZE = 1024


class SimulationError(RuntimeError):
    pass


def path_generator(seed: int, path: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(path << 64) | seed))


_MASK64 = (1 << 64) - 1
_SHIFT11 = np.uint64(11)


def _philox_state(seed: int, path: int) -> dict:
    """State of a fresh ``path_generator(seed, path)``."""
    key = (path << 64) | seed
    return {
        "bit_generator": "Philox",
        "state": {"counter": np.zeros(4, np.uint64), "key": np.array([key & _MASK64, key >> 64], np.uint64)},
        "buffer": np.zeros(4, np.uint64),
        "buffer_pos": 4,
        "has_uint32": 0,
        "uinteger": 0,
    }


def draw_path_inputs(seed: int, start: int, stop: int, n_steps: int, n_drivers: int):
    """Uniforms ``(p, 2)`` in (0, 1) and normals ``(p, n_steps, n_drivers)``."""
    p = stop - start
    uniforms = np.empty((p, 2))
    normals = np.empty((p, n_steps, n_drivers))
    # one bit generator re-keyed per path: same streams as path_generator, less setup
    bits = np.random.Philox(0)
    g = np.random.Generator(bits)
    for i in range(p):
        bits.state = _philox_state(seed, start + i)
        # same values as g.integers(0, 2**53): for a 2^53 range the multiply-shift
        # reduction is a plain shift and never rejects
        uniforms[i] = bits.random_raw(2) >> _SHIFT11
        g.standard_normal(out=normals[i])
    # midpoint of a 2^-53 lattice cell: never 0 or 1
    uniforms += 0.5
    uniforms /= 2.0**53
    return uniforms, normals


@dataclass(frozen=True)
class _CurveBlock:
    currency: str
    tenors: np.ndarray
    drivers: slice
    levels: np.ndarray  # (n_grid, n_pillars) z_i(t_j)
    half_var: np.ndarray  # (n_grid, n_pillars) nu_i^2(t_j) / 2
    decay: np.ndarray  # (n_steps, n_pillars)
    innov: np.ndarray  # (n_steps, n_pillars)


class MarketModel:
    """Time-grid tables and the correlation factor derived from a config."""

    def __init__(self, cfg: SimulationConfig):
        self.cfg = cfg
        self.grid = cfg.grid
        self.n_steps = cfg.n_steps
        self.dt = np.diff(self.grid)
        self.chol = cholesky(np.array(cfg.correlation))
        self.n_drivers = cfg.n_drivers
        blocks = []
        col = 0
        for c in cfg.curves:
            n = len(c.pillars)
            levels = np.array([[p.forward_level(t) for p in c.pillars] for t in self.grid])
            half_var = 0.5 * np.array([ou_variance(p.ou, self.grid) for p in c.pillars]).T
            lam = np.array([p.ou.mean_reversion for p in c.pillars])
            decay = np.exp(-np.outer(self.dt, lam))
            innov = np.sqrt(np.array([ou_variance(p.ou, self.dt) for p in c.pillars]).T)
            blocks.append(_CurveBlock(c.currency, c.tenors, slice(col, col + n), levels, half_var, decay, innov))
            col += n
        self.curves = blocks
        self.n_rate_drivers = col
        k = cfg.n_indices
        self.index_cols = slice(col, col + k)
        self.idio_cols = (col + k, col + k + 1)
        self.fx_col = col + k + 2


@dataclass
class MarketSnapshot:
    """State of every risk factor on a chunk of paths at grid point ``j``."""

    j: int
    t: float
    curves: dict[str, CurveState]
    ou_states: dict[str, np.ndarray]
    kappa5: tuple[np.ndarray, np.ndarray]
    fx: np.ndarray
    discount: dict[str, np.ndarray]
    tau1: np.ndarray
    tau2: np.ndarray
    # correlated shocks moving the state from t_j to t_{j+1}; None at the end
    shocks: np.ndarray | None = field(default=None, repr=False)


def iter_market(model: MarketModel, start: int, stop: int) -> Iterator[MarketSnapshot]:
    cfg = model.cfg
    p = stop - start
    uniforms, normals = draw_path_inputs(cfg.seed, start, stop, model.n_steps, model.n_drivers)
    normals = correlated_draws(model.chol, normals)
    mode = cfg.default_mode
    tau1 = default_time(cfg.investor, uniforms[:, 0], cfg.horizon,
                        default_free=mode is DefaultMode.BOTH_DEFAULT_FREE)
    tau2 = default_time(cfg.counterparty, uniforms[:, 1], cfg.horizon,
                        default_free=mode is not DefaultMode.SIMULATE)

    X = {b.currency: np.zeros((p, b.tenors.size)) for b in model.curves}
    W = np.zeros((p, model.n_drivers - model.n_rate_drivers))
    nr = model.n_rate_drivers
    k = cfg.n_indices
    D = {b.currency: np.ones(p) for b in model.curves}
    inv, cp = cfg.investor, cfg.counterparty

    for j, t in enumerate(model.grid):
        t = float(t)
        curves = {
            b.currency: CurveState(t, b.tenors, b.levels[j] * np.exp(X[b.currency] - b.half_var[j]), b.currency)
            for b in model.curves
        }
        idx = W[:, :k]
        k1 = evolve_spread_5y(inv.five_year_spread, inv.spread_vol,
                              composite_driver(inv.betas, idx, W[:, k]), t)
        k2 = evolve_spread_5y(cp.five_year_spread, cp.spread_vol,
                              composite_driver(cp.betas, idx, W[:, k + 1]), t)
        eta = evolve_fx(cfg.fx.spot, cfg.fx.volatility, W[:, k + 2], t)
        shocks = normals[:, j, :] if j < model.n_steps else None
        yield MarketSnapshot(j, t, curves, X, (k1, k2), eta, D, tau1, tau2, shocks)
        if shocks is None:
            break
        dt = model.dt[j]
        X = {
            b.currency: X[b.currency] * b.decay[j] + b.innov[j] * shocks[:, b.drivers]
            for b in model.curves
        }
        W = W + math.sqrt(dt) * shocks[:, nr:]
        # overnight proxy: shortest pillar
        D = {c: D[c] * np.exp(-curves[c].pillar_rates[:, 0] * dt) for c in D}


@dataclass
class _ChunkResult:
    prices: dict[str, np.ndarray]
    phi_investor: dict[str, np.ndarray]
    phi_counterparty: dict[str, np.ndarray]
    fx_at_stop: dict[str, np.ndarray]
    tau1: np.ndarray
    tau2: np.ndarray
    exposure_at_tau1: dict[str, np.ndarray]
    exposure_at_tau2: dict[str, np.ndarray]
    discount_at_tau1: dict[str, np.ndarray]
    discount_at_tau2: dict[str, np.ndarray]


def _first_grid_index(grid: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Index of the first grid point at or after each time (len(grid) if none)."""
    return np.searchsorted(grid, times - 1e-12, side="left")


def simulate_chunk(model: MarketModel, start: int, stop: int) -> _ChunkResult:
    cfg = model.cfg
    policy = cfg.funding
    base = cfg.base_currency
    cp_ccy = cfg.counterparty.funding_currency
    p = stop - start
    n_grid = model.grid.size
    swaps = cfg.swaps

    prices = {s.name: np.zeros((p, n_grid)) for s in swaps}
    phi1 = {s.name: np.zeros(p) for s in swaps}
    phi2 = {s.name: np.zeros(p) for s in swaps}
    fx_stop = {s.name: np.ones(p) for s in swaps}
    e1 = {s.name: np.zeros(p) for s in swaps}
    e2 = {s.name: np.zeros(p) for s in swaps}
    d1 = {s.name: np.ones(p) for s in swaps}
    d2 = {s.name: np.ones(p) for s in swaps}
    fixings: dict[str, tuple[int, np.ndarray | None]] = {s.name: (-1, None) for s in swaps}

    stop_time = j_stop = j1 = j2 = None
    for snap in iter_market(model, start, stop):
        if stop_time is None:
            first = np.minimum(snap.tau1, snap.tau2)
            stop_time = {s.name: np.minimum(first, s.maturity) for s in swaps}
            j_stop = {n: np.minimum(_first_grid_index(model.grid, st), n_grid - 1) for n, st in stop_time.items()}
            j1 = _first_grid_index(model.grid, snap.tau1)
            j2 = _first_grid_index(model.grid, snap.tau2)
        j, t = snap.j, snap.t
        t_next = float(model.grid[j + 1]) if j + 1 < n_grid else None
        theta, gamma = policy.theta(t), policy.gamma(t)
        quad1 = funding_spreads_at(snap.curves[base], SpreadState(t, cfg.investor, snap.kappa5[0]), policy)
        quad2 = funding_spreads_at(snap.curves[cp_ccy], SpreadState(t, cfg.counterparty, snap.kappa5[1]), policy)
        hit1 = j1 == j
        hit2 = j2 == j
        for s in swaps:
            name = s.name
            if t > s.maturity + 1e-9:
                P = np.zeros(p)
            else:
                curve = snap.curves[s.currency]
                k, on_date = reset_position(s, t)
                fixed_k, fixing = fixings[name]
                if t >= s.schedule[0] - 1e-9 and k < s.m and k > fixed_k:
                    # first grid point at or after reset k
                    fixing = fixing_discount(curve, s, k)
                    fixings[name] = (k, fixing)
                P = swap_price(curve, s, t, fixing)
            prices[name][:, j] = P
            if hit1.any():
                e1[name][hit1] = P[hit1]
                d1[name][hit1] = snap.discount[base][hit1]
            if hit2.any():
                e2[name][hit2] = P[hit2]
                d2[name][hit2] = snap.discount[base][hit2]
            at_stop = j_stop[name] == j
            if at_stop.any():
                fx_stop[name][at_stop] = snap.fx[at_stop]
            if t_next is None:
                continue
            w = accrual_weight(t, t_next, stop_time[name])
            F1 = instantaneous_flow(P, quad1, theta, gamma, policy.csa_rate, policy.regime)
            phi1[name] = phi1[name] + snap.discount[base] * F1 * w
            P2 = -P * snap.fx if cp_ccy != base else -P
            F2 = instantaneous_flow(P2, quad2, theta, gamma, policy.csa_rate, policy.regime)
            phi2[name] = phi2[name] + snap.discount[cp_ccy] * F2 * w

    return _ChunkResult(prices, phi1, phi2, fx_stop, snap.tau1, snap.tau2, e1, e2, d1, d2)


# -- reduction -------------------------------------------------------------


@dataclass
class FundingReport:
    """Funding loss statistics for one obligor, in its funding currency."""

    label: str
    currency: str
    samples: np.ndarray  # path order
    distribution: LossDistribution
    quantiles: dict[float, float]
    tails: dict[float, float]

    @property
    def fva(self) -> Estimate:
        return Estimate(self.distribution.mean, self.distribution.stderr)


@dataclass
class SwapReport:
    name: str
    exposure: ExposureProfile
    investor: FundingReport
    counterparty: FundingReport
    counterparty_base_samples: np.ndarray
    cva_unilateral: Estimate
    cva_bilateral: Estimate
    frcva_mean: float
    frcva_quantiles: dict[float, float]


@dataclass
class RunReport:
    metadata: dict
    swaps: list[SwapReport]
    wall_time: float = 0.0

    def swap(self, name: str) -> SwapReport:
        for s in self.swaps:
            if s.name == name:
                return s
        raise KeyError(name)


def _funding_report(label: str, ccy: str, samples: np.ndarray, levels) -> FundingReport:
    dist = distribution_stats(samples)
    return FundingReport(
        label, ccy, samples, dist,
        quantiles={q: dist.quantile(q) for q in levels},
        tails={q: dist.tail(q) for q in levels},
    )


def run_metadata(cfg: SimulationConfig) -> dict:
    f = cfg.funding
    return {
        "seed": cfg.seed,
        "path_count": cfg.paths,
        "horizon": cfg.horizon,
        "step": cfg.step,
        "grid_points": int(cfg.grid.size),
        "default_mode": cfg.default_mode.value,
        "regime": f.regime.value,
        "funding_factor": {"times": list(f.funding_factor.times), "values": list(f.funding_factor.values)},
        "base_currency": cfg.base_currency,
        "counterparty_currency": cfg.counterparty.funding_currency,
    }


def run(cfg: SimulationConfig, workers: int = 1, chunk_size: int = CHUNK_SIZE) -> RunReport:
    """Simulate ``cfg.paths`` paths and reduce them to a :class:`RunReport`."""
    t0 = time.perf_counter()
    model = MarketModel(cfg)
    chunks = [(a, min(a + chunk_size, cfg.paths)) for a in range(0, cfg.paths, chunk_size)]
    log.info("simulating %d paths in %d chunks on %d workers", cfg.paths, len(chunks), workers)

    def work(bounds):
        a, b = bounds
        try:
            return simulate_chunk(model, a, b)
        except MemoryError:
            raise SimulationError(f"out of memory simulating paths {a}..{b - 1}") from None

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]

    def cat(attr, name=None):
        parts = [getattr(r, attr) if name is None else getattr(r, attr)[name] for r in results]
        return np.concatenate(parts, axis=0)

    tau1, tau2 = cat("tau1"), cat("tau2")
    levels = cfg.report.quantiles
    reports = []
    for s in cfg.swaps:
        prices = cat("prices", s.name)
        exposure = exposure_stats(prices, cfg.grid, (0.95, 0.99))
        phi1 = cat("phi_investor", s.name)
        phi2 = cat("phi_counterparty", s.name)
        fx_stop = cat("fx_at_stop", s.name)
        base_phi2 = phi2 / fx_stop if cfg.counterparty.funding_currency != cfg.base_currency else phi2
        inv = _funding_report("investor", cfg.base_currency, phi1, levels)
        cpty = _funding_report("counterparty", cfg.counterparty.funding_currency, phi2, levels)
        sc = DefaultScenarios.build(
            tau1, tau2, s.maturity,
            exposure_at_tau1=cat("exposure_at_tau1", s.name),
            exposure_at_tau2=cat("exposure_at_tau2", s.name),
            discount_at_tau1=cat("discount_at_tau1", s.name),
            discount_at_tau2=cat("discount_at_tau2", s.name),
        )
        cva_u = cva_unilateral(sc, cfg.counterparty.recovery)
        cva_b = cva_bilateral(sc, cfg.investor.recovery, cfg.counterparty.recovery)
        reports.append(SwapReport(
            name=s.name,
            exposure=exposure,
            investor=inv,
            counterparty=cpty,
            counterparty_base_samples=base_phi2,
            cva_unilateral=cva_u,
            cva_bilateral=cva_b,
            frcva_mean=frcva(inv.distribution.mean, cva_u.value),
            frcva_quantiles={q: frcva(v, cva_u.value) for q, v in inv.quantiles.items()},
        ))
    return RunReport(run_metadata(cfg), reports, time.perf_counter() - t0)
