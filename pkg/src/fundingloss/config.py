"""Simulation configuration: TOML loading, validation and serialization.

Driver order in the correlation matrix: the pillars of each ``[curves.*]``
table in declaration order, then the credit indices, the investor and
counterparty idiosyncratic drivers, and finally the FX driver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import tomli
import tomli_w

from .credit_fx import DefaultMode, ObligorSpec
from .funding import FactorSchedule, FundingPolicy, Regime
from .instruments import Direction, SwapSpec
from .rates import DEFAULT_TENORS, LevelSchedule, NotPositiveSemiDefiniteError, OUParams, PillarModel, cholesky


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is the dotted path of the culprit."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


@dataclass(frozen=True)
class CurveConfig:
    currency: str
    pillars: tuple[PillarModel, ...]

    @property
    def tenors(self) -> np.ndarray:
        return np.array([p.tenor for p in self.pillars])


@dataclass(frozen=True)
class FxConfig:
    spot: float = 1.0
    volatility: float = 0.0


@dataclass(frozen=True)
class ReportOptions:
    quantiles: tuple[float, ...] = (0.95, 0.99)
    histogram_bins: int = 50
    output_dir: str = "out"


@dataclass(frozen=True)
class SimulationConfig:
    horizon: float
    step: float
    paths: int
    seed: int
    curves: tuple[CurveConfig, ...]
    investor: ObligorSpec
    counterparty: ObligorSpec
    n_indices: int
    fx: FxConfig
    correlation: tuple[tuple[float, ...], ...]
    funding: FundingPolicy
    swaps: tuple[SwapSpec, ...]
    default_mode: DefaultMode = DefaultMode.SIMULATE
    report: ReportOptions = field(default_factory=ReportOptions)

    @property
    def n_steps(self) -> int:
        return round(self.horizon / self.step)

    @property
    def grid(self) -> np.ndarray:
        n = self.n_steps
        return self.horizon * np.arange(n + 1) / n

    @property
    def n_drivers(self) -> int:
        return sum(len(c.pillars) for c in self.curves) + self.n_indices + 3

    @property
    def base_currency(self) -> str:
        return self.investor.funding_currency

    def curve(self, currency: str) -> CurveConfig:
        for c in self.curves:
            if c.currency == currency:
                return c
        raise KeyError(currency)

    def with_overrides(self, *, seed=None, paths=None, theta=None, default_mode=None,
                       output_dir=None) -> "SimulationConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=_check_seed(seed, "seed"))
        if paths is not None:
            if int(paths) < 1:
                raise ConfigError("simulation.paths", "must be >= 1")
            cfg = replace(cfg, paths=int(paths))
        if theta is not None:
            try:
                factor = FactorSchedule.constant(theta)
            except ValueError as exc:
                raise ConfigError("funding_policy.funding_factor", str(exc)) from None
            cfg = replace(cfg, funding=replace(cfg.funding, funding_factor=factor))
        if default_mode is not None:
            try:
                cfg = replace(cfg, default_mode=DefaultMode(default_mode))
            except ValueError:
                raise ConfigError("simulation.default_mode", f"unknown mode {default_mode!r}") from None
        if output_dir is not None:
            cfg = replace(cfg, report=replace(cfg.report, output_dir=str(output_dir)))
        return cfg


# -- parsing helpers -------------------------------------------------------


def _get(tree: dict, key: str, path: str, default=...):
    if key in tree:
        return tree[key]
    if default is ...:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
    return default


def _num(value, path: str, *, lo=None, hi=None, lo_open=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(path, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(path, f"must be <= {hi}, got {v}")
    return v


def _table(tree: dict, key: str, path: str, default=...) -> dict:
    v = _get(tree, key, path, default)
    if not isinstance(v, dict):
        raise ConfigError(f"{path}.{key}" if path else key, "expected a table")
    return v


def _check_seed(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2**64:
        raise ConfigError(path, "seed must be an integer in [0, 2^64)")
    return value


def _per_pillar(value, n: int, path: str) -> list:
    if isinstance(value, list):
        if len(value) != n:
            raise ConfigError(path, f"expected {n} values (one per pillar), got {len(value)}")
        return value
    return [value] * n


def _level(value, path: str) -> LevelSchedule:
    if isinstance(value, dict):
        times = [_num(t, f"{path}.times", lo=0) for t in _get(value, "times", path)]
        vals = [_num(v, f"{path}.values", lo=0, lo_open=True) for v in _get(value, "values", path)]
        try:
            return LevelSchedule(tuple(times), tuple(vals))
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None
    return LevelSchedule.constant(_num(value, path, lo=0, lo_open=True))


def _factor(value, path: str) -> FactorSchedule:
    if isinstance(value, dict):
        times = [_num(t, f"{path}.times", lo=0) for t in _get(value, "times", path)]
        vals = [_num(v, f"{path}.values", lo=0, hi=1) for v in _get(value, "values", path)]
        try:
            return FactorSchedule(tuple(times), tuple(vals))
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None
    return FactorSchedule.constant(_num(value, path, lo=0, hi=1))


def _parse_curve(ccy: str, tree: dict) -> CurveConfig:
    path = f"curves.{ccy}"
    tenors = [_num(t, f"{path}.tenors", lo=0, lo_open=True) for t in _get(tree, "tenors", path, list(DEFAULT_TENORS))]
    if any(b <= a for a, b in zip(tenors, tenors[1:])):
        raise ConfigError(f"{path}.tenors", "must be strictly increasing")
    n = len(tenors)
    levels = _per_pillar(_get(tree, "levels", path), n, f"{path}.levels")
    lam = _per_pillar(_get(tree, "mean_reversion", path), n, f"{path}.mean_reversion")
    vol = _per_pillar(_get(tree, "volatility", path), n, f"{path}.volatility")
    pillars = []
    for i, T in enumerate(tenors):
        ou = OUParams(
            _num(lam[i], f"{path}.mean_reversion[{i}]", lo=0, lo_open=True),
            _num(vol[i], f"{path}.volatility[{i}]", lo=0),
        )
        pillars.append(PillarModel(T, _level(levels[i], f"{path}.levels[{i}]"), ou))
    return CurveConfig(ccy, tuple(pillars))


def _parse_obligor(label: str, tree: dict, n_indices: int) -> ObligorSpec:
    path = f"obligors.{label}"
    tenors = _get(tree, "spread_tenors", path, [3.0, 5.0, 10.0])
    spreads = _get(tree, "spreads", path)
    if not isinstance(spreads, list):
        spreads = [spreads] * len(tenors)
    if len(spreads) != len(tenors):
        raise ConfigError(f"{path}.spreads", f"expected {len(tenors)} values, got {len(spreads)}")
    curve = {
        _num(t, f"{path}.spread_tenors[{i}]", lo=0, lo_open=True): _num(s, f"{path}.spreads[{i}]", lo=0, lo_open=True)
        for i, (t, s) in enumerate(zip(tenors, spreads))
    }
    if 5.0 not in curve:
        raise ConfigError(f"{path}.spread_tenors", "must include the 5y pillar")
    betas = _get(tree, "betas", path, [0.0] * n_indices)
    if not isinstance(betas, list) or len(betas) != n_indices:
        raise ConfigError(f"{path}.betas", f"expected {n_indices} betas (one per credit index)")
    betas = tuple(_num(b, f"{path}.betas[{i}]", lo=-1, hi=1) for i, b in enumerate(betas))
    if sum(b * b for b in betas) > 1.0 + 1e-12:
        raise ConfigError(f"{path}.betas", "sum of squared betas exceeds 1")
    ccy = _get(tree, "funding_currency", path)
    if not isinstance(ccy, str):
        raise ConfigError(f"{path}.funding_currency", "expected a currency code")
    return ObligorSpec(
        label=label,
        spread_curve=curve,
        spread_vol=_num(_get(tree, "spread_vol", path), f"{path}.spread_vol", lo=0),
        betas=betas,
        recovery=_num(_get(tree, "recovery", path, 0.4), f"{path}.recovery", lo=0, hi=1),
        funding_currency=ccy,
    )


def _parse_swap(i: int, tree: dict) -> SwapSpec:
    path = f"swaps[{i}]"
    name = _get(tree, "name", path)
    if not isinstance(name, str) or not name or any(c in name for c in "/\\ "):
        raise ConfigError(f"{path}.name", "must be a non-empty name without spaces or slashes")
    direction = _get(tree, "direction", path, "payer")
    if direction not in ("payer", "receiver"):
        raise ConfigError(f"{path}.direction", "must be 'payer' or 'receiver'")
    notional = _num(_get(tree, "notional", path, 1e6), f"{path}.notional", lo=0, lo_open=True)
    rate = _num(_get(tree, "fixed_rate", path), f"{path}.fixed_rate")
    ccy = _get(tree, "currency", path, "EUR")
    try:
        if "schedule" in tree:
            sched = tuple(_num(t, f"{path}.schedule", lo=0) for t in tree["schedule"])
            return SwapSpec(name, notional, rate, sched, Direction(direction), ccy)
        return SwapSpec.forward_starting(
            name,
            start=_num(_get(tree, "start", path), f"{path}.start", lo=0),
            tenor=_num(_get(tree, "tenor", path), f"{path}.tenor", lo=0, lo_open=True),
            fixed_rate=rate,
            notional=notional,
            frequency=int(_num(_get(tree, "frequency", path, 1), f"{path}.frequency", lo=1)),
            direction=direction,
            currency=ccy,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from None


def _structured_correlation(tree: dict, curves, n_indices: int) -> np.ndarray:
    path = "correlation"
    beta = _num(_get(tree, "curve_decay", path), f"{path}.curve_decay", lo=0)
    cross = _num(tree.get("cross_currency", 0.0), f"{path}.cross_currency", lo=-1, hi=1)
    r_idx = _num(tree.get("rates_index", 0.0), f"{path}.rates_index", lo=-1, hi=1)
    idx_idx = _num(tree.get("index_index", 0.0), f"{path}.index_index", lo=-1, hi=1)
    r_fx = _num(tree.get("rates_fx", 0.0), f"{path}.rates_fx", lo=-1, hi=1)
    idx_fx = _num(tree.get("index_fx", 0.0), f"{path}.index_fx", lo=-1, hi=1)

    blocks = [(ci, p.tenor) for ci, c in enumerate(curves) for p in c.pillars]
    nr = len(blocks)
    n = nr + n_indices + 3
    rho = np.eye(n)
    for a, (ca, ta) in enumerate(blocks):
        for b, (cb, tb) in enumerate(blocks):
            if a != b:
                base = math.exp(-beta * abs(ta - tb))
                rho[a, b] = base if ca == cb else cross * base
    idx = slice(nr, nr + n_indices)
    rho[:nr, idx] = r_idx
    rho[idx, :nr] = r_idx
    for a in range(nr, nr + n_indices):
        for b in range(nr, nr + n_indices):
            if a != b:
                rho[a, b] = idx_idx
    fx = n - 1
    rho[:nr, fx] = rho[fx, :nr] = r_fx
    rho[idx, fx] = idx_fx
    rho[fx, idx] = idx_fx
    return rho


def parse_config(tree: dict) -> SimulationConfig:
    """Validate a parsed key tree and build the configuration."""
    sim = _table(tree, "simulation", "")
    horizon = _num(_get(sim, "horizon", "simulation"), "simulation.horizon", lo=0, lo_open=True)
    step = _num(_get(sim, "step", "simulation", 1.0 / 12.0), "simulation.step", lo=0, lo_open=True)
    ratio = horizon / step
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
        raise ConfigError("simulation.step", f"step {step} does not divide horizon {horizon} evenly")
    paths = _get(sim, "paths", "simulation")
    if isinstance(paths, bool) or not isinstance(paths, int) or paths < 1:
        raise ConfigError("simulation.paths", "must be an integer >= 1")
    seed = _check_seed(_get(sim, "seed", "simulation", 0), "simulation.seed")
    try:
        mode = DefaultMode(_get(sim, "default_mode", "simulation", "simulate"))
    except ValueError:
        raise ConfigError("simulation.default_mode", f"unknown mode {sim['default_mode']!r}") from None

    curves_tree = _table(tree, "curves", "")
    if not curves_tree:
        raise ConfigError("curves", "at least one curve is required")
    curves = tuple(_parse_curve(ccy, _table(curves_tree, ccy, "curves")) for ccy in curves_tree)

    credit = _table(tree, "credit", "", {})
    n_indices = _get(credit, "indices", "credit", 1)
    if isinstance(n_indices, bool) or not isinstance(n_indices, int) or n_indices < 0:
        raise ConfigError("credit.indices", "must be an integer >= 0")

    obl = _table(tree, "obligors", "")
    investor = _parse_obligor("investor", _table(obl, "investor", "obligors"), n_indices)
    counterparty = _parse_obligor("counterparty", _table(obl, "counterparty", "obligors"), n_indices)

    fx_tree = _table(tree, "fx", "", {})
    fx = FxConfig(
        spot=_num(fx_tree.get("spot", 1.0), "fx.spot", lo=0, lo_open=True),
        volatility=_num(fx_tree.get("volatility", 0.0), "fx.volatility", lo=0),
    )

    fund = _table(tree, "funding_policy", "", {})
    try:
        regime = Regime(fund.get("regime", "uncollateralized"))
    except ValueError:
        raise ConfigError("funding_policy.regime", f"unknown regime {fund['regime']!r}") from None
    short = _num(fund.get("short_tenor", 3.0), "funding_policy.short_tenor", lo=0, lo_open=True)
    long = _num(fund.get("long_tenor", 10.0), "funding_policy.long_tenor", lo=0, lo_open=True)
    if not short < long:
        raise ConfigError("funding_policy.short_tenor", "must be smaller than funding_policy.long_tenor")
    policy = FundingPolicy(
        regime=regime,
        funding_factor=_factor(fund.get("funding_factor", 1.0), "funding_policy.funding_factor"),
        investment_factor=(
            _factor(fund["investment_factor"], "funding_policy.investment_factor")
            if "investment_factor" in fund else None
        ),
        short_tenor=short,
        long_tenor=long,
        csa_rate=_num(fund.get("csa_rate", 0.0), "funding_policy.csa_rate"),
    )
    if regime is not Regime.COLLATERALIZED:
        for ob in (investor, counterparty):
            for tenor in (short, long):
                if tenor not in ob.spread_curve:
                    raise ConfigError(
                        f"obligors.{ob.label}.spread_tenors",
                        f"missing the {tenor}y funding tenor",
                    )

    swaps_tree = _get(tree, "swaps", "", [])
    if not isinstance(swaps_tree, list):
        raise ConfigError("swaps", "expected an array of tables")
    swaps = tuple(_parse_swap(i, s) for i, s in enumerate(swaps_tree))
    names = [s.name for s in swaps]
    if len(set(names)) != len(names):
        raise ConfigError("swaps", "swap names must be unique")

    currencies = {c.currency for c in curves}
    for label, ccy in (("investor", investor.funding_currency), ("counterparty", counterparty.funding_currency)):
        if ccy not in currencies:
            raise ConfigError(f"obligors.{label}.funding_currency", f"no curve configured for {ccy}")
    for i, s in enumerate(swaps):
        if s.currency != investor.funding_currency:
            raise ConfigError(
                f"swaps[{i}].currency",
                f"swaps must be in the investor currency {investor.funding_currency}",
            )
        if s.maturity > horizon + 1e-9:
            raise ConfigError(f"swaps[{i}]", f"maturity {s.maturity} exceeds horizon {horizon}")

    n_drivers = sum(len(c.pillars) for c in curves) + n_indices + 3
    corr_tree = _table(tree, "correlation", "", {})
    if "matrix" in corr_tree:
        m = corr_tree["matrix"]
        try:
            rho = np.array(m, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError("correlation.matrix", "expected a square array of numbers") from None
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ConfigError("correlation.matrix", f"expected a square matrix, got shape {rho.shape}")
        if rho.shape[0] != n_drivers:
            raise ConfigError(
                "correlation.matrix",
                f"dimension mismatch: matrix is {rho.shape[0]}x{rho.shape[1]} "
                f"but {n_drivers} drivers are declared",
            )
    elif corr_tree:
        rho = _structured_correlation(corr_tree, curves, n_indices)
    else:
        rho = np.eye(n_drivers)  # independent drivers
    try:
        cholesky(rho)
    except NotPositiveSemiDefiniteError as exc:
        raise ConfigError("correlation", str(exc)) from None
    except ValueError as exc:
        raise ConfigError("correlation", str(exc)) from None

    rep = _table(tree, "report", "", {})
    levels = rep.get("quantiles", [0.95, 0.99])
    if not isinstance(levels, list) or not levels:
        raise ConfigError("report.quantiles", "expected a non-empty array")
    levels = tuple(_num(q, f"report.quantiles[{i}]", lo=0, lo_open=True, hi=1) for i, q in enumerate(levels))
    if any(q >= 1 for q in levels):
        raise ConfigError("report.quantiles", "levels must lie in (0, 1)")
    bins = rep.get("histogram_bins", 50)
    if isinstance(bins, bool) or not isinstance(bins, int) or bins < 1:
        raise ConfigError("report.histogram_bins", "must be an integer >= 1")
    out = rep.get("output_dir", "out")
    if not isinstance(out, str):
        raise ConfigError("report.output_dir", "expected a path string")

    try:
        return SimulationConfig(
            horizon=horizon,
            step=step,
            paths=paths,
            seed=seed,
            curves=curves,
            investor=investor,
            counterparty=counterparty,
            n_indices=n_indices,
            fx=fx,
            correlation=tuple(tuple(float(x) for x in row) for row in rho),
            funding=policy,
            swaps=swaps,
            default_mode=mode,
            report=ReportOptions(levels, bins, out),
        )
    except ValueError as exc:
        raise ConfigError("", str(exc)) from None


def load_config(path: str | Path) -> SimulationConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc}") from None
    return loads_config(text, source=str(path))


def loads_config(text: str, source: str = "<string>") -> SimulationConfig:
    try:
        tree = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        # message carries "(at line L, column C)"
        raise ConfigError("", f"parse error in {source}: {exc}") from None
    return parse_config(tree)


# -- serialization ---------------------------------------------------------


def _level_tree(s: LevelSchedule):
    if len(s.times) == 1:
        return s.values[0]
    return {"times": list(s.times), "values": list(s.values)}


def _factor_tree(s: FactorSchedule):
    if s.is_constant:
        return s.values[0]
    return {"times": list(s.times), "values": list(s.values)}


def _obligor_tree(o: ObligorSpec) -> dict[str, Any]:
    return {
        "spread_tenors": [float(t) for t in o.tenors],
        "spreads": [float(s) for s in o.spreads],
        "spread_vol": o.spread_vol,
        "betas": list(o.betas),
        "recovery": o.recovery,
        "funding_currency": o.funding_currency,
    }


def config_to_tree(cfg: SimulationConfig) -> dict[str, Any]:
    fund: dict[str, Any] = {
        "regime": cfg.funding.regime.value,
        "funding_factor": _factor_tree(cfg.funding.funding_factor),
        "short_tenor": cfg.funding.short_tenor,
        "long_tenor": cfg.funding.long_tenor,
        "csa_rate": cfg.funding.csa_rate,
    }
    if cfg.funding.investment_factor is not None:
        fund["investment_factor"] = _factor_tree(cfg.funding.investment_factor)
    return {
        "simulation": {
            "horizon": cfg.horizon,
            "step": cfg.step,
            "paths": cfg.paths,
            "seed": cfg.seed,
            "default_mode": cfg.default_mode.value,
        },
        "curves": {
            c.currency: {
                "tenors": [p.tenor for p in c.pillars],
                "levels": [_level_tree(p.forward_level) for p in c.pillars],
                "mean_reversion": [p.ou.mean_reversion for p in c.pillars],
                "volatility": [p.ou.volatility for p in c.pillars],
            }
            for c in cfg.curves
        },
        "credit": {"indices": cfg.n_indices},
        "obligors": {
            "investor": _obligor_tree(cfg.investor),
            "counterparty": _obligor_tree(cfg.counterparty),
        },
        "fx": {"spot": cfg.fx.spot, "volatility": cfg.fx.volatility},
        "correlation": {"matrix": [list(r) for r in cfg.correlation]},
        "funding_policy": fund,
        "swaps": [
            {
                "name": s.name,
                "notional": s.notional,
                "fixed_rate": s.fixed_rate,
                "schedule": list(s.schedule),
                "direction": s.direction.value,
                "currency": s.currency,
            }
            for s in cfg.swaps
        ],
        "report": {
            "quantiles": list(cfg.report.quantiles),
            "histogram_bins": cfg.report.histogram_bins,
            "output_dir": cfg.report.output_dir,
        },
    }


def dumps_config(cfg: SimulationConfig) -> str:
    return tomli_w.dumps(config_to_tree(cfg))
