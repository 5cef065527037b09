"""Acceptance gate: one test per criterion, each reported as PASS/FAIL.

Run with ``pytest tests/test_acceptance.py -v``; the PASS/FAIL lines appear
in the terminal summary.
"""

import math
import time

import numpy as np
import pytest
import tomli

from fundingloss.cli import main
from fundingloss.config import load_config, parse_config
from fundingloss.engine import CHUNK_SIZE, MarketModel, draw_path_inputs, iter_market, run, simulate_chunk
from fundingloss.funding import frcva
from fundingloss.instruments import SwapSpec, swap_price
from fundingloss.rates import CurveState, correlated_draws, ou_variance
from fundingloss.stats import quantile, tail_expectation

from conftest import EXAMPLE_CONFIG, Criterion, make_tree
from oracles import bisection, bond_sum_payer_value, cva_quadrature, flat_payer_value, sorted_quantile, sorted_tail


def example_tree():
    with open(EXAMPLE_CONFIG, "rb") as fh:
        return tomli.load(fh)


# -- 1 and 2: marginals of the simulated factors at t = 2 ----------------------------


@pytest.fixture(scope="module")
def two_year_factors():
    tree = example_tree()
    tree["simulation"].update(horizon=2.0, step=1 / 12, paths=100_000)
    tree["swaps"] = []
    cfg = parse_config(tree)
    model = MarketModel(cfg)
    assert model.n_steps == 24
    X, ratio, fx = {}, {}, []
    t0 = time.perf_counter()
    for a in range(0, cfg.paths, CHUNK_SIZE):
        for snap in iter_market(model, a, min(a + CHUNK_SIZE, cfg.paths)):
            pass
        fx.append(snap.fx)
        for b in model.curves:
            X.setdefault(b.currency, []).append(snap.ou_states[b.currency])
            ratio.setdefault(b.currency, []).append(snap.curves[b.currency].pillar_rates / b.levels[-1])
    elapsed = time.perf_counter() - t0
    X = {c: np.concatenate(v) for c, v in X.items()}
    ratio = {c: np.concatenate(v) for c, v in ratio.items()}
    return cfg, X, ratio, np.concatenate(fx) / cfg.fx.spot, elapsed


def test_c01_ou_marginals(two_year_factors):
    with Criterion(1, "OU marginal variance at t=2 within 3 SE, runtime < 5 s") as c:
        cfg, X, _, _, elapsed = two_year_factors
        worst = 0.0
        for curve in cfg.curves:
            x = X[curve.currency]
            n = x.shape[0]
            for i, pillar in enumerate(curve.pillars):
                col = x[:, i]
                s2 = col.var(ddof=1)
                m4 = np.mean((col - col.mean()) ** 4)
                se = math.sqrt((m4 - s2**2) / n)
                z = abs(s2 - ou_variance(pillar.ou, 2.0)) / se
                worst = max(worst, z)
                assert z < 3.0, f"{curve.currency} pillar {pillar.tenor}: {z:.2f} SE"
        c.detail = f"worst {worst:.2f} SE, {elapsed:.2f} s"
        assert elapsed < 5.0


def test_c02_lognormal_means(two_year_factors):
    with Criterion(2, "E[Z/z] and E[eta/eta0] within 3 SE of 1") as c:
        _, _, ratio, fx, _ = two_year_factors
        columns = [r[:, i] for r in ratio.values() for i in range(r.shape[1])] + [fx]
        worst = 0.0
        for col in columns:
            se = col.std(ddof=1) / math.sqrt(col.size)
            worst = max(worst, abs(col.mean() - 1.0) / se)
        c.detail = f"worst {worst:.2f} SE over {len(columns)} factors"
        assert worst < 3.0


# -- 3: correlation --------------------------------------------------------------------


def test_c03_correlation_fidelity():
    with Criterion(3, "empirical driver correlations within 0.02 of configured") as c:
        cfg = load_config(EXAMPLE_CONFIG)
        model = MarketModel(cfg)
        _, iid = draw_path_inputs(cfg.seed, 0, 4000, 25, model.n_drivers)
        draws = correlated_draws(model.chol, iid.reshape(-1, model.n_drivers))
        assert draws.shape[0] == 100_000
        err = np.max(np.abs(np.corrcoef(draws, rowvar=False) - np.array(cfg.correlation)))
        c.detail = f"max abs error {err:.4f}"
        assert err < 0.02


# -- 4: par swap -------------------------------------------------------------------------


def test_c04_par_swap_zero():
    with Criterion(4, "swap at par rate prices to |V| < 1e-9 N on a flat 3% curve") as c:
        N = 1e6
        dates = [1.0 + k for k in range(11)]
        par = bisection(lambda k: bond_sum_payer_value(0.03, N, k, dates), 0.0, 0.2)
        spec = SwapSpec("par", N, par, tuple(dates))
        v = float(swap_price(CurveState.flat(0.03, currency="EUR"), spec, 0.0))
        c.detail = f"par {par:.12f}, |V|/N {abs(v) / N:.2e}"
        assert abs(v) < 1e-9 * N


# -- 5: CVA against quadrature ----------------------------------------------------------------


def test_c05_cva_oracle():
    with Criterion(5, "MC CVA within 3 SE of quadrature, runtime < 30 s") as c:
        flat = {"tenors": [1.0, 3.0, 10.0], "levels": 0.04, "mean_reversion": 0.1, "volatility": 0.0}
        tree = make_tree(
            simulation={"horizon": 6.0, "step": 0.25, "paths": 100_000, "seed": 11, "default_mode": "simulate"},
            curves={"EUR": flat},
            obligors={
                # investor spread so small that it never defaults inside the horizon
                "investor": {"spreads": 1e-12, "spread_vol": 0.0, "recovery": 0.4},
                "counterparty": {"spreads": 0.02, "spread_vol": 0.0, "recovery": 0.4, "funding_currency": "EUR"},
            },
            fx={"volatility": 0.0},
            correlation=None,
        )
        del tree["curves"]["USD"]
        cfg = parse_config(tree)
        rep = run(cfg)
        s = rep.swaps[0]
        sched = cfg.swaps[0].schedule
        grid = cfg.grid.tolist()
        epe = [max(flat_payer_value(0.04, 1e6, 0.03, sched, t), 0.0) for t in grid]
        disc = [math.exp(-0.04 * t) for t in grid]
        ref = cva_quadrature(epe, disc, grid, 0.02 / 0.6, 0.4)
        est = s.cva_unilateral
        z = abs(est.value - ref) / est.stderr
        c.detail = f"MC {est.value:.2f} +/- {est.stderr:.2f}, oracle {ref:.2f}, {z:.2f} SE, {rep.wall_time:.1f} s"
        assert z < 3.0
        assert rep.wall_time < 30.0


# -- 6: theta affinity -------------------------------------------------------------------------


def test_c06_theta_affinity():
    with Criterion(6, "funding loss affine in theta per path (< 1e-12)") as c:
        base = load_config(EXAMPLE_CONFIG).with_overrides(paths=1000)
        phi = {th: run(base.with_overrides(theta=th)).swap("swap10y").investor.samples for th in (1.0, 0.6, 0.0)}
        mixed = 0.6 * phi[1.0] + 0.4 * phi[0.0]
        err = float(np.max(np.abs(phi[0.6] - mixed) / (1.0 + np.abs(phi[0.6]))))
        c.detail = f"max relative deviation {err:.2e}"
        assert err < 1e-12


# -- 7: table arithmetic ------------------------------------------------------------------------


def test_c07_table_arithmetic():
    with Criterion(7, "frcva table arithmetic exact"):
        assert frcva(-3_700, 2_500) == -1_200
        assert frcva(-14_000, 18_000) == 4_000


# -- 8 and 9: example configuration ---------------------------------------------------------------


@pytest.fixture(scope="module")
def example_runs():
    cfg = load_config(EXAMPLE_CONFIG).with_overrides(paths=50_000)
    return {th: run(cfg.with_overrides(theta=th)) for th in (1.0, 0.6, 0.4)}


@pytest.mark.slow
def test_c08_theta_risk(example_runs):
    with Criterion(8, "q95 of funding loss rises as theta falls, runtime < 2 min per run") as c:
        q = {th: {s.name: s.investor.distribution.quantile(0.95) for s in r.swaps} for th, r in example_runs.items()}
        times = [r.wall_time for r in example_runs.values()]
        c.detail = "; ".join(
            f"{n}: " + " / ".join(f"{q[th][n]:.0f}" for th in (1.0, 0.6, 0.4)) for n in ("swap10y", "swap30y")
        ) + f"; slowest run {max(times):.1f} s"
        for name in ("swap10y", "swap30y"):
            assert q[0.6][name] > q[1.0][name], name
        assert q[0.4]["swap30y"] > q[0.6]["swap30y"]
        assert max(times) < 120.0


@pytest.mark.slow
def test_c09_signs(example_runs):
    with Criterion(9, "bank mean funding loss negative, counterparty mean positive") as c:
        cfg = load_config(EXAMPLE_CONFIG)
        res = simulate_chunk(MarketModel(cfg), 0, 2048)
        rep = example_runs[1.0]
        parts = []
        for s in cfg.swaps:
            live = cfg.grid < s.maturity - 1e-9
            negative = float(np.mean(res.prices[s.name][:, live] < 0))
            r = rep.swap(s.name)
            m1, m2 = r.investor.distribution.mean, r.counterparty.distribution.mean
            parts.append(f"{s.name}: P<0 share {negative:.2f}, bank {m1:.0f}, cpty {m2:.0f}")
            assert negative > 0.5, f"{s.name}: exposure not mostly negative"
            assert m1 < 0 < m2, s.name
        c.detail = "; ".join(parts)


# -- 10: estimators ------------------------------------------------------------------------------------


def test_c10_estimator_oracles():
    with Criterion(10, "quantile and tail estimators equal sort-based oracle exactly") as c:
        rng = np.random.default_rng(20240610)
        checked = 0
        for i in range(200):
            n = int(rng.integers(1, 10_001))
            if i % 2:
                x = rng.integers(-20, 20, n).astype(float)  # heavy ties
            else:
                x = rng.normal(0.0, 1000.0, n)
            for alpha in (float(rng.uniform(0.001, 0.999)), 0.95, 0.99):
                assert quantile(x, alpha) == sorted_quantile(x, alpha), (i, n, alpha)
                assert tail_expectation(x, alpha) == sorted_tail(x, alpha), (i, n, alpha)
                checked += 1
        c.detail = f"{checked} vector/level pairs"


# -- 11: determinism -------------------------------------------------------------------------------------


def test_c11_determinism(tmp_path):
    with Criterion(11, "byte-identical outputs for 1 and 8 workers") as c:
        outs = {}
        for w in (1, 8):
            outs[w] = tmp_path / f"w{w}"
            code = main(["--config", str(EXAMPLE_CONFIG), "--paths", "3000", "--workers", str(w),
                         "--out", str(outs[w])])
            assert code == 0
        files = sorted(p.name for p in outs[1].iterdir() if p.name != "timing.json")
        assert files == sorted(p.name for p in outs[8].iterdir() if p.name != "timing.json")
        assert "summary.json" in files and any(f.endswith(".csv") for f in files)
        for name in files:
            assert (outs[1] / name).read_bytes() == (outs[8] / name).read_bytes(), name
        c.detail = f"{len(files)} files compared"
