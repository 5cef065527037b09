import copy
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fundingloss.config import parse_config  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
EXAMPLE_CONFIG = ROOT / "configs" / "example.toml"

# Small two-currency setup: 3 pillars per curve, 1 credit index -> 10 drivers.
BASE_TREE = {
    "simulation": {"horizon": 6.0, "step": 0.25, "paths": 64, "seed": 7},
    "curves": {
        "EUR": {"tenors": [1.0, 3.0, 10.0], "levels": [0.02, 0.025, 0.03],
                "mean_reversion": 0.1, "volatility": 0.2},
        "USD": {"tenors": [1.0, 3.0, 10.0], "levels": [0.025, 0.03, 0.035],
                "mean_reversion": 0.1, "volatility": 0.2},
    },
    "credit": {"indices": 1},
    "obligors": {
        "investor": {"spreads": 0.0115, "spread_vol": 0.3, "betas": [0.5],
                     "funding_currency": "EUR"},
        "counterparty": {"spreads": 0.02, "spread_vol": 0.3, "betas": [0.5],
                         "funding_currency": "USD"},
    },
    "fx": {"spot": 1.1, "volatility": 0.1},
    "correlation": {"curve_decay": 0.05, "cross_currency": 0.5, "rates_index": 0.1},
    "funding_policy": {"funding_factor": 1.0},
    "swaps": [{"name": "s5", "start": 1.0, "tenor": 5, "fixed_rate": 0.03}],
}


def _merge(into: dict, update: dict) -> None:
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(into.get(key), dict):
            _merge(into[key], value)
        else:
            into[key] = copy.deepcopy(value)


def make_tree(**sections):
    """Deep copy of BASE_TREE with sections merged in recursively.

    Dicts merge into existing tables, other values replace, ``None`` drops
    a top-level section.
    """
    tree = copy.deepcopy(BASE_TREE)
    for key, value in sections.items():
        if value is None:
            tree.pop(key, None)
        else:
            _merge(tree, {key: value})
    return tree


def make_config(**sections):
    return parse_config(make_tree(**sections))


@pytest.fixture
def small_config():
    return make_config()


# -- acceptance reporting -----------------------------------------------------------

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


class Criterion:
    """Context manager recording PASS/FAIL of one acceptance criterion."""

    def __init__(self, number: int, title: str):
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        detail = self.detail if ok else f"{self.detail} {exc_type.__name__}: {exc}".strip()
        ACCEPTANCE[self.number] = (self.title, ok, detail.splitlines()[0] if detail else "")
        return False


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        line = f"{'PASS' if ok else 'FAIL'}  {n:>2}. {title}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)
