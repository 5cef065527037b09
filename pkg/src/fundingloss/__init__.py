"""Funding loss distribution, exposure and CVA of swaps with bilateral counterparty risk."""

from .config import ConfigError, SimulationConfig, load_config, loads_config
from .engine import RunReport, run
from .report import write_report

__version__ = "0.1.0"

__all__ = ["ConfigError", "RunReport", "SimulationConfig", "load_config", "loads_config", "run", "write_report"]
