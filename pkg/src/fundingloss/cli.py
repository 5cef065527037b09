"""Command line entry point: ``fundingloss --config run.toml``.

Exit codes: 0 success, 1 invalid configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import ConfigError, load_config
from .engine import run
from .report import write_report

OUT_DIR_ENV = "FUNDINGLOSS_OUT_DIR"

log = logging.getLogger("fundingloss")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fundingloss",
        description="Monte-Carlo funding loss, exposure and CVA of interest rate swaps.",
    )
    p.add_argument("--config", required=True, help="TOML configuration file")
    p.add_argument("--seed", type=int, help="override simulation.seed")
    p.add_argument("--paths", type=int, help="override simulation.paths")
    p.add_argument("--theta", type=float, help="override funding_policy.funding_factor")
    p.add_argument("--out", help=f"output directory (default: ${OUT_DIR_ENV} or report.output_dir)")
    p.add_argument(
        "--default-mode",
        choices=["simulate", "counterparty_default_free", "both_default_free"],
        help="override simulation.default_mode",
    )
    p.add_argument("--workers", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        cfg = cfg.with_overrides(
            seed=args.seed,
            paths=args.paths,
            theta=args.theta,
            default_mode=args.default_mode,
            output_dir=args.out or os.environ.get(OUT_DIR_ENV),
        )
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    if args.workers < 1:
        print("configuration error: --workers must be >= 1", file=sys.stderr)
        return 1

    try:
        report = run(cfg, workers=args.workers)
        files = write_report(report, cfg.report.output_dir, cfg.report.histogram_bins)
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit code 2
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2

    for s in report.swaps:
        inv = s.investor.distribution
        print(
            f"{s.name}: CVA {s.cva_unilateral.value:,.0f} (se {s.cva_unilateral.stderr:,.0f})  "
            f"FVA {inv.mean:,.0f} {s.investor.currency} (se {inv.stderr:,.0f})  "
            f"FRCVA {s.frcva_mean:,.0f}"
        )
    print(f"wrote {len(files)} files to {cfg.report.output_dir} in {report.wall_time:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
