"""CSV / JSON rendering of a :class:`~fundingloss.engine.RunReport`.

Numbers are written with ``repr`` (shortest round-trip form of the double),
dot decimal separator and no grouping. Wall time goes to ``timing.json`` so
that ``summary.json`` stays byte-identical across reruns.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import stats
from .engine import FundingReport, RunReport, SwapReport


def _f(x) -> str:
    return repr(float(x))


def _level_key(q: float) -> str:
    return repr(float(q))


def _write_csv(path: Path, header, rows) -> None:
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _funding_summary(fr: FundingReport) -> dict:
    d = fr.distribution
    return {
        "currency": fr.currency,
        "fva": {"value": d.mean, "stderr": d.stderr},
        "fra_mean": d.mean,
        "prob_positive": d.prob_positive,
        "quantiles": {_level_key(q): v for q, v in fr.quantiles.items()},
        "tail_expectations": {_level_key(q): v for q, v in fr.tails.items()},
    }


def swap_summary(s: SwapReport, base_currency: str) -> dict:
    cpty = _funding_summary(s.counterparty)
    cpty["mean_in_" + base_currency] = stats.mean(s.counterparty_base_samples)
    return {
        "cva_unilateral": s.cva_unilateral.as_dict(),
        "cva_bilateral": s.cva_bilateral.as_dict(),
        "investor": _funding_summary(s.investor),
        "counterparty": cpty,
        "frcva_mean": s.frcva_mean,
        "frcva_quantiles": {_level_key(q): v for q, v in s.frcva_quantiles.items()},
        "peak_epe": float(s.exposure.epe.max()),
    }


def summary(report: RunReport) -> dict:
    out: dict = {"metadata": report.metadata}
    if report.swaps:
        base = report.metadata.get("base_currency", "EUR")
        out["swaps"] = {s.name: swap_summary(s, base) for s in report.swaps}
    return out


def _hist_rows(samples: np.ndarray, bins: int):
    counts, edges = np.histogram(samples, bins=bins)
    return [(_f(edges[i]), _f(edges[i + 1]), int(c)) for i, c in enumerate(counts)]


def write_report(report: RunReport, out_dir: str | Path, histogram_bins: int = 50) -> list[Path]:
    """Write exposure, sample, histogram and summary files; return their paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    for s in report.swaps:
        e = s.exposure
        p = out / f"exposure_{s.name}.csv"
        _write_csv(p, ("time", "epe", "q95", "q99"),
                   ((_f(t), _f(a), _f(b), _f(c)) for t, a, b, c in zip(e.times, e.epe, e.q95, e.q99)))
        written.append(p)
        for suffix, fr in (("", s.investor), ("_counterparty", s.counterparty)):
            p = out / f"funding_samples_{s.name}{suffix}.csv"
            _write_csv(p, ("path_id", "phi"), ((i, _f(x)) for i, x in enumerate(fr.samples)))
            written.append(p)
            p = out / f"funding_hist_{s.name}{suffix}.csv"
            _write_csv(p, ("bin_lo", "bin_hi", "count"), _hist_rows(fr.samples, histogram_bins))
            written.append(p)

    p = out / "summary.json"
    try:
        p.write_text(json.dumps(summary(report), indent=2) + "\n", encoding="utf-8")
        (out / "timing.json").write_text(json.dumps({"wall_time_seconds": report.wall_time}) + "\n",
                                         encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {p}: {exc}") from exc
    written += [p, out / "timing.json"]
    return written
