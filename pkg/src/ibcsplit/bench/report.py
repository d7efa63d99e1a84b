"""Writing convergence reports to CSV/JSON and reading them back."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .study import ConvergenceReport, SchemeResult


def _num(x):
    return "" if x is None else repr(float(x))


def _summary(report: ConvergenceReport) -> dict:
    return {
        "name": report.name,
        "tail_slopes": report.tail_slopes(),
        "schemes": {
            key: {"taus": r.taus, "errors": r.errors, "pairwise_orders": r.pairwise_orders,
                  "tail_slope": r.tail_slope, "failures": {repr(t): m for t, m in r.failures.items()},
                  "wall_time": r.wall_time}
            for key, r in report.results.items()
        },
        "metadata": report.metadata,
    }


def emit_report(report: ConvergenceReport, fmt: str = "csv", out_dir=".") -> list[Path]:
    """Write per-scheme tables, a JSON summary and a log-log plot-data table.

    Files: ``<name>_<scheme>.<fmt>``, ``<name>_summary.json`` and, when at
    least one scheme ran, ``<name>_plotdata.csv`` with columns
    ``tau,error_<scheme>...``.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    paths = []
    try:
        for key, res in report.results.items():
            path = out / f"{report.name}_{key}.{fmt}"
            if fmt == "csv":
                with open(path, "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["tau", "error_inf", "pairwise_order"])
                    for tau, err, order in zip(res.taus, res.errors, res.pairwise_orders):
                        w.writerow([_num(tau), _num(err), _num(order)])
            else:
                rows = [{"tau": t, "error_inf": e, "pairwise_order": o}
                        for t, e, o in zip(res.taus, res.errors, res.pairwise_orders)]
                path.write_text(json.dumps(rows, indent=2))
            paths.append(path)

        summary = out / f"{report.name}_summary.json"
        summary.write_text(json.dumps(_summary(report), indent=2, default=str))
        paths.append(summary)

        if report.results:
            keys = list(report.results)
            taus = sorted({t for r in report.results.values() for t in r.taus}, reverse=True)
            plot = out / f"{report.name}_plotdata.csv"
            with open(plot, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["tau"] + [f"error_{k}" for k in keys])
                for tau in taus:
                    row = [_num(tau)]
                    for k in keys:
                        lookup = dict(report.results[k].pairs())
                        row.append(_num(lookup.get(tau)))
                    w.writerow(row)
            paths.append(plot)
    except OSError as exc:
        raise OSError(f"writing report to {out} failed: {exc}") from exc
    return paths


def load_report(summary_path) -> ConvergenceReport:
    """Rebuild a report from its ``*_summary.json`` file."""
    data = json.loads(Path(summary_path).read_text())
    results = {}
    for key, r in data["schemes"].items():
        results[key] = SchemeResult(
            key, [float(t) for t in r["taus"]],
            [None if e is None else float(e) for e in r["errors"]],
            [None if o is None else float(o) for o in r["pairwise_orders"]],
            r["tail_slope"],
            {float(t): m for t, m in r.get("failures", {}).items()},
            float(r.get("wall_time", math.nan)),
        )
    return ConvergenceReport(data["name"], results, data.get("metadata", {}))
