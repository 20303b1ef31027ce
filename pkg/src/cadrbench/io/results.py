"""Result files (CSV, JSON, manifest) and the markdown report.

``results.csv`` and ``results.json`` hold only run-independent values so
repeated runs with the same config are byte-identical; wall-clock fit times
go to ``timings.csv``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import platform
from pathlib import Path

import numpy as np

from .. import __version__
from ..core import ScenarioId
from ..decomposition import DecompositionReport
from ..evaluation import summarize

RESULT_COLUMNS = ("dataset", "estimator", "scenario", "seed", "mise", "factual_mse", "status", "error")


def _num(v) -> str:
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def _json_num(v):
    v = float(v)
    return None if math.isnan(v) else v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def results_csv(report: DecompositionReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(RESULT_COLUMNS)
    for c in report.cells:
        w.writerow([
            report.plan.dataset, c.estimator, c.scenario.value, c.seed,
            _num(c.metrics.mise), _num(c.metrics.factual_mse), c.status, c.metrics.error or "",
        ])
    return buf.getvalue()


def timings_csv(report: DecompositionReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("dataset", "estimator", "scenario", "seed", "fit_seconds"))
    for c in report.cells:
        w.writerow([report.plan.dataset, c.estimator, c.scenario.value, c.seed, _num(c.metrics.fit_seconds)])
    return buf.getvalue()


def results_payload(report: DecompositionReport) -> dict:
    """Nested dataset -> estimator -> scenario -> per-seed runs, with aggregates."""
    plan = report.plan
    estimators = {}
    for e in plan.estimators:
        per_scenario = {}
        for s in plan.scenarios:
            runs = [c for c in report.cells if c.estimator == e.name and c.scenario == s]
            agg = summarize([c.metrics.mise for c in runs if c.status == "done"],
                            sum(c.status != "done" for c in runs))
            per_scenario[s.value] = {
                "runs": [
                    {
                        "seed": c.seed, "status": c.status, "mise": _json_num(c.metrics.mise),
                        "factual_mse": _json_num(c.metrics.factual_mse), "error": c.metrics.error or "",
                        "hyperparams": _jsonable(c.hyperparams),
                    }
                    for c in runs
                ],
                "mise": {"mean": _json_num(agg.mean), "std": _json_num(agg.std), "done": agg.done,
                         "failed": agg.failed, "note": agg.note},
            }
        estimators[e.name] = {"family": e.family, "scenarios": per_scenario}
    return {
        "dataset": plan.dataset,
        "k": plan.dgp.k,
        "scenarios": [s.value for s in plan.scenarios],
        "seeds": list(plan.seeds),
        "estimators": estimators,
    }


def profiles_payload(report: DecompositionReport) -> dict:
    out: dict = {}
    for c in report.cells:
        if c.profile is not None:
            out.setdefault(c.estimator, {}).setdefault(c.scenario.value, {})[str(c.seed)] = c.profile
    return {"dataset": report.plan.dataset, "k": report.plan.dgp.k, "profiles": out}


def manifest_payload(report: DecompositionReport, config: dict | None = None) -> dict:
    return {
        "tool": "cadrbench",
        "version": __version__,
        "root_seed": report.plan.root,
        "replication_seeds": list(report.plan.seeds),
        "cells": len(report.cells),
        "failed_cells": len(report.failed),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": config,
    }


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_results(report: DecompositionReport, out_dir, config: dict | None = None,
                  formats=("csv", "json", "markdown")) -> list[Path]:
    """Write result files; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        p = out / name
        p.write_text(text)
        written.append(p)

    payload = results_payload(report)
    if "csv" in formats:
        put("results.csv", results_csv(report))
        put("timings.csv", timings_csv(report))
    put("results.json", _dump(payload))
    put("profiles.json", _dump(profiles_payload(report)))
    put("manifest.json", _dump(manifest_payload(report, config)))
    if report.diagnostics:
        put("diagnostics.json", _dump(report.diagnostics))
    if "markdown" in formats:
        put("report.md", render_report(payload))
    return written


def load_results(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "results.json"
    return json.loads(path.read_text())


def _cell_text(stats: dict) -> str:
    if not stats["done"]:
        return "n/a"
    text = f"{stats['mean']:.2f}"
    if stats["done"] > 1:
        text += f" ± {stats['std']:.2f}"
    if stats["failed"]:
        text += f" ({stats['done']}/{stats['done'] + stats['failed']})"
    return text


def render_report(payload: dict) -> str:
    """Markdown MISE table: estimators as rows, scenarios in decomposition order.

    Cells read ``mean ± std`` (bare mean for a single seed); the best mean of
    each column is bold.
    """
    scenarios = [ScenarioId(s) for s in payload["scenarios"]]
    est = payload["estimators"]
    lines = [f"### {payload['dataset']} (MISE, {len(payload['seeds'])} seed(s))", ""]
    lines.append("| estimator | " + " | ".join(s.short for s in scenarios) + " |")
    lines.append("|---|" + "---|" * len(scenarios))
    best = {}
    for s in scenarios:
        means = [e["scenarios"][s.value]["mise"]["mean"] for e in est.values()]
        means = [m for m in means if m is not None]
        best[s] = round(min(means), 2) if means else None
    for name, e in est.items():
        cells = []
        for s in scenarios:
            stats = e["scenarios"][s.value]["mise"]
            text = _cell_text(stats)
            if stats["done"] and best[s] is not None and round(stats["mean"], 2) == best[s]:
                text = f"**{text}**"
            cells.append(text)
        lines.append(f"| {name} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


__all__ = [
    "RESULT_COLUMNS", "load_results", "manifest_payload", "profiles_payload", "render_report",
    "results_csv", "results_payload", "timings_csv", "write_results",
]
