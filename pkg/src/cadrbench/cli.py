"""Command-line entry point.

    cadrbench generate  --config exp.json --out data/
    cadrbench decompose --config exp.json --workers 4 --out results/
    cadrbench evaluate  --config exp.json --predictions preds.csv
    cadrbench report    --out results/

Exit codes: 0 success, 1 configuration error, 2 runtime failure (partial
results are still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .decomposition import execute_plan, materialize_replication
from .io import (
    ConfigError, build_dgp, emit_plots, load_config, load_results, plan_from_config, render_report,
    write_covariates, write_curves, write_dataset, write_results,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=default(None), help="experiment config (JSON)")
    parser.add_argument("--seed", type=int, default=default(None), help="override the config root seed")
    parser.add_argument("--workers", type=int, default=default(1), help="parallel worker processes")
    parser.add_argument("--out", default=default(None), help="output directory")
    parser.add_argument("--quiet", action="store_true", default=default(False), help="suppress progress output")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cadrbench", description="Dose-response estimator decomposition benchmark")
    ap.add_argument("--version", action="version", version=f"cadrbench {__version__}")
    _global_flags(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="materialize and export scenario datasets")
    _global_flags(p, suppress=True)
    p.add_argument("--curve-units", type=int, default=5, help="units in the dose-response curve export")

    p = sub.add_parser("decompose", help="run the full decomposition from a config")
    _global_flags(p, suppress=True)

    p = sub.add_parser("evaluate", help="score an external predictions file against the DGP")
    _global_flags(p, suppress=True)
    p.add_argument("--predictions", required=True, help="CSV with columns unit,t,d,prediction")

    p = sub.add_parser("report", help="render tables and plots from results.json")
    _global_flags(p, suppress=True)
    p.add_argument("--results", default=None, help="results directory or results.json (default: --out)")
    return ap


class _Log:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, msg: str) -> None:
        if not self.quiet:
            print(msg, file=sys.stderr, flush=True)


def _config(args):
    if not args.config:
        raise ConfigError("--config is required for this command")
    return load_config(args.config, args.seed)


def _out_dir(args, cfg) -> Path:
    return Path(args.out if args.out else cfg.output.dir)


def cmd_generate(args, log) -> int:
    cfg = _config(args)
    dgp = build_dgp(cfg)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_covariates(dgp.X, out / "covariates.csv", out / "binary_columns.json")
    grid = np.linspace(0.0, 1.0, cfg.evaluation.grid)
    dec = cfg.decomposition
    scenarios = None if dec.scenarios == "auto" else dec.scenarios
    for r in dec.seeds:
        rep = out / f"rep{r}"
        rep.mkdir(exist_ok=True)
        data = materialize_replication(dgp, cfg.seed, r, dec.fractions, dec.order, scenarios)
        for s, ds in data.items():
            write_dataset(ds, rep / f"{s.value}.csv")
        splits = next(iter(data.values())).splits
        (rep / "splits.json").write_text(json.dumps(
            {"train": splits.train.tolist(), "val": splits.val.tolist(), "test": splits.test.tolist()}) + "\n")
        with (rep / "mise_query.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("unit", "t", "d"))
            for i in splits.test:
                for t in range(dgp.k):
                    for g in grid:
                        w.writerow((int(i), t, repr(float(g))))
        log(f"replication {r}: {len(data)} scenario datasets written to {rep}")
    rows = write_curves(dgp, out / "curves.csv", args.curve_units, cfg.evaluation.grid, cfg.seed)
    log(f"curves.csv: {rows} rows")
    return EXIT_OK


def cmd_decompose(args, log) -> int:
    cfg = _config(args)
    plan = plan_from_config(cfg)
    out = _out_dir(args, cfg)
    log(f"{len(plan)} cells ({len(plan.estimators)} estimators x {len(plan.scenarios)} scenarios "
        f"x {len(plan.seeds)} seeds), {args.workers} worker(s)")

    def progress(cells):
        for c in cells:
            detail = f"mise={c.metrics.mise:.4g}" if c.status == "done" else c.metrics.error
            log(f"  {c.estimator} / {c.scenario.value} / seed {c.seed}: {c.status} {detail}")

    report = execute_plan(plan, args.workers, diagnostics=cfg.evaluation.diagnostics, progress=progress)
    write_results(report, out, cfg.echo(), cfg.output.formats)
    if "svg" in cfg.output.formats:
        emit_plots(load_results(out), json.loads((out / "profiles.json").read_text()), out / "plots")
    if not args.quiet:
        print(render_report(load_results(out)))
    if report.failed:
        log(f"{len(report.failed)} of {len(report.cells)} cells failed; partial results in {out}")
        return EXIT_RUNTIME
    return EXIT_OK


def read_predictions(path) -> dict[tuple[int, int], dict[float, float]]:
    table: dict[tuple[int, int], dict[float, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"unit", "t", "d", "prediction"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            key = (int(row["unit"]), int(row["t"]))
            table.setdefault(key, {})[float(row["d"])] = float(row["prediction"])
    return table


def cmd_evaluate(args, log) -> int:
    cfg = _config(args)
    dgp = build_dgp(cfg)
    grid = np.linspace(0.0, 1.0, cfg.evaluation.grid)
    try:
        table = read_predictions(args.predictions)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    units = sorted({u for u, _ in table})
    if not units or any(u < 0 or u >= dgp.n for u in units):
        print("error: predictions reference no or unknown units", file=sys.stderr)
        return EXIT_RUNTIME
    pred = np.empty((len(units), dgp.k, len(grid)))
    for a, u in enumerate(units):
        for t in range(dgp.k):
            curve = table.get((u, t), {})
            try:
                pred[a, t] = [curve[float(g)] for g in grid]
            except KeyError:
                print(f"error: unit {u}, intervention {t}: predictions do not cover the dose grid",
                      file=sys.stderr)
                return EXIT_RUNTIME
    if not np.all(np.isfinite(pred)):
        print("error: non-finite predictions", file=sys.stderr)
        return EXIT_RUNTIME
    truth = dgp.response.on_grid(dgp.X.values[units], grid)
    value = float(np.trapezoid((truth - pred) ** 2, grid, axis=2).mean())
    result = {"mise": value, "units": len(units), "k": dgp.k, "grid": len(grid)}
    print(json.dumps(result))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "evaluation.json").write_text(json.dumps(result, indent=2) + "\n")
    return EXIT_OK


def cmd_report(args, log) -> int:
    src = args.results or args.out
    if src is None and args.config:
        src = load_config(args.config, args.seed).output.dir
    if src is None:
        raise ConfigError("report needs --results, --out or --config")
    try:
        payload = load_results(src)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read results from {src}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    src_dir = Path(src) if Path(src).is_dir() else Path(src).parent
    out = Path(args.out) if args.out else src_dir
    out.mkdir(parents=True, exist_ok=True)
    text = render_report(payload)
    (out / "report.md").write_text(text)
    profiles_path = src_dir / "profiles.json"
    profiles = json.loads(profiles_path.read_text()) if profiles_path.exists() else {}
    written = emit_plots(payload, profiles, out / "plots")
    if not args.quiet:
        print(text)
    log(f"report.md and {len(written)} plot(s) written to {out}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "decompose": cmd_decompose, "evaluate": cmd_evaluate, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    log = _Log(args.quiet)
    try:
        return COMMANDS[args.command](args, log)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # anything else is a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
