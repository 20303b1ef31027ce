"""Minimal hand-written SVG plots plus CSV exports for external plotting."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from ..core import ScenarioId, as_seed
from ..dgp import DgpSpec

W, H = 480, 300
PAD = 40
PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c")


def _svg(body: list[str], title: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">')
    return "\n".join([head, f"<title>{escape(title)}</title>",
                      f'<text x="{W / 2:.1f}" y="16" text-anchor="middle">{escape(title)}</text>',
                      *body, "</svg>"]) + "\n"


def _axes(y_max: float, label: str) -> list[str]:
    x0, y0, y1 = PAD, H - PAD, PAD - 10
    return [
        f'<line class="axis" x1="{x0}" y1="{y0}" x2="{W - 10}" y2="{y0}" stroke="black"/>',
        f'<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{x0 - 4}" y="{y1 + 4}" text-anchor="end">{y_max:.3g}</text>',
        f'<text x="{x0 - 4}" y="{y0}" text-anchor="end">0</text>',
        f'<text x="{(W + PAD) / 2:.1f}" y="{H - 8}" text-anchor="middle">{escape(label)}</text>',
    ]


def error_profile_svg(edges, errors, counts, title: str) -> str:
    """Per-bin CADR error (bars with class ``error-bar``) over the training-dose
    histogram (class ``hist-bar``, scaled to its own maximum)."""
    edges = np.asarray(edges, dtype=float)
    errors = np.nan_to_num(np.asarray(errors, dtype=float), nan=0.0)
    counts = np.asarray(counts, dtype=float)
    plot_w, plot_h = W - PAD - 10, H - 2 * PAD + 10
    e_max = float(errors.max()) if errors.size and errors.max() > 0 else 1.0
    c_max = float(counts.max()) if counts.size and counts.max() > 0 else 1.0
    body = _axes(e_max, "dose")
    base = H - PAD
    for b in range(len(edges) - 1):
        x = PAD + edges[b] * plot_w
        width = (edges[b + 1] - edges[b]) * plot_w
        hh = counts[b] / c_max * plot_h
        body.append(f'<rect class="hist-bar" x="{x:.2f}" y="{base - hh:.2f}" width="{width:.2f}" '
                    f'height="{hh:.2f}" fill="#cccccc" data-count="{counts[b]:g}"/>')
    for b in range(len(edges) - 1):
        x = PAD + (edges[b] + edges[b + 1]) / 2 * plot_w
        eh = errors[b] / e_max * plot_h
        body.append(f'<rect class="error-bar" x="{x - 3:.2f}" y="{base - eh:.2f}" width="6" '
                    f'height="{eh:.2f}" fill="{PALETTE[3]}" data-error="{errors[b]:.6g}"/>')
    return _svg(body, title)


def mise_bars_svg(payload: dict) -> str:
    """Grouped bars of mean MISE: one group per estimator, one bar per scenario."""
    scenarios = [ScenarioId(s) for s in payload["scenarios"]]
    names = list(payload["estimators"])
    means = np.array([[payload["estimators"][e]["scenarios"][s.value]["mise"]["mean"] or math.nan
                       for s in scenarios] for e in names], dtype=float)
    top = float(np.nanmax(means)) if np.isfinite(means).any() else 1.0
    top = top if top > 0 else 1.0
    body = _axes(top, "estimator")
    plot_w, plot_h = W - PAD - 10, H - 2 * PAD + 10
    group_w = plot_w / max(len(names), 1)
    bar_w = group_w * 0.8 / len(scenarios)
    for i, name in enumerate(names):
        gx = PAD + i * group_w + group_w * 0.1
        body.append(f'<text x="{gx + group_w * 0.4:.2f}" y="{H - PAD + 12}" text-anchor="middle">'
                    f'{escape(name)}</text>')
        for j, s in enumerate(scenarios):
            v = means[i, j]
            if not math.isfinite(v):
                continue
            h = v / top * plot_h
            body.append(f'<rect class="mise-bar" x="{gx + j * bar_w:.2f}" y="{H - PAD - h:.2f}" '
                        f'width="{bar_w:.2f}" height="{h:.2f}" fill="{PALETTE[j % len(PALETTE)]}" '
                        f'data-scenario="{s.value}" data-mise="{v:.6g}"/>')
    for j, s in enumerate(scenarios):
        body.append(f'<rect x="{W - 110}" y="{24 + 13 * j}" width="9" height="9" fill="{PALETTE[j % len(PALETTE)]}"/>')
        body.append(f'<text x="{W - 97}" y="{32 + 13 * j}">{escape(s.short)}</text>')
    return _svg(body, f"{payload['dataset']}: MISE per scenario")


def mean_profiles(profiles: dict) -> dict:
    """Average per-seed profiles into one (edges, errors, counts) per estimator and scenario."""
    out = {}
    for est, by_scenario in profiles.items():
        for scen, by_seed in by_scenario.items():
            runs = list(by_seed.values())
            edges = np.asarray(runs[0]["edges"])
            errors = np.nanmean(np.array([r["errors"] for r in runs], dtype=float), axis=0)
            counts = np.mean(np.array([r["train_counts"] for r in runs], dtype=float), axis=0)
            out[(est, scen)] = (edges, errors, counts)
    return out


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def emit_plots(payload: dict, profiles: dict, out_dir) -> list[Path]:
    """Write the grouped MISE chart and one error-profile chart per
    (estimator, scenario, intervention)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    p = out / "mise_by_scenario.svg"
    p.write_text(mise_bars_svg(payload))
    written.append(p)
    for (est, scen), (edges, errors, counts) in mean_profiles(profiles.get("profiles", {})).items():
        for t in range(errors.shape[0]):
            title = f"{est} / {ScenarioId(scen).short} / intervention {t}"
            p = out / f"profile_{_safe(est)}_{scen}_t{t}.svg"
            p.write_text(error_profile_svg(edges, errors[t], counts[t], title))
            written.append(p)
    return written


def write_curves(dgp: DgpSpec, path, units: int = 5, grid: int = 65, seed=0) -> int:
    """CSV of true dose-response curves (unit, t, dose, mu) for a sample of units.

    Returns the number of data rows (units x k x grid).
    """
    units = min(units, dgp.n)
    idx = np.sort(as_seed(seed).rng().choice(dgp.n, size=units, replace=False))
    g = np.linspace(0.0, 1.0, grid)
    mu = dgp.response.on_grid(dgp.X.values[idx], g)
    rows = 0
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("unit", "t", "dose", "mu"))
        for a, i in enumerate(idx):
            for t in range(dgp.k):
                for j, d in enumerate(g):
                    w.writerow((int(i), t, repr(float(d)), repr(float(mu[a, t, j]))))
                    rows += 1
    return rows


__all__ = ["emit_plots", "error_profile_svg", "mean_profiles", "mise_bars_svg", "write_curves"]
