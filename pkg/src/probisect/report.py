"""Render learning-curve figures from experiment summaries.

Figures are written as PNG files next to the delimited output: mean residual
and mean credible-interval length against budget on log-log axes, coverage
on a log-linear axis, one line per scheme.
"""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["load_summary", "render_learning_curves", "render_tpo_table"]

plt.rcParams.update(
    {
        "figure.figsize": (7.0, 4.5),
        "figure.dpi": 120,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "legend.fontsize": 8,
    }
)


def load_summary(path: str) -> list[dict]:
    """Aggregate rows from a .summary.json, or recompute them from the CSV."""
    if path.endswith(".json"):
        with open(path) as fh:
            return json.load(fh)
    from .harness import aggregate_rows

    rows = []
    with open(path) as fh:
        for r in csv.DictReader(fh):
            rows.append(
                {
                    "scheme": r["scheme"],
                    "policy": r["policy"],
                    "estimator": r["estimator"],
                    "K": int(r["K"]),
                    "T": int(r["T"]),
                    "budget_used": int(r["budget_used"]),
                    "residual": float(r["residual"]),
                    "ci_len": float(r["ci_len"]),
                    "covered": r["covered"] not in ("0", "False", "false"),
                }
            )
    return aggregate_rows(rows)


def _by_scheme(summary: list[dict]) -> dict[str, list[dict]]:
    groups: dict[str, list[dict]] = {}
    for row in summary:
        groups.setdefault(row["scheme"], []).append(row)
    for rows in groups.values():
        rows.sort(key=lambda r: r["budget_used"])
    return groups


def _curve_figure(groups, metric, ylabel, logy, path):
    fig, ax = plt.subplots()
    for label, rows in sorted(groups.items()):
        xs = [r["budget_used"] for r in rows]
        ys = [r[metric] for r in rows]
        ax.plot(xs, ys, marker="o", markersize=3, label=label)
    ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("oracle calls used")
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def render_learning_curves(summary: list[dict], out_dir: str, prefix: str = "") -> list[str]:
    """Write residual, CI-length and coverage figures; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    groups = _by_scheme(summary)
    made = []
    specs = (
        ("mean_residual", "mean |median - root|", True, "residual.png"),
        ("mean_ci_length", "mean credible-interval length", True, "ci_length.png"),
        ("coverage_rate", "coverage rate", False, "coverage.png"),
    )
    for metric, ylabel, logy, name in specs:
        path = os.path.join(out_dir, prefix + name)
        made.append(_curve_figure(groups, metric, ylabel, logy, path))
    return made


def render_tpo_table(rows: list[dict], out_dir: str, name: str = "tpo_hitting_times.png") -> str:
    """Mean hitting time against oracle accuracy, one line per error level."""
    os.makedirs(out_dir, exist_ok=True)
    by_alpha: dict[float, list[dict]] = {}
    for row in rows:
        by_alpha.setdefault(row["alpha"], []).append(row)
    fig, ax = plt.subplots()
    for alpha, cells in sorted(by_alpha.items()):
        cells.sort(key=lambda r: r["p"])
        ax.errorbar(
            [c["p"] for c in cells],
            [c["mean_k"] for c in cells],
            yerr=[c["se_k"] for c in cells],
            marker="o",
            capsize=3,
            label=f"alpha={alpha:g}",
        )
    ax.set_yscale("log")
    ax.set_xlabel("oracle accuracy p")
    ax.set_ylabel("mean draws to decision")
    ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, name)
    fig.savefig(path)
    plt.close(fig)
    return path
