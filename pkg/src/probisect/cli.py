"""Command-line front end.

Subcommands:
  synthetic        scheme grid on a synthetic test function
  finance          scheme grid on the Bermudan-put timing-value oracle
  tpo-table        mean hitting times of the power-one sequential test
  design-quality   replay recorded designs under exact accuracy + baselines
  report           render learning-curve figures from saved results

Results land in --out (or $PROBISECT_OUTDIR, or the working directory) as
results.csv plus results.summary.json; `report` turns those into PNG files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import harness, report
from .oracles import export_boundary_csv, lattice_boundary

__all__ = ["main", "build_parser"]


def _csv_ints(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _csv_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--policy",
        action="append",
        dest="policies",
        metavar="KIND",
        help="sampling policy (repeatable): det-ids | rand-ids | syst-q | "
        "rand-q | tpo | true-ids | median | uniform",
    )
    p.add_argument(
        "--estimator",
        action="append",
        dest="estimators",
        metavar="NAME",
        help="accuracy estimator (repeatable): bar | mode | median | mean | "
        "boost | clt | true",
    )
    p.add_argument(
        "--batch",
        action="append",
        dest="batch_sizes",
        type=int,
        metavar="K",
        help="oracle calls per design point (repeatable)",
    )
    p.add_argument("--budget", type=int, help="total oracle-call budget per replication")
    p.add_argument("--reps", type=int, help="number of independent replications")
    p.add_argument("--seed", type=int, help="base seed for the replication streams")
    p.add_argument("--preavg", type=int, help="pre-average group size (default 1)")
    p.add_argument(
        "--checkpoints",
        type=_csv_ints,
        metavar="C1,C2,...",
        help="budget checkpoints for the learning curve (default: log-spaced)",
    )
    p.add_argument("--alpha-ci", type=float, dest="alpha_ci", help="credible level parameter")
    p.add_argument(
        "--quantiles",
        type=_csv_floats,
        metavar="Q1,Q2,...",
        help="candidate quantiles for quantile-driven policies",
    )
    p.add_argument("--m-candidates", type=int, dest="m_candidates", help="candidates per step for rand-ids")
    p.add_argument("--tpo-alpha", type=float, dest="tpo_alpha", help="error level of the sequential test")
    p.add_argument("--grid-size", type=int, dest="grid_size", help="grid size for true-ids maximization")
    p.add_argument("--parallel", type=int, dest="parallelism", help="worker processes (default 1)")
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--out", help="output directory (default $PROBISECT_OUTDIR or cwd)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probisect",
        description="Probabilistic bisection with estimated oracle accuracy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_syn = sub.add_parser("synthetic", help="run a scheme grid on a synthetic function")
    p_syn.add_argument("--func", choices=("h1", "h2", "h3"), help="test function (default h1)")
    p_syn.add_argument("--x-star", type=float, dest="x_star", help="root location (default 1/3)")
    _add_grid_flags(p_syn)

    p_fin = sub.add_parser("finance", help="run a scheme grid on the Bermudan-put oracle")
    p_fin.add_argument("--volatility", "--vol", type=float, dest="volatility")
    p_fin.add_argument("--dates", type=int, dest="n_dates", help="number of exercise dates")
    p_fin.add_argument("--eval-time", type=float, dest="eval_time", help="evaluation time")
    p_fin.add_argument("--lattice-steps", type=int, dest="lattice_steps")
    _add_grid_flags(p_fin)

    p_tpo = sub.add_parser("tpo-table", help="mean hitting times of the sequential test")
    p_tpo.add_argument("--func", choices=("h1", "h2", "h3"), default="h1")
    p_tpo.add_argument("--p-values", type=_csv_floats, default=[0.55, 0.6, 0.7], dest="p_values")
    p_tpo.add_argument("--alphas", type=_csv_floats, default=[0.05, 0.4])
    p_tpo.add_argument("--reps", type=int, default=1000)
    p_tpo.add_argument("--seed", type=int, default=0)
    p_tpo.add_argument("--out", help="output directory")

    p_dq = sub.add_parser("design-quality", help="replay designs under exact accuracy")
    p_dq.add_argument("--func", choices=("h1", "h2", "h3"), help="test function (default h1)")
    p_dq.add_argument("--x-star", type=float, dest="x_star")
    _add_grid_flags(p_dq)

    p_rep = sub.add_parser("report", help="render figures from saved results")
    p_rep.add_argument("--results", required=True, help="results.csv or results.summary.json")
    p_rep.add_argument("--out", help="directory for the PNG files")

    return parser


_GRID_KEYS = (
    "policies",
    "estimators",
    "batch_sizes",
    "budget",
    "reps",
    "seed",
    "preavg",
    "checkpoints",
    "alpha_ci",
    "quantiles",
    "m_candidates",
    "tpo_alpha",
    "grid_size",
    "parallelism",
    "out_dir",
)


def _overrides(args: argparse.Namespace, extra: tuple[str, ...] = ()) -> dict:
    src = vars(args)
    out = {k: src.get(k) for k in _GRID_KEYS + extra}
    out["out_dir"] = src.get("out")
    return out


def _run_grid(args: argparse.Namespace, mode: str, extra: tuple[str, ...]) -> int:
    cfg = harness.parse_config(args.config, _overrides(args, extra), mode=mode)
    result = harness.run_experiment(cfg)
    out_dir = harness.default_out_dir(cfg.out_dir)
    csv_path, json_path = harness.write_records(result, os.path.join(out_dir, "results.csv"))
    if mode == "finance":
        dates, boundary = lattice_boundary(
            vol=cfg.oracle.get("volatility", 0.2),
            n_dates=cfg.oracle.get("n_dates", 50),
            n_lattice_steps=cfg.oracle.get("n_lattice_steps", 5000),
        )
        bpath = os.path.join(out_dir, "boundary.csv")
        export_boundary_csv(bpath, dates, boundary)
        print(f"wrote {bpath}")
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    for row in result.summary:
        print(
            f"{row['scheme']} @ {row['budget_used']}: "
            f"residual {row['mean_residual']:.6g}, "
            f"ci {row['mean_ci_length']:.6g}, "
            f"coverage {row['coverage_rate']:.3f} ({row['n_reps']} reps)"
        )
    return 0


def _run_tpo_table(args: argparse.Namespace) -> int:
    rows = harness.run_tpo_table(
        func=args.func,
        p_values=tuple(args.p_values),
        alphas=tuple(args.alphas),
        n_reps=args.reps,
        base_seed=args.seed,
    )
    out_dir = harness.default_out_dir(args.out)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "tpo_table.csv")
    with open(csv_path, "w") as fh:
        fh.write("p,alpha,mean_k,sd_k,se_k,n_reps\n")
        for r in rows:
            fh.write(
                f"{r['p']:g},{r['alpha']:g},{r['mean_k']:.17g},"
                f"{r['sd_k']:.17g},{r['se_k']:.17g},{r['n_reps']}\n"
            )
    json_path = os.path.join(out_dir, "tpo_table.json")
    with open(json_path, "w") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")
    print(f"wrote {csv_path}")
    for r in rows:
        print(
            f"p={r['p']:g} alpha={r['alpha']:g}: "
            f"mean {r['mean_k']:.1f} (sd {r['sd_k']:.1f}, {r['n_reps']} reps)"
        )
    return 0


def _run_design_quality(args: argparse.Namespace) -> int:
    cfg = harness.parse_config(args.config, _overrides(args, ("func", "x_star")), mode="synthetic")
    result = harness.run_design_quality(cfg)
    out_dir = harness.default_out_dir(cfg.out_dir)
    csv_path, json_path = harness.write_records(
        result, os.path.join(out_dir, "design_quality.csv")
    )
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    for row in result.summary:
        print(
            f"{row['scheme']} @ {row['budget_used']}: "
            f"residual {row['mean_residual']:.6g} ({row['n_reps']} reps)"
        )
    return 0


def _run_report(args: argparse.Namespace) -> int:
    summary = report.load_summary(args.results)
    out_dir = harness.default_out_dir(args.out) if args.out or os.environ.get(
        harness.OUTPUT_DIR_ENV
    ) else os.path.dirname(os.path.abspath(args.results))
    paths = report.render_learning_curves(summary, out_dir)
    for p in paths:
        print(f"wrote {p}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synthetic":
            return _run_grid(args, "synthetic", ("func", "x_star"))
        if args.command == "finance":
            return _run_grid(
                args, "finance", ("volatility", "n_dates", "eval_time", "lattice_steps")
            )
        if args.command == "tpo-table":
            return _run_tpo_table(args)
        if args.command == "design-quality":
            return _run_design_quality(args)
        if args.command == "report":
            return _run_report(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
