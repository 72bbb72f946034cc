"""Experiment orchestration: scheme grids, replication, and file emission.

A scheme is one (policy, estimator, batch size) combination; an experiment
runs every scheme in a grid for m independent replications and aggregates
residual, credible-interval length and coverage at each checkpoint.  Seeds
are derived per (scheme, replication) with numpy's SeedSequence spawn keys,
so parallel and serial execution produce identical records and any single
replication can be rerun in isolation.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats as _scistats

from .driver import MetricsRecord, RunConfig, run_gpba
from .oracles import BermudanPutOracle, lattice_boundary, make_synthetic
from .policies import BASELINE_KINDS, PolicySpec, tpo_query
from .updating import batched_update
from .density import uniform_prior

__all__ = [
    "CSV_COLUMNS",
    "ExperimentConfig",
    "ExperimentResult",
    "SchemeSpec",
    "build_oracle",
    "derive_seeds",
    "parse_config",
    "run_design_quality",
    "run_experiment",
    "run_tpo_table",
    "write_records",
]

CSV_COLUMNS = (
    "scheme",
    "policy",
    "estimator",
    "K",
    "T",
    "rep",
    "budget_used",
    "root_est",
    "residual",
    "ci_len",
    "covered",
)

OUTPUT_DIR_ENV = "PROBISECT_OUTDIR"


@dataclass(frozen=True)
class SchemeSpec:
    """One (policy, estimator, batch size) cell of the experiment grid."""

    policy: PolicySpec
    estimator: str
    batch_k: int
    preavg_a: int = 1

    @property
    def label(self) -> str:
        tag = f"{self.policy.kind}/{self.estimator}/K{self.batch_k}"
        if self.preavg_a > 1:
            tag += f"/a{self.preavg_a}"
        return tag


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid of schemes on one oracle, with replication and output settings."""

    schemes: tuple[SchemeSpec, ...]
    oracle: dict
    budget_t: int
    n_reps: int
    base_seed: int = 0
    checkpoints: tuple[int, ...] | None = None
    alpha_ci: float = 0.05
    out_dir: str | None = None
    parallelism: int = 1

    def __post_init__(self) -> None:
        if not self.schemes:
            raise ValueError("experiment grid is empty")
        if self.n_reps < 1:
            raise ValueError(f"need at least one replication, got {self.n_reps}")
        if self.parallelism < 1:
            raise ValueError(f"parallelism must be >= 1, got {self.parallelism}")


@dataclass
class ExperimentResult:
    rows: list[dict] = field(default_factory=list)
    summary: list[dict] = field(default_factory=list)


def derive_seeds(base_seed: int, scheme_idx: int, rep: int):
    """Independent (oracle, policy) seed pair for one replication.

    SeedSequence spawn keys make the derivation order-free: replication j of
    scheme i always gets the same streams no matter what ran before it.
    """
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(scheme_idx, rep))
    oracle_ss, policy_ss = ss.spawn(2)
    return oracle_ss, policy_ss


def build_oracle(spec: dict, seed=None):
    kind = spec.get("kind")
    if kind == "synthetic":
        return make_synthetic(
            spec.get("name", "h1"), seed=seed, x_star=spec.get("x_star", 1.0 / 3.0)
        )
    if kind == "finance":
        return BermudanPutOracle(
            volatility=spec.get("volatility", 0.2),
            n_dates=spec.get("n_dates", 50),
            eval_time=spec.get("eval_time", 0.6),
            n_lattice_steps=spec.get("n_lattice_steps", 5000),
            seed=seed,
            boundary=spec.get("boundary"),
        )
    raise ValueError(f"unknown oracle kind {kind!r}; use 'synthetic' or 'finance'")


def _prepared_oracle_spec(cfg: ExperimentConfig) -> dict:
    """Precompute the lattice boundary once so workers skip it."""
    spec = dict(cfg.oracle)
    if spec.get("kind") == "finance" and spec.get("boundary") is None:
        _, boundary = lattice_boundary(
            strike=spec.get("strike", 40.0),
            rate=spec.get("rate", 0.06),
            vol=spec.get("volatility", 0.2),
            maturity=spec.get("maturity", 1.0),
            n_dates=spec.get("n_dates", 50),
            n_lattice_steps=spec.get("n_lattice_steps", 5000),
        )
        spec["boundary"] = boundary
    return spec


def _run_config(cfg: ExperimentConfig, scheme: SchemeSpec, seed) -> RunConfig:
    return RunConfig(
        policy=scheme.policy,
        estimator=scheme.estimator,
        batch_k=scheme.batch_k,
        budget_t=cfg.budget_t,
        preavg_a=scheme.preavg_a,
        alpha_ci=cfg.alpha_ci,
        checkpoints=cfg.checkpoints,
        seed=seed,
    )


def _record_row(
    scheme: SchemeSpec, budget_t: int, rep: int, rec: MetricsRecord
) -> dict:
    return {
        "scheme": scheme.label,
        "policy": scheme.policy.kind,
        "estimator": scheme.estimator,
        "K": scheme.batch_k,
        "T": budget_t,
        "rep": rep,
        "budget_used": rec.budget_used,
        "root_est": rec.root_estimate,
        "residual": rec.residual,
        "ci_len": rec.ci_length,
        "covered": bool(rec.covered),
    }


def _run_replication(payload) -> tuple[int, int, list[dict]]:
    cfg, oracle_spec, scheme_idx, rep = payload
    scheme = cfg.schemes[scheme_idx]
    oracle_ss, policy_ss = derive_seeds(cfg.base_seed, scheme_idx, rep)
    oracle = build_oracle(oracle_spec, seed=oracle_ss)
    _, records, _ = run_gpba(_run_config(cfg, scheme, policy_ss), oracle)
    rows = [_record_row(scheme, cfg.budget_t, rep, r) for r in records]
    return scheme_idx, rep, rows


def _collect(cfg: ExperimentConfig, oracle_spec: dict, runner) -> list[dict]:
    tasks = [
        (cfg, oracle_spec, si, rep)
        for si in range(len(cfg.schemes))
        for rep in range(cfg.n_reps)
    ]
    if cfg.parallelism == 1:
        outs = [runner(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            outs = list(pool.map(runner, tasks, chunksize=1))
    rows: list[dict] = []
    for _, _, chunk in sorted(outs, key=lambda o: (o[0], o[1])):
        rows.extend(chunk)
    return rows


def aggregate_rows(rows: list[dict]) -> list[dict]:
    """Per-scheme per-checkpoint means.

    fsum makes the result independent of row order, so serial and parallel
    collection aggregate to bit-identical summaries.
    """
    acc: dict[tuple, list] = {}
    for r in rows:
        key = (r["scheme"], r["policy"], r["estimator"], r["K"], r["T"], r["budget_used"])
        slot = acc.setdefault(key, [[], [], 0])
        slot[0].append(r["residual"])
        slot[1].append(r["ci_len"])
        slot[2] += bool(r["covered"])
    out = []
    for key in sorted(acc):
        res_vals, ci_vals, cov = acc[key]
        n = len(res_vals)
        res = math.fsum(res_vals)
        ci = math.fsum(ci_vals)
        scheme, policy, estimator, k, t, budget = key
        out.append(
            {
                "scheme": scheme,
                "policy": policy,
                "estimator": estimator,
                "K": k,
                "T": t,
                "budget_used": budget,
                "n_reps": n,
                "mean_residual": res / n,
                "mean_ci_length": ci / n,
                "coverage_rate": cov / n,
            }
        )
    return out


def _validate_schemes(cfg: ExperimentConfig, oracle_spec: dict) -> None:
    # fail on an invalid scheme combination before any budget is spent
    from .driver import _validate as _validate_run

    probe = build_oracle(oracle_spec, seed=0)
    for scheme in cfg.schemes:
        _validate_run(_run_config(cfg, scheme, seed=0), probe)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run the full scheme grid and aggregate per-checkpoint metrics."""
    oracle_spec = _prepared_oracle_spec(cfg)
    _validate_schemes(cfg, oracle_spec)
    rows = _collect(cfg, oracle_spec, _run_replication)
    return ExperimentResult(rows=rows, summary=aggregate_rows(rows))


def _replay_design(trace, oracle, preavg_a: int, cfg: ExperimentConfig):
    """Exact-accuracy posterior along a recorded design (same responses)."""
    g = uniform_prior(*oracle.domain)
    snaps = [(0, 0, g)]
    used = 0
    for n, row in enumerate(trace, start=1):
        n_signs = math.ceil(row.k_used / preavg_a)
        g = batched_update(g, row.x, row.b_k, n_signs, float(oracle.true_p(row.x)))
        used += row.k_used
        snaps.append((used, n, g))
    checkpoints = cfg.checkpoints or RunConfig(
        policy=PolicySpec("median"),
        estimator="true",
        batch_k=1,
        budget_t=cfg.budget_t,
    ).resolved_checkpoints()
    records = []
    budgets = [s[0] for s in snaps]
    import bisect as _bisect

    from .driver import metrics_snapshot

    for c in checkpoints:
        i = _bisect.bisect_right(budgets, c) - 1
        b, n_macro, gi = snaps[i]
        records.append(
            metrics_snapshot(
                gi, oracle.root, cfg.alpha_ci, budget_used=min(c, used), n_macro=n_macro
            )
        )
    return records


def _run_design_replication(payload) -> tuple[int, int, list[dict]]:
    cfg, oracle_spec, scheme_idx, rep = payload
    scheme = cfg.schemes[scheme_idx]
    oracle_ss, policy_ss = derive_seeds(cfg.base_seed, scheme_idx, rep)
    oracle = build_oracle(oracle_spec, seed=oracle_ss)
    if scheme.policy.kind in BASELINE_KINDS:
        _, records, _ = run_gpba(_run_config(cfg, scheme, policy_ss), oracle)
        rows = [_record_row(scheme, cfg.budget_t, rep, r) for r in records]
        return scheme_idx, rep, rows
    _, _, trace = run_gpba(_run_config(cfg, scheme, policy_ss), oracle)
    records = _replay_design(trace, oracle, scheme.preavg_a, cfg)
    replay_scheme = replace(scheme)  # same fields, relabeled below
    rows = []
    for r in records:
        row = _record_row(replay_scheme, cfg.budget_t, rep, r)
        row["scheme"] = "replay:" + scheme.label
        rows.append(row)
    return scheme_idx, rep, rows


def run_design_quality(cfg: ExperimentConfig) -> ExperimentResult:
    """Design-quality evaluation: replay each scheme's design under exact p.

    Adaptive schemes are run normally, then their recorded designs are
    re-scored by updating a fresh state with the true accuracy at every
    design point (same responses, exact inference).  Exact-accuracy baselines
    (true-ids / median / uniform) are appended for every batch size in the
    grid and run directly.  Synthetic oracles only; the finance oracle has
    no known accuracy.
    """
    oracle_spec = _prepared_oracle_spec(cfg)
    if oracle_spec.get("kind") != "synthetic":
        raise ValueError(
            "design-quality needs a synthetic oracle (exact accuracy unknown "
            "for the finance oracle)"
        )
    present = {s.policy.kind for s in cfg.schemes}
    extra = []
    grid_size = cfg.schemes[0].policy.grid_size
    for k in sorted({s.batch_k for s in cfg.schemes}):
        for kind in BASELINE_KINDS:
            if kind not in present:
                extra.append(
                    SchemeSpec(
                        policy=PolicySpec(kind=kind, grid_size=grid_size),
                        estimator="true",
                        batch_k=k,
                    )
                )
    cfg = replace(cfg, schemes=cfg.schemes + tuple(extra))
    _validate_schemes(cfg, oracle_spec)
    rows = _collect(cfg, oracle_spec, _run_design_replication)
    return ExperimentResult(rows=rows, summary=aggregate_rows(rows))


def run_tpo_table(
    func: str = "h1",
    p_values: tuple[float, ...] = (0.55, 0.6, 0.7),
    alphas: tuple[float, ...] = (0.05, 0.4),
    n_reps: int = 1000,
    base_seed: int = 0,
    x_star: float = 1.0 / 3.0,
    sigma: float = 0.2,
    max_draws: int = 10**7,
) -> list[dict]:
    """Mean power-one hitting times on a grid of accuracies and error levels.

    Each cell fixes the query point where the oracle's accuracy equals p
    (left of the root) and repeatedly runs the sequential test to a decision.
    """
    rows = []
    for ci, (p, alpha) in enumerate(itertools.product(p_values, alphas)):
        offset = sigma * float(_scistats.norm.ppf(p))
        x = x_star - offset
        oracle_ss, _ = derive_seeds(base_seed, ci, 0)
        oracle = build_oracle(
            {"kind": "synthetic", "name": func, "x_star": x_star}, seed=oracle_ss
        )
        ks = np.empty(n_reps)
        for rep in range(n_reps):
            _, k_used, _ = tpo_query(oracle, x, sigma, alpha, budget_left=max_draws)
            ks[rep] = k_used
        rows.append(
            {
                "p": p,
                "alpha": alpha,
                "mean_k": float(ks.mean()),
                "sd_k": float(ks.std(ddof=1)),
                "se_k": float(ks.std(ddof=1) / math.sqrt(n_reps)),
                "n_reps": n_reps,
            }
        )
    return rows


def default_out_dir(explicit: str | None = None) -> str:
    return explicit or os.environ.get(OUTPUT_DIR_ENV) or os.getcwd()


def write_records(result: ExperimentResult, csv_path: str) -> tuple[str, str]:
    """Write per-replication rows as CSV and the aggregate summary as JSON.

    Column order is fixed (CSV_COLUMNS); floats carry 17 significant digits;
    covered is written as 0/1.  The summary lands next to the CSV with a
    .summary.json suffix.  Returns (csv path, json path).
    """
    os.makedirs(os.path.dirname(os.path.abspath(csv_path)), exist_ok=True)
    with open(csv_path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in result.rows:
            fh.write(
                f"{r['scheme']},{r['policy']},{r['estimator']},{r['K']},{r['T']},"
                f"{r['rep']},{r['budget_used']},{r['root_est']:.17g},"
                f"{r['residual']:.17g},{r['ci_len']:.17g},{int(r['covered'])}\n"
            )
    base = csv_path[:-4] if csv_path.endswith(".csv") else csv_path
    json_path = base + ".summary.json"
    with open(json_path, "w") as fh:
        json.dump(result.summary, fh, indent=2)
        fh.write("\n")
    return csv_path, json_path


_REQUIRED_KEYS = ("budget", "reps")
_KNOWN_KEYS = {
    "mode",
    "func",
    "x_star",
    "policies",
    "estimators",
    "batch_sizes",
    "preavg",
    "quantiles",
    "m_candidates",
    "tpo_alpha",
    "grid_size",
    "budget",
    "reps",
    "seed",
    "checkpoints",
    "alpha_ci",
    "out_dir",
    "parallelism",
    "volatility",
    "n_dates",
    "eval_time",
    "lattice_steps",
}


def parse_config(
    path: str | None = None,
    overrides: dict | None = None,
    mode: str = "synthetic",
) -> ExperimentConfig:
    """Build an ExperimentConfig from a JSON file and/or flag overrides.

    Flag values (overrides) win over file values.  Unknown keys and missing
    required fields raise errors naming the offending field.
    """
    raw: dict = {}
    if path is not None:
        with open(path) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError(f"config file {path} must hold a JSON object")
        raw.update(loaded)
    for key, val in (overrides or {}).items():
        if val is not None:
            raw[key] = val
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    mode = raw.get("mode", mode)
    if mode not in ("synthetic", "finance"):
        raise ValueError(f"mode must be 'synthetic' or 'finance', got {mode!r}")
    for key in _REQUIRED_KEYS:
        if key not in raw:
            raise ValueError(f"missing required config field: {key}")

    if mode == "synthetic":
        oracle = {
            "kind": "synthetic",
            "name": raw.get("func", "h1"),
            "x_star": float(raw.get("x_star", 1.0 / 3.0)),
        }
    else:
        oracle = {
            "kind": "finance",
            "volatility": float(raw.get("volatility", 0.2)),
            "n_dates": int(raw.get("n_dates", 50)),
            "eval_time": float(raw.get("eval_time", 0.6)),
            "n_lattice_steps": int(raw.get("lattice_steps", 5000)),
        }

    policies = raw.get("policies", ["rand-q"])
    estimators = raw.get("estimators", ["clt"])
    batch_sizes = raw.get("batch_sizes", [250])
    if isinstance(policies, str):
        policies = [policies]
    if isinstance(estimators, str):
        estimators = [estimators]
    if isinstance(batch_sizes, int):
        batch_sizes = [batch_sizes]
    quantiles = tuple(float(q) for q in raw.get("quantiles", (0.25, 0.75)))
    schemes = []
    for kind, est, k in itertools.product(policies, estimators, batch_sizes):
        policy = PolicySpec(
            kind=kind,
            quantiles=quantiles,
            m_candidates=int(raw.get("m_candidates", 2)),
            tpo_alpha=float(raw.get("tpo_alpha", 0.05)),
            grid_size=int(raw.get("grid_size", 1001)),
        )
        schemes.append(
            SchemeSpec(
                policy=policy,
                estimator=est,
                batch_k=int(k),
                preavg_a=int(raw.get("preavg", 1)),
            )
        )
    checkpoints = raw.get("checkpoints")
    if checkpoints is not None:
        checkpoints = tuple(int(c) for c in checkpoints)
    return ExperimentConfig(
        schemes=tuple(schemes),
        oracle=oracle,
        budget_t=int(raw["budget"]),
        n_reps=int(raw["reps"]),
        base_seed=int(raw.get("seed", 0)),
        checkpoints=checkpoints,
        alpha_ci=float(raw.get("alpha_ci", 0.05)),
        out_dir=raw.get("out_dir"),
        parallelism=int(raw.get("parallelism", 1)),
    )
