"""End-to-end sequential runs: propose, query, estimate accuracy, update.

A run owns one oracle and one knowledge state and spends an oracle-call
budget.  Policies that estimate the accuracy on the fly clamp the estimate
into [1/2, 1 - 1/(2K)] before updating; supplying a known accuracy (baseline
mode) bypasses both estimation and clamping.

Checkpoint metrics are taken from the state at the last completed update
whose cumulative call count does not exceed the checkpoint value; a record's
budget_used reports the checkpoint value capped at the calls actually spent.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .density import PiecewiseDensity, uniform_prior
from .estimators import (
    boost_majority,
    clamp_estimate,
    clt_prob,
    empirical_majority,
    minority_count,
    posterior_mean,
    posterior_median,
    posterior_mode,
)
from .oracles import preaveraged_batch
from .policies import (
    BASELINE_KINDS,
    IDS_KINDS,
    PolicySpec,
    baseline_next,
    ids_candidates,
    ids_select,
    rand_q_next,
    syst_q_next,
    tpo_query,
)
from .updating import UpdateSignal, apply_update

__all__ = [
    "ESTIMATOR_KINDS",
    "MetricsRecord",
    "RunConfig",
    "TraceRecord",
    "default_checkpoints",
    "metrics_snapshot",
    "run_gpba",
    "run_tpo_pba",
    "trace_to_text",
]

# batched-count estimators condition on B_K; the last two compress the batch
# into one boosted binary response
ESTIMATOR_KINDS = ("bar", "mode", "median", "mean", "boost", "clt", "true")
_BATCHED = ("bar", "mode", "median", "mean", "true")
_EDGE_MASS = 1e-9


@dataclass(frozen=True)
class RunConfig:
    """One run: policy, accuracy estimator, batch size and budget.

    estimator 'true' uses the oracle's exact accuracy (or p_override when
    given) instead of estimating it; checkpoints default to 10 log-spaced
    budgets up to budget_t.
    """

    policy: PolicySpec
    estimator: str
    batch_k: int
    budget_t: int
    preavg_a: int = 1
    alpha_ci: float = 0.05
    checkpoints: tuple[int, ...] | None = None
    seed: int | None = None
    p_override: Callable | None = None

    def __post_init__(self) -> None:
        if self.estimator not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        min_k = 1 if self.estimator == "true" else 2
        if self.batch_k < min_k:
            raise ValueError(
                f"batch_k must be >= {min_k} for estimator {self.estimator!r}"
            )
        if self.preavg_a < 1 or self.batch_k % self.preavg_a:
            raise ValueError(
                f"preavg_a ({self.preavg_a}) must be >= 1 and divide "
                f"batch_k ({self.batch_k})"
            )
        per_step = self.batch_k * (
            self.policy.n_candidates if self.policy.kind in IDS_KINDS else 1
        )
        if self.policy.kind != "tpo" and self.budget_t < per_step:
            raise ValueError(
                f"budget_t ({self.budget_t}) smaller than one macro-iteration "
                f"({per_step})"
            )
        if self.budget_t < 1:
            raise ValueError("budget_t must be >= 1")
        if not 0.0 < self.alpha_ci < 1.0:
            raise ValueError(f"alpha_ci must be in (0,1), got {self.alpha_ci}")
        if self.checkpoints is not None:
            cps = tuple(int(c) for c in self.checkpoints)
            if not cps or any(c < 1 for c in cps) or any(
                b <= a for a, b in zip(cps, cps[1:])
            ):
                raise ValueError("checkpoints must be strictly increasing and >= 1")
            if cps[-1] > self.budget_t:
                raise ValueError("checkpoints may not exceed budget_t")
            object.__setattr__(self, "checkpoints", cps)

    def resolved_checkpoints(self) -> tuple[int, ...]:
        if self.checkpoints is not None:
            return self.checkpoints
        return default_checkpoints(self.budget_t)


def default_checkpoints(budget_t: int, n: int = 10) -> tuple[int, ...]:
    """n log-spaced budgets ending exactly at budget_t."""
    lo = max(1, budget_t // 100)
    pts = np.unique(np.round(np.geomspace(lo, budget_t, n)).astype(int))
    return tuple(int(c) for c in pts)


@dataclass(frozen=True)
class MetricsRecord:
    budget_used: int
    n_macro: int
    root_estimate: float
    residual: float
    ci_length: float
    covered: bool


@dataclass(frozen=True)
class TraceRecord:
    n: int
    x: float
    b_k: int
    k_used: int
    p_hat: float
    root_estimate: float


def trace_to_text(trace: list[TraceRecord]) -> str:
    """Plain-text trace, one row per macro-iteration."""
    lines = ["# n x b_k k_used p_hat root_estimate"]
    for r in trace:
        lines.append(
            f"{r.n} {r.x:.17g} {r.b_k} {r.k_used} {r.p_hat:.17g} "
            f"{r.root_estimate:.17g}"
        )
    return "\n".join(lines) + "\n"


def metrics_snapshot(
    f: PiecewiseDensity,
    x_star: float,
    alpha: float,
    budget_used: int = 0,
    n_macro: int = 0,
) -> MetricsRecord:
    """Residual, credible-interval length and coverage of the current state."""
    if not f.support_lo <= x_star <= f.support_hi:
        raise ValueError(f"x_star {x_star} outside the support")
    med = f.median()
    lo, hi = f.credible_interval(alpha)
    return MetricsRecord(
        budget_used=budget_used,
        n_macro=n_macro,
        root_estimate=med,
        residual=abs(med - x_star),
        ci_length=hi - lo,
        covered=bool(lo <= x_star <= hi),
    )


def _interior(f: PiecewiseDensity, x: float) -> float:
    """Clamp a proposal so both sides of it hold strictly positive mass.

    Uniform/grid proposals can land where the float CDF saturates at 0 or 1,
    which would make the update degenerate; clamping into a narrow quantile
    band keeps the update defined while barely moving interior points.
    """
    lo = f.quantile(_EDGE_MASS)
    hi = f.quantile(1.0 - _EDGE_MASS)
    if not lo < hi:
        return lo
    return min(max(x, lo), hi)


def _resolve_p_fn(config: RunConfig, oracle) -> Callable | None:
    if config.p_override is not None:
        return config.p_override
    if config.estimator == "true":
        return lambda x: float(oracle.true_p(x))
    return None


def _query(oracle, x: float, k: int, a: int):
    if a == 1:
        return oracle.query_batch(x, k)
    return preaveraged_batch(oracle, x, k, a, allow_ragged=True)


def _make_signal(stats, estimator: str, p_known: float | None) -> UpdateSignal:
    if p_known is not None:
        return UpdateSignal(
            "batched-counts", p_hat=float(p_known), b_k=stats.b_k, k=stats.k
        )
    if estimator == "boost":
        direction = 1 if 2 * stats.b_k > stats.k else -1
        p_hat = clamp_estimate(
            boost_majority(empirical_majority(stats), stats.k), stats.k
        )
        return UpdateSignal("boosted-binary", p_hat=p_hat, direction=direction)
    if estimator == "clt":
        # a single-draw truncated batch carries no variance estimate; the
        # clamp at k=1 turns it into a no-op update anyway
        p_raw = clt_prob(stats) if stats.raw_count >= 2 else 1.0
        direction = 1 if stats.sum_z > 0.0 else -1
        p_hat = clamp_estimate(p_raw, stats.raw_count)
        return UpdateSignal("boosted-binary", p_hat=p_hat, direction=direction)
    if estimator == "bar":
        p_raw = empirical_majority(stats)
    elif estimator == "mode":
        p_raw = posterior_mode(minority_count(stats), stats.k)
    elif estimator == "median":
        p_raw = posterior_median(minority_count(stats), stats.k)
    elif estimator == "mean":
        p_raw = posterior_mean(minority_count(stats), stats.k)
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    p_hat = clamp_estimate(p_raw, stats.k)
    return UpdateSignal("batched-counts", p_hat=p_hat, b_k=stats.b_k, k=stats.k)


def _validate(config: RunConfig, oracle) -> None:
    lo, hi = oracle.domain
    if not lo < hi:
        raise ValueError(f"oracle domain ({lo}, {hi}) is empty")
    needs_fn = config.estimator == "clt" or config.policy.kind == "tpo"
    if needs_fn and not getattr(oracle, "provides_functional", False):
        raise ValueError(
            f"estimator/policy needs functional responses but oracle "
            f"{getattr(oracle, 'name', type(oracle).__name__)!r} is sign-only"
        )
    if config.policy.kind == "tpo":
        try:
            float(np.asarray(oracle.noise_scale(0.5 * (lo + hi))))
        except (AttributeError, NotImplementedError) as exc:
            raise ValueError(
                f"tpo needs the oracle's noise scale for its test boundary: {exc}"
            ) from None
    if config.estimator == "true" and config.p_override is None:
        if not getattr(oracle, "provides_true_p", False):
            raise ValueError(
                "estimator 'true' needs the oracle's exact accuracy or a "
                "p_override"
            )


def run_gpba(config: RunConfig, oracle):
    """Run the batched sequential procedure to budget exhaustion.

    Returns (final density, checkpoint MetricsRecords, trace).  Q-policies
    spend a final short batch if the budget does not divide evenly; IDS
    policies stop when less than one full candidate comparison remains.
    """
    if config.policy.kind == "tpo":
        return run_tpo_pba(config, oracle)
    _validate(config, oracle)
    spec = config.policy
    rng = np.random.default_rng(config.seed)
    p_fn = _resolve_p_fn(config, oracle)
    K, T = config.batch_k, config.budget_t
    f = uniform_prior(*oracle.domain)
    used = 0
    n = 0
    trace: list[TraceRecord] = []
    snaps = [(0, 0) + _summary(f, config.alpha_ci)]
    is_ids = spec.kind in IDS_KINDS
    while used < T:
        remaining = T - used
        if is_ids:
            if remaining < K * spec.n_candidates:
                break  # partial candidate comparison is ill-defined
            queried = []
            for x in ids_candidates(f, spec, rng):
                x = _interior(f, x)
                stats = _query(oracle, x, K, config.preavg_a)
                sig = _make_signal(
                    stats, config.estimator, p_fn(x) if p_fn else None
                )
                queried.append((x, sig, stats))
                used += stats.raw_count
            sel = ids_select(f, [(x, sig.p_hat, st) for x, sig, st in queried])
            x, sig, stats = queried[sel]
        else:
            x = _interior(f, _propose(f, spec, oracle, rng, n))
            stats = _query(oracle, x, min(K, remaining), config.preavg_a)
            used += stats.raw_count
            sig = _make_signal(stats, config.estimator, p_fn(x) if p_fn else None)
        f = apply_update(f, x, sig)
        n += 1
        trace.append(
            TraceRecord(
                n=n,
                x=x,
                b_k=stats.b_k,
                k_used=stats.raw_count,
                p_hat=sig.p_hat,
                root_estimate=f.median(),
            )
        )
        snaps.append((used, n) + _summary(f, config.alpha_ci))
    records = _checkpoint_records(config, snaps, oracle.root, used)
    return f, records, trace


def _propose(f, spec: PolicySpec, oracle, rng, n: int) -> float:
    if spec.kind == "syst-q":
        return syst_q_next(f, spec, n)
    if spec.kind == "rand-q":
        return rand_q_next(f, rng)
    if spec.kind in BASELINE_KINDS:
        return baseline_next(f, spec, oracle, rng)
    raise ValueError(f"policy kind {spec.kind!r} is not sequential")


def run_tpo_pba(config: RunConfig, oracle):
    """Median sampling with power-one adaptive batch sizes.

    Each macro-iteration samples the current median until the partial-sum
    test decides a direction (or the remaining budget runs out), then applies
    a single boosted update whose accuracy comes from the functional batch
    statistics.  Needs the oracle's true noise scale for the test boundary.
    """
    if config.policy.kind != "tpo":
        raise ValueError(f"run_tpo_pba needs a tpo policy, got {config.policy.kind!r}")
    _validate(config, oracle)
    alpha = config.policy.tpo_alpha
    T = config.budget_t
    f = uniform_prior(*oracle.domain)
    used = 0
    n = 0
    trace: list[TraceRecord] = []
    snaps = [(0, 0) + _summary(f, config.alpha_ci)]
    while used < T:
        x = _interior(f, f.median())
        sigma_x = float(oracle.noise_scale(x))
        direction, k_used, stats = tpo_query(
            oracle, x, sigma_x, alpha, budget_left=T - used
        )
        p_raw = clt_prob(stats) if k_used >= 2 else 1.0
        p_hat = clamp_estimate(p_raw, k_used)
        sig = UpdateSignal("boosted-binary", p_hat=p_hat, direction=direction)
        f = apply_update(f, x, sig)
        used += k_used
        n += 1
        trace.append(
            TraceRecord(
                n=n,
                x=x,
                b_k=stats.b_k,
                k_used=k_used,
                p_hat=p_hat,
                root_estimate=f.median(),
            )
        )
        snaps.append((used, n) + _summary(f, config.alpha_ci))
    records = _checkpoint_records(config, snaps, oracle.root, used)
    return f, records, trace


def _summary(f: PiecewiseDensity, alpha: float) -> tuple[float, float, float]:
    lo, hi = f.credible_interval(alpha)
    return (f.median(), lo, hi)


def _checkpoint_records(
    config: RunConfig, snaps, x_star: float, total_used: int
) -> list[MetricsRecord]:
    budgets = [s[0] for s in snaps]
    records = []
    for c in config.resolved_checkpoints():
        i = bisect.bisect_right(budgets, c) - 1
        used, n_macro, med, lo, hi = snaps[i]
        records.append(
            MetricsRecord(
                budget_used=min(c, total_used),
                n_macro=n_macro,
                root_estimate=med,
                residual=abs(med - x_star),
                ci_length=hi - lo,
                covered=bool(lo <= x_star <= hi),
            )
        )
    return records
