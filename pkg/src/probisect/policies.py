"""Query-location policies: where to spend the next batch of oracle calls.

Adaptive policies work off the current knowledge state f: information-directed
sampling compares a few candidate quantiles by expected entropy reduction,
quantile sampling queries a rotating or random quantile directly, and the
power-one sequential policy samples the median until a partial-sum test
decides a direction.  Known-accuracy baselines (true-gain argmax, median,
uniform) support the design-quality comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .density import PiecewiseDensity
from .estimators import BatchStats, tpo_boundary

__all__ = [
    "PolicySpec",
    "baseline_next",
    "ids_candidates",
    "ids_select",
    "info_gain",
    "rand_q_next",
    "syst_q_next",
    "tpo_query",
]

POLICY_KINDS = (
    "det-ids",
    "rand-ids",
    "syst-q",
    "rand-q",
    "tpo",
    "true-ids",
    "median",
    "uniform",
)
IDS_KINDS = ("det-ids", "rand-ids")
BASELINE_KINDS = ("true-ids", "median", "uniform")

_COINCIDE_TOL = 1e-12
_MAX_REDRAWS = 1000


@dataclass(frozen=True)
class PolicySpec:
    """Which policy to run and its knobs.

    quantiles drive det-ids candidates and the syst-q rotation (ascending
    order, cycled); m_candidates is the rand-ids candidate count; grid_size
    the true-ids argmax grid; tpo_alpha the power-one error level.
    """

    kind: str
    quantiles: tuple[float, ...] = (0.25, 0.75)
    m_candidates: int = 2
    tpo_alpha: float = 0.05
    grid_size: int = 1001

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        qs = tuple(float(q) for q in self.quantiles)
        if any(not 0.0 < q < 1.0 for q in qs) or any(
            b <= a for a, b in zip(qs, qs[1:])
        ):
            raise ValueError(
                f"quantiles must be strictly increasing inside (0,1), got {qs}"
            )
        object.__setattr__(self, "quantiles", qs)
        if self.kind in IDS_KINDS and self.n_candidates < 2:
            raise ValueError("IDS policies need at least 2 candidates")
        if not 0.0 < self.tpo_alpha <= 1.0:
            raise ValueError(f"tpo_alpha must be in (0, 1], got {self.tpo_alpha}")
        if self.grid_size < 3:
            raise ValueError(f"grid_size must be >= 3, got {self.grid_size}")

    @property
    def n_candidates(self) -> int:
        return len(self.quantiles) if self.kind == "det-ids" else self.m_candidates


def _entropy(q) -> np.ndarray:
    return -(xlogy(q, q) + xlogy(1.0 - q, 1.0 - q))


def info_gain(f: PiecewiseDensity, x, p) -> float:
    """Expected entropy reduction of one response at x with accuracy p.

    H(gamma) - H(p) in nats; nonnegative for p >= 1/2 because the predictive
    response probability gamma is never farther from 1/2 than p is.  Clamped
    at zero against rounding when the gain underflows.
    """
    p = np.asarray(p, dtype=float)
    if np.any((p < 0.5) | (p > 1.0)):
        raise ValueError("accuracy must be in [1/2, 1]")
    fx = f.cdf_at(x)
    gamma = p * (1.0 - fx) + (1.0 - p) * fx
    out = np.maximum(_entropy(gamma) - _entropy(p), 0.0)
    return float(out) if out.ndim == 0 else out


def ids_candidates(f: PiecewiseDensity, spec: PolicySpec, rng) -> list[float]:
    """Candidate query locations for one IDS macro-iteration.

    det-ids maps the fixed quantile list through f (no RNG consumed);
    rand-ids draws uniform quantile levels, redrawing any candidate that
    lands within 1e-12 of an earlier one so the gain comparison stays
    non-degenerate.
    """
    if spec.kind == "det-ids":
        return [f.quantile(q) for q in spec.quantiles]
    if spec.kind != "rand-ids":
        raise ValueError(f"not an IDS policy: {spec.kind!r}")
    cands: list[float] = []
    redraws = 0
    while len(cands) < spec.m_candidates:
        x = f.quantile(_clip_level(rng.uniform()))
        if all(abs(x - c) > _COINCIDE_TOL for c in cands):
            cands.append(x)
            continue
        redraws += 1
        if redraws > _MAX_REDRAWS:
            raise RuntimeError(
                "rand-ids could not find distinct candidates; the knowledge "
                "state has collapsed to near-point mass"
            )
    return cands


def ids_select(
    f: PiecewiseDensity, candidates: list[tuple[float, float, BatchStats]]
) -> int:
    """Index of the queried candidate with the largest estimated gain.

    candidates holds (location, estimated accuracy, batch stats) triples;
    ties break toward the lowest index.
    """
    if not candidates:
        raise ValueError("need at least one queried candidate")
    gains = [info_gain(f, x, p_hat) for x, p_hat, _ in candidates]
    return int(np.argmax(gains))


def syst_q_next(f: PiecewiseDensity, spec: PolicySpec, n: int) -> float:
    """Rotating quantile proposal: level quantiles[n mod M]."""
    qs = spec.quantiles
    return f.quantile(qs[n % len(qs)])


def rand_q_next(f: PiecewiseDensity, rng) -> float:
    """Random quantile proposal, i.e. one draw from f itself."""
    return f.quantile(_clip_level(rng.uniform()))


def _clip_level(u: float) -> float:
    # keep quantile levels strictly inside (0,1) so proposals stay interior
    return min(max(u, 1e-12), 1.0 - 1e-12)


def tpo_query(
    oracle, x: float, sigma: float, alpha: float, budget_left: int, rng=None
) -> tuple[int, int, BatchStats]:
    """Sample x until the partial sum crosses the power-one boundary.

    Draws functional responses one at a time; stops at the first k with
    |S_k| >= tpo_boundary(k, sigma, alpha), or when budget_left draws have
    been spent (truncation is normal termination).  Returns the decided
    direction (sign of S_k in the package convention), the number of draws,
    and the batch statistics of everything drawn.
    """
    if budget_left < 1:
        raise ValueError(f"budget_left must be >= 1, got {budget_left}")
    s = 0.0
    ssq = 0.0
    b = 0
    k = 0
    while k < budget_left:
        z = oracle.sample(x, rng=rng)
        k += 1
        s += z
        ssq += z * z
        b += z > 0.0
        if abs(s) >= tpo_boundary(k, sigma, alpha):
            break
    direction = 1 if s > 0.0 else -1
    stats = BatchStats(k=k, b_k=int(b), sum_z=s, sum_z_sq=ssq, raw_count=k)
    return direction, k, stats


def baseline_next(f: PiecewiseDensity, spec: PolicySpec, oracle, rng) -> float:
    """Known-accuracy baseline proposals.

    true-ids maximizes the exact information gain over a uniform grid of the
    domain (first argmax wins); median queries the current median; uniform
    ignores f entirely.
    """
    if spec.kind == "true-ids":
        if not getattr(oracle, "provides_true_p", False):
            raise ValueError("true-ids baseline needs an oracle with known accuracy")
        lo, hi = oracle.domain
        grid = np.linspace(lo, hi, spec.grid_size)
        gains = info_gain(f, grid, oracle.true_p(grid))
        return float(grid[int(np.argmax(gains))])
    if spec.kind == "median":
        return f.median()
    if spec.kind == "uniform":
        lo, hi = oracle.domain
        return float(rng.uniform(lo, hi))
    raise ValueError(f"not a baseline policy: {spec.kind!r}")
