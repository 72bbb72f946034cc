"""Estimators of the unknown response accuracy p at a query point.

A batch of k sign responses at the same point yields b_k positive counts and,
when the oracle exposes them, the sum and sum of squares of the underlying
functional draws.  Everything an estimator may use is carried in BatchStats.

Sign-based estimators work off the minority count j = min(b_k, k - b_k), since
the response accuracy enters the batch likelihood only through how lopsided
the counts are.  They stay finite at any batch size by keeping likelihoods in
log space and Beta integrals in regularized form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, stats
from scipy.special import betainc, betaln, xlogy

__all__ = [
    "BatchStats",
    "boost_majority",
    "clamp_estimate",
    "clt_prob",
    "empirical_majority",
    "exact_bias",
    "majority_likelihood",
    "minority_count",
    "posterior_mean",
    "posterior_median",
    "posterior_mode",
    "posterior_pdf_unnorm",
    "tpo_boundary",
]

_GRID_SIZE = 1001
_GOLDEN_TOL = 1e-10
_MEDIAN_TOL = 1e-8


@dataclass(frozen=True)
class BatchStats:
    """Sufficient statistics of one batch of oracle responses at a point.

    k counts the sign responses and b_k the positive ones among them.  The
    functional sums, when present, accumulate raw oracle draws; raw_count says
    how many.  Without pre-averaging raw_count == k; with pre-averaging over
    groups of size a, k = raw_count / a sign responses are formed while the
    sums still cover every raw draw.
    """

    k: int
    b_k: int
    sum_z: float | None = None
    sum_z_sq: float | None = None
    raw_count: int | None = None

    def __post_init__(self) -> None:
        if self.k < 1 or not 0 <= self.b_k <= self.k:
            raise ValueError(
                f"need 0 <= b_k <= k with k >= 1, got b_k={self.b_k} k={self.k}"
            )
        if (self.sum_z is None) != (self.sum_z_sq is None):
            raise ValueError("functional sums must be given together")
        n = self.raw_count if self.raw_count is not None else self.k
        if n < self.k:
            raise ValueError(f"raw_count {n} smaller than sign count {self.k}")
        object.__setattr__(self, "raw_count", n)
        if self.sum_z is not None:
            # Cauchy-Schwarz, with slack for accumulation rounding
            floor_ = self.sum_z**2 / n
            if self.sum_z_sq < floor_ - 1e-8 * max(1.0, floor_):
                raise ValueError("sum_z_sq below (sum_z)^2 / raw_count")

    @property
    def has_functional(self) -> bool:
        return self.sum_z is not None


def minority_count(stats_: BatchStats) -> int:
    return min(stats_.b_k, stats_.k - stats_.b_k)


def _check_minority(j: int, k: int) -> None:
    if k < 1 or j < 0 or j > k // 2:
        raise ValueError(
            f"minority count must satisfy 0 <= j <= floor(k/2), got j={j} k={k}"
        )


def empirical_majority(stats_: BatchStats) -> float:
    """Majority proportion max(b_k/k, 1 - b_k/k); never below 1/2."""
    frac = stats_.b_k / stats_.k
    return max(frac, 1.0 - frac)


def majority_likelihood(j: int, k: int, p: float) -> float:
    """Probability of observing minority count j in a batch of k.

    For a decided batch the minority may sit on either side, so two binomial
    terms contribute; an even-k tie has a single term.
    """
    _check_minority(j, k)
    if not 0.5 <= p <= 1.0:
        raise ValueError(f"accuracy must be in [1/2, 1], got {p}")
    if 2 * j == k:
        return float(stats.binom.pmf(j, k, p))
    return float(stats.binom.pmf(j, k, p) + stats.binom.pmf(j, k, 1.0 - p))


def posterior_pdf_unnorm(p, j: int, k: int):
    """Unnormalized posterior density of the accuracy on (1/2, 1).

    Uniform prior on (1/2, 1); the likelihood of minority count j folds the
    two side assignments together.  Vectorized in p.
    """
    _check_minority(j, k)
    p = np.asarray(p, dtype=float)
    if np.any((p < 0.0) | (p > 1.0)):
        raise ValueError("accuracy values must lie in [0, 1]")
    out = np.exp(_log_posterior(p, j, k))
    return float(out) if out.ndim == 0 else out


def _log_posterior(p, j: int, k: int):
    with np.errstate(divide="ignore", invalid="ignore"):
        if 2 * j == k:
            return xlogy(j, p) + xlogy(j, 1.0 - p)
        a = xlogy(j, p) + xlogy(k - j, 1.0 - p)
        b = xlogy(k - j, p) + xlogy(j, 1.0 - p)
        return np.logaddexp(a, b)


def _golden_max(fun, lo: float, hi: float, tol: float) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


@lru_cache(maxsize=4096)
def posterior_mode(j: int, k: int) -> float:
    """Posterior mode on [1/2, 1]: coarse grid, then golden-section refinement.

    The endpoints compete as candidates, so a monotone posterior returns an
    exact boundary value.
    """
    _check_minority(j, k)
    grid = np.linspace(0.5, 1.0, _GRID_SIZE)
    vals = _log_posterior(grid, j, k)
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, _GRID_SIZE - 1)]
    x = _golden_max(lambda p: _log_posterior(p, j, k), lo, hi, _GOLDEN_TOL)
    best = max(
        [(float(_log_posterior(q, j, k)), q) for q in (0.5, 1.0, x)],
        key=lambda t: t[0],
    )
    return best[1]


def _scaled_posterior(j: int, k: int):
    """Posterior rescaled by its grid maximum so quad sees O(1) values."""
    grid = np.linspace(0.5, 1.0, 257)
    log_c = float(np.max(_log_posterior(grid, j, k)))

    def fun(p):
        return np.exp(_log_posterior(p, j, k) - log_c)

    return fun


@lru_cache(maxsize=4096)
def posterior_median(j: int, k: int) -> float:
    """Posterior median by adaptive quadrature and root bracketing."""
    _check_minority(j, k)
    fun = _scaled_posterior(j, k)
    total, _ = integrate.quad(fun, 0.5, 1.0, limit=200)

    def gap(m: float) -> float:
        part, _ = integrate.quad(fun, 0.5, m, limit=200)
        return part - 0.5 * total

    return float(optimize.brentq(gap, 0.5, 1.0, xtol=_MEDIAN_TOL))


@lru_cache(maxsize=4096)
def posterior_mean(j: int, k: int) -> float:
    """Posterior mean in closed form via regularized incomplete Beta terms.

    Each piece of the posterior integrates over (1/2, 1) to a Beta function
    times an upper tail; 1 - I_{1/2}(a, b) = I_{1/2}(b, a) keeps the tails
    accurate when one side is tiny.
    """
    _check_minority(j, k)

    def upper_term(a: float, b: float) -> float:
        return math.exp(betaln(a, b) + math.log(betainc(b, a, 0.5)))

    if 2 * j == k:
        num = upper_term(j + 2, j + 1)
        den = upper_term(j + 1, j + 1)
    else:
        num = upper_term(j + 2, k - j + 1) + upper_term(k - j + 2, j + 1)
        den = upper_term(j + 1, k - j + 1) + upper_term(k - j + 1, j + 1)
    return num / den


def boost_majority(p_hat: float, k: int) -> float:
    """Probability that a batch of k responses shows a strict correct majority.

    An even-k tie counts as no majority.  Boosting turns a per-response
    accuracy into the accuracy of the batch's majority vote.
    """
    if not 0.5 <= p_hat <= 1.0:
        raise ValueError(f"accuracy must be in [1/2, 1], got {p_hat}")
    if k < 1:
        raise ValueError(f"batch size must be >= 1, got {k}")
    return float(stats.binom.sf(k // 2, k, p_hat))


def clt_prob(stats_: BatchStats) -> float:
    """Accuracy of the batch-mean direction via a normal approximation.

    Uses the raw functional draws: with mean m and sample deviation s over n
    draws, the batch mean's sign is correct with probability about
    Phi(sqrt(n) |m| / s).  Zero sample variance means every draw agreed, which
    is treated as a certain direction (or as no information if all draws are
    exactly zero).
    """
    if not stats_.has_functional:
        raise ValueError("clt estimator needs functional sums in the batch")
    n = stats_.raw_count
    if n < 2:
        raise ValueError(f"clt estimator needs at least 2 draws, got {n}")
    mean = stats_.sum_z / n
    var = (stats_.sum_z_sq - n * mean * mean) / (n - 1)
    if var <= 0.0:
        return 0.5 if mean == 0.0 else 1.0
    return float(stats.norm.cdf(math.sqrt(n) * abs(mean) / math.sqrt(var)))


def exact_bias(p: float, k: int) -> float:
    """Exact bias E[majority proportion] - p for a batch of k responses.

    Closed form from splitting the expectation at the majority threshold;
    needs k >= 3 for the inner binomial tail to be well defined.
    """
    if not 0.5 <= p <= 1.0:
        raise ValueError(f"accuracy must be in [1/2, 1], got {p}")
    if k < 3:
        raise ValueError(f"bias formula needs k >= 3, got {k}")
    half = math.ceil(k / 2)
    tail_k = float(stats.binom.cdf(half - 1, k, p))
    tail_km1 = float(stats.binom.cdf(half - 2, k - 1, p))
    return tail_k - 2.0 * p * tail_km1


def tpo_boundary(k: int, sigma: float, alpha: float) -> float:
    """Power-one sequential test boundary for the k-th partial sum."""
    if k < 1:
        raise ValueError(f"step index must be >= 1, got {k}")
    if sigma <= 0.0:
        raise ValueError(f"noise scale must be positive, got {sigma}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    return sigma * math.sqrt((k + 1) * (math.log(k + 1) - 2.0 * math.log(alpha)))


def clamp_estimate(p_hat: float, k: int) -> float:
    """Clamp an accuracy estimate into [1/2, 1 - 1/(2k)].

    The upper cap keeps a unanimous batch from producing p_hat = 1, which
    would truncate the knowledge state irreversibly.
    """
    if k < 1:
        raise ValueError(f"batch size must be >= 1, got {k}")
    return min(max(p_hat, 0.5), 1.0 - 0.5 / k)
