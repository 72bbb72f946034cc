"""Stochastic sign oracles: synthetic test functions and a Bermudan put.

Sign convention used everywhere: a response of +1 is evidence that the root
lies to the RIGHT of the query point.  The latent functions are therefore
arranged to be positive left of the root and negative right of it, and a
response is just the sign of one noisy functional draw.

An oracle owns its RNG stream; concurrent runs must use separate instances.
Every oracle exposes:

    domain          (lo, hi) search interval
    root            ground-truth root location (for metrics)
    draw_values     raw functional draws, sign convention applied
    sample          one functional draw
    query_batch     k draws folded into BatchStats
    n_calls         running count of raw draws taken
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import stats

from .estimators import BatchStats

__all__ = [
    "BermudanPutOracle",
    "SyntheticOracle",
    "export_boundary_csv",
    "lattice_boundary",
    "make_synthetic",
    "preaveraged_batch",
]


def _stats_from_values(z: np.ndarray, n_signs: int, b: int) -> BatchStats:
    return BatchStats(
        k=n_signs,
        b_k=b,
        sum_z=float(np.sum(z)),
        sum_z_sq=float(z @ z),
        raw_count=len(z),
    )


class SyntheticOracle:
    """Gaussian-noise oracle around a known monotone-through-root function.

    fn must be positive left of root and negative right of it; noise_fn gives
    the location-dependent noise scale.  Both must accept numpy arrays.
    """

    provides_true_p = True
    provides_functional = True

    def __init__(
        self,
        fn: Callable,
        noise_fn: Callable,
        domain: tuple[float, float],
        root: float,
        seed=None,
        name: str = "synthetic",
    ):
        lo, hi = float(domain[0]), float(domain[1])
        if not lo < root < hi:
            raise ValueError(f"root {root} outside domain ({lo}, {hi})")
        self.fn = fn
        self.noise_fn = noise_fn
        self.domain = (lo, hi)
        self.root = float(root)
        self.name = name
        self.rng = np.random.default_rng(seed)
        self.n_calls = 0

    def _check_domain(self, x: float) -> None:
        lo, hi = self.domain
        if not lo <= x <= hi:
            raise ValueError(f"query {x} outside domain ({lo}, {hi})")

    def noise_scale(self, x):
        return self.noise_fn(np.asarray(x, dtype=float))

    def true_p(self, x):
        """Probability that one response points toward the root; 1/2 at it."""
        x = np.asarray(x, dtype=float)
        out = stats.norm.cdf(np.abs(self.fn(x)) / self.noise_fn(x))
        return float(out) if out.ndim == 0 else out

    def draw_values(self, x: float, k: int, rng=None) -> np.ndarray:
        self._check_domain(x)
        gen = self.rng if rng is None else rng
        self.n_calls += k
        x = float(x)
        return self.fn(x) + self.noise_fn(x) * gen.standard_normal(k)

    def sample(self, x: float, rng=None) -> float:
        return float(self.draw_values(x, 1, rng=rng)[0])

    def query_batch(self, x: float, k: int, rng=None) -> BatchStats:
        if k < 1:
            raise ValueError(f"batch size must be >= 1, got {k}")
        z = self.draw_values(x, k, rng=rng)
        return _stats_from_values(z, n_signs=k, b=int(np.count_nonzero(z > 0.0)))


def make_synthetic(name: str, seed=None, x_star: float = 1.0 / 3.0) -> SyntheticOracle:
    """Benchmark oracles h1, h2, h3 on (0, 1) with root at x_star.

    h1 is linear with constant noise, h2 exponential with a noise-scale jump
    at the root (quiet left, loud right), h3 cubic so the signal is nearly
    flat near the root.
    """
    if not 0.0 < x_star < 1.0:
        raise ValueError(f"x_star must be inside (0, 1), got {x_star}")
    if name == "h1":
        fn = lambda x: x_star - x
        noise = lambda x: np.full_like(np.asarray(x, dtype=float), 0.2)
    elif name == "h2":
        fn = lambda x: np.exp(2.0 * (x_star - x)) - 1.0
        noise = lambda x: np.where(np.asarray(x, dtype=float) < x_star, 0.2, 1.0)
    elif name == "h3":
        fn = lambda x: (x_star - x) ** 3
        noise = lambda x: np.full_like(np.asarray(x, dtype=float), 0.025)
    else:
        raise ValueError(f"unknown synthetic function {name!r}; use h1, h2 or h3")
    return SyntheticOracle(fn, noise, (0.0, 1.0), x_star, seed=seed, name=name)


def lattice_boundary(
    strike: float = 40.0,
    rate: float = 0.06,
    vol: float = 0.2,
    maturity: float = 1.0,
    n_dates: int = 50,
    n_lattice_steps: int = 5000,
) -> tuple[np.ndarray, np.ndarray]:
    """Exercise boundary of a Bermudan put from a binomial lattice.

    Prices with a Cox-Ross-Rubinstein lattice in which early exercise is
    allowed only at the n_dates equally spaced dates.  Returns (times, values)
    for dates 1..n_dates; values[-1] is the strike (exercise at expiry iff in
    the money).  The boundary at a date is the largest node where exercise is
    optimal, linearly interpolated against the next node up.
    """
    if n_dates < 1 or n_lattice_steps < n_dates or n_lattice_steps % n_dates:
        raise ValueError(
            f"lattice steps ({n_lattice_steps}) must be a positive multiple "
            f"of the date count ({n_dates})"
        )
    dt = maturity / n_lattice_steps
    u = math.exp(vol * math.sqrt(dt))
    disc = math.exp(-rate * dt)
    q = (math.exp(rate * dt) - 1.0 / u) / (u - 1.0 / u)
    stride = n_lattice_steps // n_dates

    j = np.arange(n_lattice_steps + 1)
    prices = strike * u ** (2.0 * j - n_lattice_steps)
    values = np.maximum(strike - prices, 0.0)
    boundary = np.full(n_dates, np.nan)
    boundary[-1] = strike
    for s in range(n_lattice_steps - 1, -1, -1):
        values = disc * (q * values[1 : s + 2] + (1.0 - q) * values[0 : s + 1])
        if s % stride == 0 and s > 0:
            prices_s = strike * u ** (2.0 * np.arange(s + 1) - s)
            intrinsic = np.maximum(strike - prices_s, 0.0)
            gap = intrinsic - values
            idx = np.nonzero(gap > 0.0)[0]
            if len(idx) == 0:
                raise RuntimeError(
                    f"no exercise-optimal node at date {s // stride}; "
                    "lattice too coarse"
                )
            m = int(idx[-1])
            b = prices_s[m]
            if m + 1 <= s:
                b += gap[m] / (gap[m] - gap[m + 1]) * (prices_s[m + 1] - prices_s[m])
            boundary[s // stride - 1] = min(b, strike)
            values = np.maximum(values, intrinsic)
    times = maturity * np.arange(1, n_dates + 1) / n_dates
    return times, boundary


def export_boundary_csv(path, times: np.ndarray, boundary: np.ndarray) -> None:
    """Write the per-date boundary as CSV (date, boundary)."""
    with open(path, "w") as fh:
        fh.write("date,boundary\n")
        for t, b in zip(times, boundary):
            fh.write(f"{t:.17g},{b:.17g}\n")


class BermudanPutOracle:
    """Pathwise timing-value oracle for one date of a Bermudan put.

    A query at spot x simulates the remaining exercise dates under exact
    lognormal GBM increments, stops at the first date the path falls to or
    below the lattice exercise boundary (else at maturity), and returns the
    difference between the discounted future reward and the discounted
    immediate reward.  The sign is then flipped so draws are positive left of
    the boundary, matching the package-wide convention; the root of the mean
    response is the exercise boundary at the evaluation date.
    """

    provides_true_p = False
    provides_functional = True

    def __init__(
        self,
        volatility: float = 0.2,
        n_dates: int = 50,
        eval_time: float = 0.6,
        n_lattice_steps: int = 5000,
        strike: float = 40.0,
        rate: float = 0.06,
        maturity: float = 1.0,
        domain: tuple[float, float] = (25.0, 40.0),
        seed=None,
        boundary: np.ndarray | None = None,
    ):
        if volatility <= 0.0:
            raise ValueError(f"volatility must be positive, got {volatility}")
        idx_real = eval_time / maturity * n_dates
        idx = round(idx_real)
        if abs(idx_real - idx) > 1e-9 or not 1 <= idx <= n_dates - 1:
            raise ValueError(
                f"evaluation time {eval_time} is not an interior exercise date "
                f"(dates are multiples of {maturity / n_dates})"
            )
        self.volatility = volatility
        self.n_dates = n_dates
        self.eval_index = int(idx)
        self.strike = strike
        self.rate = rate
        self.maturity = maturity
        self.domain = (float(domain[0]), float(domain[1]))
        if boundary is None:
            _, boundary = lattice_boundary(
                strike, rate, volatility, maturity, n_dates, n_lattice_steps
            )
        boundary = np.asarray(boundary, dtype=float)
        if len(boundary) != n_dates:
            raise ValueError("boundary table must cover every exercise date")
        self.boundary = boundary
        self.root = float(boundary[self.eval_index - 1])
        self.rng = np.random.default_rng(seed)
        self.n_calls = 0
        # per-step discounted payoff pieces reused by every batch
        self._dt = maturity / n_dates
        self._fwd_dates = np.arange(self.eval_index + 1, n_dates + 1)
        self._fwd_disc = np.exp(-rate * self._fwd_dates * self._dt)
        self._fwd_bnd = boundary[self._fwd_dates - 1]

    def noise_scale(self, x):
        raise NotImplementedError("timing-value noise has no closed-form scale")

    def draw_values(self, x: float, k: int, rng=None) -> np.ndarray:
        lo, hi = self.domain
        if not lo <= x <= hi:
            raise ValueError(f"query {x} outside domain ({lo}, {hi})")
        gen = self.rng if rng is None else rng
        self.n_calls += k
        n_fwd = len(self._fwd_dates)
        steps = (self.rate - 0.5 * self.volatility**2) * self._dt + (
            self.volatility * math.sqrt(self._dt)
        ) * gen.standard_normal((k, n_fwd))
        paths = np.exp(math.log(x) + np.cumsum(steps, axis=1))
        hit = paths <= self._fwd_bnd[None, :]
        any_hit = hit.any(axis=1)
        first = np.where(any_hit, hit.argmax(axis=1), n_fwd - 1)
        rows = np.arange(k)
        payoff = self._fwd_disc[first] * np.maximum(
            self.strike - paths[rows, first], 0.0
        )
        immediate = math.exp(-self.rate * self.eval_index * self._dt) * max(
            self.strike - x, 0.0
        )
        return -(payoff - immediate)  # flip: positive when exercise-now wins

    def timing_value_sample(self, x: float, rng=None) -> float:
        return float(self.draw_values(x, 1, rng=rng)[0])

    sample = timing_value_sample

    def query_batch(self, x: float, k: int, rng=None) -> BatchStats:
        if k < 1:
            raise ValueError(f"batch size must be >= 1, got {k}")
        z = self.draw_values(x, k, rng=rng)
        return _stats_from_values(z, n_signs=k, b=int(np.count_nonzero(z > 0.0)))


def preaveraged_batch(
    oracle, x: float, k: int, a: int, rng=None, allow_ragged: bool = False
) -> BatchStats:
    """Batch of k raw draws folded into k/a pre-averaged sign responses.

    Each group of a consecutive draws contributes the sign of its mean, which
    boosts the per-response accuracy when the noise is heavy-tailed or skewed.
    The functional sums still cover every raw draw (raw_count = k), so
    mean-based estimation loses nothing.  allow_ragged permits a final short
    group; it exists for spending a truncated budget remainder.
    """
    if a < 1:
        raise ValueError(f"pre-averaging width must be >= 1, got {a}")
    if k < 1:
        raise ValueError(f"batch size must be >= 1, got {k}")
    if k % a and not allow_ragged:
        raise ValueError(f"pre-averaging width {a} must divide the batch size {k}")
    z = oracle.draw_values(x, k, rng=rng)
    n_full = k // a
    means = []
    if n_full:
        means.append(z[: n_full * a].reshape(n_full, a).mean(axis=1))
    if k % a:
        means.append([z[n_full * a :].mean()])
    means = np.concatenate(means)
    return _stats_from_values(
        z, n_signs=len(means), b=int(np.count_nonzero(means > 0.0))
    )
