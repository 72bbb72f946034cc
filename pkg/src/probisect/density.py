"""Piecewise-constant knowledge state over a bounded search interval.

The belief about the root location is kept as a piecewise-constant probability
density: strictly increasing knots and one log-height per interval.  Heights
live in log space because a long run multiplies interval masses by hundreds of
factors like 0.6**500, which underflow immediately in linear space.  Every
constructed instance is normalized to unit mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

__all__ = ["PiecewiseDensity", "uniform_prior"]

_RECORD_TAG = "piecewise-density"


@dataclass(frozen=True, eq=False)
class PiecewiseDensity:
    """Normalized piecewise-constant density.

    Parameters
    ----------
    knots : array of shape (m+1,)
        Strictly increasing breakpoints; the first and last are the support
        boundaries.
    log_heights : array of shape (m,)
        Natural log of the density value on each interval.  ``-inf`` marks an
        interval whose mass has been driven to zero; such intervals are kept
        rather than merged so the knot history of a run stays intact.

    Heights are renormalized on construction, so callers may pass unnormalized
    log scalings.
    """

    knots: np.ndarray
    log_heights: np.ndarray

    def __post_init__(self) -> None:
        knots = np.asarray(self.knots, dtype=float)
        logh = np.asarray(self.log_heights, dtype=float)
        if knots.ndim != 1 or logh.ndim != 1 or len(knots) != len(logh) + 1:
            raise ValueError(
                f"need m+1 knots for m intervals, got {len(knots)} knots "
                f"and {len(logh)} log heights"
            )
        if len(logh) < 1:
            raise ValueError("density needs at least one interval")
        if not np.all(np.isfinite(knots)):
            raise ValueError("knots must be finite")
        if not np.all(np.diff(knots) > 0.0):
            raise ValueError("knots must be strictly increasing")
        if np.any(np.isnan(logh)) or np.any(logh == np.inf):
            raise ValueError("log heights must be < inf and not NaN")
        total = logsumexp(logh + np.log(np.diff(knots)))
        if total == -np.inf:
            raise ValueError("density has zero total mass")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "log_heights", logh - total)

    @property
    def support_lo(self) -> float:
        return float(self.knots[0])

    @property
    def support_hi(self) -> float:
        return float(self.knots[-1])

    @property
    def n_intervals(self) -> int:
        return len(self.log_heights)

    @cached_property
    def _cum(self) -> np.ndarray:
        """Cumulative interval masses; _cum[i] = F(knots[i])."""
        weights = np.exp(self.log_heights) * np.diff(self.knots)
        cum = np.concatenate(([0.0], np.cumsum(weights)))
        cum = np.clip(cum, 0.0, 1.0)  # keep monotone under cumsum rounding
        cum[-1] = 1.0
        return cum

    def mass(self) -> float:
        """Total mass computed with compensated summation (diagnostic)."""
        return math.fsum(np.exp(self.log_heights) * np.diff(self.knots))

    def positive_support(self) -> tuple[float, float]:
        """Smallest and largest x bracketing all intervals of positive mass."""
        idx = np.nonzero(self.log_heights > -np.inf)[0]
        return float(self.knots[idx[0]]), float(self.knots[idx[-1] + 1])

    def side_log_masses(self, x: float) -> tuple[float, float]:
        """Log mass strictly left and strictly right of x.

        Computed from the log heights, not the cumulative map, so a side
        whose relative mass has underflowed past float-cdf resolution still
        reports its true (finite) log mass; -inf means genuinely empty.
        """
        x = float(x)
        k = self.knots
        if x <= k[0]:
            return -np.inf, 0.0
        if x >= k[-1]:
            return 0.0, -np.inf
        i = int(np.searchsorted(k, x, side="right")) - 1
        with np.errstate(divide="ignore"):
            terms = self.log_heights + np.log(np.diff(k))
            lpart = self.log_heights[i] + (
                np.log(x - k[i]) if x > k[i] else -np.inf
            )
            rpart = self.log_heights[i] + np.log(k[i + 1] - x)
        left = logsumexp(np.append(terms[:i], lpart))
        right = logsumexp(np.append(terms[i + 1 :], rpart))
        return float(left), float(right)

    def cdf_at(self, x):
        """F(x); accepts a scalar or an array, clamps outside the support."""
        return np.interp(x, self.knots, self._cum)

    def quantile(self, q: float) -> float:
        """Smallest x with F(x) >= q, by exact linear interpolation of F."""
        if not 0.0 < q < 1.0:
            raise ValueError(f"quantile level must be in (0, 1), got {q}")
        cum = self._cum
        i = int(np.searchsorted(cum, q, side="left"))
        if i == 0:
            return float(self.knots[0])
        j = i - 1
        # cum[j] < q <= cum[j+1] here, so the interval has positive mass
        x = self.knots[j] + (q - cum[j]) / np.exp(self.log_heights[j])
        return float(min(x, self.knots[j + 1]))

    def median(self) -> float:
        return self.quantile(0.5)

    def credible_interval(self, alpha: float) -> tuple[float, float]:
        """Central (1 - alpha) interval as (lower, upper) quantiles."""
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {alpha}")
        return self.quantile(alpha / 2.0), self.quantile(1.0 - alpha / 2.0)

    def apply_split_scaling(
        self, x: float, log_right: float, log_left: float
    ) -> "PiecewiseDensity":
        """Scale mass left/right of x by exp(log_left)/exp(log_right).

        Inserts x as a new knot unless it already is one, applies the log
        factors to the interval log heights on each side, and renormalizes.
        The interval count grows by at most one.
        """
        if not self.support_lo < x < self.support_hi:
            raise ValueError(
                f"split point {x} is outside the open support "
                f"({self.support_lo}, {self.support_hi})"
            )
        knots = self.knots
        logh = self.log_heights
        i = int(np.searchsorted(knots, x, side="left"))
        if knots[i] == x:
            new_knots = knots
            new_logh = np.concatenate((logh[:i] + log_left, logh[i:] + log_right))
        else:
            j = i - 1  # interval containing x gets split
            new_knots = np.insert(knots, i, x)
            new_logh = np.concatenate(
                (logh[: j + 1] + log_left, logh[j:] + log_right)
            )
        return PiecewiseDensity(new_knots, new_logh)

    def to_record(self) -> str:
        """One-line text record with full float64 precision (17 sig digits)."""
        parts = [_RECORD_TAG, str(self.n_intervals)]
        parts += [f"{v:.17g}" for v in self.knots]
        parts += [f"{v:.17g}" for v in self.log_heights]
        return " ".join(parts)

    @staticmethod
    def from_record(line: str) -> "PiecewiseDensity":
        fields = line.split()
        if not fields or fields[0] != _RECORD_TAG:
            raise ValueError("not a density record")
        m = int(fields[1])
        vals = [float(v) for v in fields[2:]]
        if len(vals) != 2 * m + 1:
            raise ValueError(
                f"record claims {m} intervals but carries {len(vals)} values"
            )
        return PiecewiseDensity(np.array(vals[: m + 1]), np.array(vals[m + 1 :]))


def uniform_prior(lo: float, hi: float) -> PiecewiseDensity:
    """Uniform density on (lo, hi), the standard starting knowledge state."""
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValueError(f"need finite lo < hi, got ({lo}, {hi})")
    return PiecewiseDensity(np.array([lo, hi]), np.array([0.0]))
