"""Bayesian knowledge-state updates for sign responses of uncertain accuracy.

A query at x returns a direction (is the root left or right?) that is correct
with probability p.  Conditioning the piecewise density on one response, or on
the counts of a whole batch taken at the same x, multiplies the mass on each
side of x by closed-form factors and renormalizes.  All factors are handled in
log space; a batch of several hundred responses is routine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .density import PiecewiseDensity

__all__ = [
    "DegenerateUpdateError",
    "UpdateSignal",
    "apply_update",
    "batched_update",
    "boosted_update",
    "gamma_prob",
    "right_scaling_factor",
    "step_update",
]

SIGNAL_KINDS = ("batched-counts", "boosted-binary")


class DegenerateUpdateError(ValueError):
    """Raised when a query point carries truly zero mass on one side."""


def _check_accuracy(p: float) -> None:
    if not 0.5 <= p <= 1.0:
        raise ValueError(f"accuracy must be in [1/2, 1], got {p}")


def _check_interior(f: PiecewiseDensity, x: float) -> float:
    # judged on log masses: a side whose relative mass merely underflows the
    # float cdf is still a valid (if extreme) conditioning target
    log_left, log_right = f.side_log_masses(x)
    if log_left == -np.inf or log_right == -np.inf:
        side = "left" if log_left == -np.inf else "right"
        raise DegenerateUpdateError(
            f"query at {x} has zero mass on its {side} side, "
            "the update would be degenerate"
        )
    return float(f.cdf_at(x))


@dataclass(frozen=True)
class UpdateSignal:
    """One knowledge-state update, ready to apply at a query point.

    kind 'batched-counts' conditions on b_k positive responses out of k at the
    same point, with accuracy estimate p_hat.  kind 'boosted-binary' conditions
    on a single aggregated direction (+1 right, -1 left) of accuracy p_hat.
    """

    kind: str
    p_hat: float
    b_k: int = 0
    k: int = 0
    direction: int = 0

    def __post_init__(self) -> None:
        if self.kind not in SIGNAL_KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}")
        _check_accuracy(self.p_hat)
        if self.kind == "batched-counts":
            if self.k < 1 or not 0 <= self.b_k <= self.k:
                raise ValueError(
                    f"need 0 <= b_k <= k with k >= 1, got b_k={self.b_k} k={self.k}"
                )
        else:
            if self.direction not in (1, -1):
                raise ValueError(f"direction must be +1 or -1, got {self.direction}")


def gamma_prob(f: PiecewiseDensity, x: float, p: float) -> float:
    """Predictive probability of observing a 'root is right' response at x."""
    _check_accuracy(p)
    fx = float(f.cdf_at(x))
    return p * (1.0 - fx) + (1.0 - p) * fx


def step_update(
    f: PiecewiseDensity, x: float, y: int, p: float
) -> PiecewiseDensity:
    """Condition on a single response y (+1 root right, -1 root left).

    A +1 response multiplies the mass right of x by p and left by 1-p before
    renormalizing (the normalizer is the predictive gamma_prob); -1 swaps the
    factors.  p = 1/2 is a no-op, p = 1 truncates one side.
    """
    _check_accuracy(p)
    if y not in (1, -1):
        raise ValueError(f"response must be +1 or -1, got {y}")
    _check_interior(f, x)
    log_p = np.log(p) if p > 0 else -np.inf
    log_q = np.log1p(-p) if p < 1 else -np.inf
    if y == 1:
        return f.apply_split_scaling(x, log_right=log_p, log_left=log_q)
    return f.apply_split_scaling(x, log_right=log_q, log_left=log_p)


def _log_count_factors(b_k: int, k: int, p_hat: float) -> tuple[float, float]:
    """Log likelihood factors (right-of-x, left-of-x) for b_k of k positives.

    xlogy keeps the p_hat in {0, 1} convention: a zero count times log 0
    contributes nothing instead of NaN.
    """
    log_rho = float(xlogy(b_k, p_hat) + xlogy(k - b_k, 1.0 - p_hat))
    log_rho_flip = float(xlogy(b_k, 1.0 - p_hat) + xlogy(k - b_k, p_hat))
    return log_rho, log_rho_flip


def batched_update(
    f: PiecewiseDensity, x: float, b_k: int, k: int, p_hat: float
) -> PiecewiseDensity:
    """Condition on a whole batch at x in one multiplicative step.

    Equivalent to composing k single-response updates with the same p_hat in
    any order, but done as one split-and-scale, so the knot count grows by at
    most one per batch rather than one per response.
    """
    _check_accuracy(p_hat)
    if k < 1 or not 0 <= b_k <= k:
        raise ValueError(f"need 0 <= b_k <= k with k >= 1, got b_k={b_k} k={k}")
    _check_interior(f, x)
    log_rho, log_rho_flip = _log_count_factors(b_k, k, p_hat)
    if log_rho == -np.inf and log_rho_flip == -np.inf:
        raise DegenerateUpdateError(
            "batch likelihood vanishes on both sides (p_hat at a boundary "
            "with mixed counts)"
        )
    return f.apply_split_scaling(x, log_right=log_rho, log_left=log_rho_flip)


def right_scaling_factor(
    f: PiecewiseDensity, x: float, b_k: int, k: int, p_hat: float
) -> float:
    """Factor by which the batched update scales the density right of x."""
    _check_accuracy(p_hat)
    if k < 1 or not 0 <= b_k <= k:
        raise ValueError(f"need 0 <= b_k <= k with k >= 1, got b_k={b_k} k={k}")
    fx = _check_interior(f, x)
    log_rho, log_rho_flip = _log_count_factors(b_k, k, p_hat)
    log_norm = np.logaddexp(log_rho_flip + np.log(fx), log_rho + np.log1p(-fx))
    return float(np.exp(log_rho - log_norm))


def boosted_update(
    f: PiecewiseDensity, x: float, signal: UpdateSignal
) -> PiecewiseDensity:
    """Condition on one aggregated direction of boosted accuracy."""
    if signal.kind != "boosted-binary":
        raise ValueError(f"boosted_update needs a boosted-binary signal, got {signal.kind!r}")
    return step_update(f, x, signal.direction, signal.p_hat)


def apply_update(
    f: PiecewiseDensity, x: float, signal: UpdateSignal
) -> PiecewiseDensity:
    if signal.kind == "batched-counts":
        return batched_update(f, x, signal.b_k, signal.k, signal.p_hat)
    return boosted_update(f, x, signal)
