"""Monte-Carlo EM updates of the shrinkage rate hyperparameters.

Each shrinkage factor has a Gamma(shape, rate) prior whose rate is the tuned
quantity.  The M-step maximizer of the expected complete-data log-prior
``sum_k (shape_k * ln(rate_k) - rate_k * E[factor_k])`` is

    adaptative:  rate_k = shape_k / E[factor_k]
    global:      rate   = sum(shape) / sum(E[factor])

with the conditional expectations estimated by sample means over a window of
recent Gibbs draws.  For predictor-level factors the shape is (q+1)/2; for
group-level factors it is (q*kappa_g+1)/2, which makes the global numerators
p(q+1)/2 and (qp+m)/2 respectively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["EmSchedule", "em_update_ell", "em_update_gamma"]

# Guard against degenerate windows (e.g. every draw from an all-spike refresh).
RATE_MIN = 1e-8
RATE_MAX = 1e8


@dataclass(frozen=True)
class EmSchedule:
    """When and how the EM updates run.

    Updates happen every ``period`` sweeps during burn-in only (the
    post-burn-in kernel must stay fixed for the retained draws to form a
    valid Gibbs sample), using the draws since the previous update.
    """

    period: int = 100
    window: int | None = None
    max_updates: int | None = None

    def __post_init__(self) -> None:
        if self.period < 1:
            raise ValueError("period must be >= 1")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be >= 1")
        if self.max_updates is not None and self.max_updates < 0:
            raise ValueError("max_updates must be >= 0")


def _window_means(draws: np.ndarray) -> np.ndarray:
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    if draws.shape[0] < 1 or draws.size == 0:
        raise ValueError("empty draw window")
    if np.any(draws <= 0):
        raise ValueError("shrinkage draws must be positive")
    return draws.mean(axis=0)


def em_update_ell(draws: np.ndarray, shapes: np.ndarray, mode: str = "adaptative") -> np.ndarray:
    """Updated rates from a ``(window, k)`` array of shrinkage-factor draws.

    ``shapes`` holds the Gamma shape attached to each factor.  In global mode
    a single shared rate is returned, broadcast to length k.
    """
    means = _window_means(draws)
    shapes = np.broadcast_to(np.asarray(shapes, dtype=float), means.shape)
    if mode == "adaptative":
        rates = shapes / means
    elif mode == "global":
        rates = np.full_like(means, shapes.sum() / means.sum())
    else:
        raise ValueError(f"unknown shrinkage mode {mode!r}")
    return np.clip(rates, RATE_MIN, RATE_MAX)


def em_update_gamma(draws: np.ndarray, shapes: np.ndarray, mode: str = "adaptative") -> np.ndarray:
    """Group-level twin of :func:`em_update_ell` (same M-step, group shapes)."""
    return em_update_ell(draws, shapes, mode)
