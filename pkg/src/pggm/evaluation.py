"""Posterior summarization and benchmark metrics.

The direct-link matrix is estimated by the entrywise posterior median (exact
zeros wherever a column sits in the spike for at least half of the retained
draws); the response precision by the posterior mean.  Support recovery is
scored at the column level with the F-score, prediction with the mean squared
prediction error normalized per response entry.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError, EmptyChainError
from .gibbs import ChainOutput
from .model import Dataset, reparam_B

__all__ = ["PosteriorSummary", "summarize", "f_score", "mspe", "aggregate_runs"]


@dataclass
class PosteriorSummary:
    """Point estimates and inclusion frequencies from one chain."""

    delta_hat: np.ndarray          # (q, p), exact zeros on excluded columns
    omega_hat: np.ndarray          # (q, q), symmetrized posterior mean
    b_hat: np.ndarray              # (p, q), from the reparametrization
    inclusion_prob: np.ndarray     # (p,) column inclusion frequency
    group_inclusion_prob: Optional[np.ndarray] = None

    @property
    def support(self) -> np.ndarray:
        return np.any(self.delta_hat != 0.0, axis=0)


def summarize(chain: ChainOutput) -> PosteriorSummary:
    """Entrywise-median direct links, mean precision, derived coefficients.

    A column is excluded (exactly zero) iff its inclusion frequency is below
    one half; included columns take their entrywise medians over all draws.
    """
    if chain.n_draws == 0:
        raise EmptyChainError("chain holds no retained draws")
    draws = chain.delta_draws()                 # (k, q, p)
    inclusion = chain.delta.inclusion()
    delta_hat = np.median(draws, axis=0)
    delta_hat[:, inclusion < 0.5] = 0.0
    omega_hat = chain.omega.mean(axis=0)
    omega_hat = 0.5 * (omega_hat + omega_hat.T)
    b_hat = reparam_B(delta_hat, omega_hat)
    groups = chain.groups
    group_inc = np.zeros(groups.m)
    for k in range(chain.n_draws):
        idx = chain.delta.idx[k]
        seen = np.zeros(groups.m, dtype=bool)
        seen[np.unique(groups.column_group()[idx])] = True
        group_inc += seen
    group_inc /= chain.n_draws
    return PosteriorSummary(
        delta_hat=delta_hat,
        omega_hat=omega_hat,
        b_hat=b_hat,
        inclusion_prob=inclusion,
        group_inclusion_prob=group_inc,
    )


def f_score(est_support, true_support) -> tuple[float, float, float]:
    """(F, precision, recall) of an estimated support mask.

    Degenerate conventions: precision is 0 when nothing is selected, recall
    is 0 when the true support is empty, and F is 0 when its denominator
    vanishes.
    """
    est = np.asarray(est_support, dtype=bool)
    true = np.asarray(true_support, dtype=bool)
    if est.shape != true.shape:
        raise DataError(f"mask lengths differ: {est.shape} vs {true.shape}")
    tp = int(np.count_nonzero(est & true))
    fp = int(np.count_nonzero(est & ~true))
    fn = int(np.count_nonzero(~est & true))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return f, precision, recall


def mspe(b_hat: np.ndarray, test: Dataset) -> float:
    """Mean squared prediction error per response entry on a held-out split."""
    b_hat = np.asarray(b_hat, dtype=float)
    if b_hat.shape != (test.p, test.q):
        raise DataError(f"coefficients are {b_hat.shape}, expected {(test.p, test.q)}")
    resid = test.y - test.x @ b_hat
    return float(np.sum(resid * resid) / (test.n * test.q))


def aggregate_runs(per_run: dict[str, list[float]]) -> dict[str, dict[str, float]]:
    """Median and standard deviation of each metric across repetitions."""
    out: dict[str, dict[str, float]] = {}
    for name, values in per_run.items():
        arr = np.asarray(values, dtype=float)
        if arr.size == 0:
            raise ValueError(f"metric {name!r} has no values")
        sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        out[name] = {"median": float(np.median(arr)), "sd": sd, "n": int(arr.size)}
    return out
