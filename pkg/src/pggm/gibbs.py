"""Gibbs samplers for direct-link estimation under four sparsity regimes.

Variants
--------
``none``  no sparsity (spike probability pinned at zero)
``s``     column-level spike-and-slab
``gs``    group-level spike-and-slab (whole blocks zeroed jointly)
``sgs``   bi-level: group spikes plus within-group column spikes

One sweep updates, in fixed order: the direct-link columns/blocks, the
response precision, the shrinkage factors (column level before group level),
then the spike probabilities (group level before column level).  Each block
draws from its own stream derived from ``(seed, sweep, block)``, so variants
that coincide mathematically (unit groups; one level of the bi-level model
switched off) consume randomness identically and produce bit-identical
chains.

Spike probabilities are always evaluated in log space (``log1p`` terms and
Cholesky log-determinants fed through a stable sigmoid); nothing is ever
exponentiated above zero.

For ``q = 1`` every update uses the scalar conditionals directly; for
``q > 1`` the response-precision draw is replaced by the MGIG mode obtained
from the algebraic Riccati equation, and the output metadata records that the
precision chain is mode-propagated rather than sampled.

The ``*_conditional`` methods expose, for each parameter block, the exact
distribution the sweep would draw from; the oracle suite checks these against
the joint posterior density, so the sampler and its audit share one set of
formulas.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .distributions import GigParams, sample_gig, sample_gig_vec
from .errors import ChainAbortError, NumericalError
from .model import (
    ChainState,
    Dataset,
    GroupStructure,
    Hyperparameters,
    count_sparsity,
    initial_state,
)
from .riccati import MgigParams, _mode_with_info
from .streams import stream
from .tuning import EmSchedule, em_update_ell, em_update_gamma

__all__ = ["GibbsConfig", "ChainOutput", "GibbsChain", "run_chain", "VARIANTS"]

VARIANTS = ("none", "s", "gs", "sgs")

# Sweep-block stream tags.
_TAG_DELTA, _TAG_OMEGA, _TAG_SHRINK, _TAG_PI = 0, 1, 2, 3

# Quadratic forms below this are treated as an exact zero a-term (Gamma limit).
_QUAD_FLOOR = 1e-280

# Period of the from-scratch consistency audit of caches and counters.
_AUDIT_PERIOD = 100

_NEG_INF = float("-inf")
_LOG_2PI = math.log(2.0 * math.pi)


def _log(x: float) -> float:
    return math.log(x) if x > 0.0 else _NEG_INF


def _sigmoid(x: float) -> float:
    if x != x:  # NaN guard: only reachable through inf - inf mixtures
        raise NumericalError("spike probability is undefined (0/0 mixture weights)")
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


def _spike_prob(log_rho: float, log_w: float, log_t: float) -> float:
    """P(spike) for mixture weights ``rho : w * t`` given in logs."""
    if log_rho == _NEG_INF:
        return 0.0
    if log_w == _NEG_INF:
        return 1.0
    return _sigmoid(log_rho - (log_w + log_t))


def _spike_logs(pi: float) -> tuple[float, float]:
    return _log(pi), math.log1p(-pi) if pi < 1.0 else _NEG_INF


@dataclass(frozen=True)
class GibbsConfig:
    """Sampler controls; defaults follow the benchmark protocol."""

    variant: str
    iterations: int = 3000
    burn_in: int = 2000
    thin: int = 1
    seed: int = 0
    em: Optional[EmSchedule] = EmSchedule()
    riccati_tol: float = 1e-10
    riccati_max_iter: int = 200

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def n_keep(self) -> int:
        span = self.iterations - self.burn_in
        return (span + self.thin - 1) // self.thin


@dataclass
class SparseDraws:
    """Retained direct-link draws, stored as (active indices, values) pairs."""

    q: int
    p: int
    idx: list = field(default_factory=list)
    vals: list = field(default_factory=list)

    def append(self, delta: np.ndarray, active: np.ndarray) -> None:
        ind = np.flatnonzero(active)
        self.idx.append(ind.astype(np.int32))
        self.vals.append(delta[:, ind].copy())

    def __len__(self) -> int:
        return len(self.idx)

    def dense(self, k: int) -> np.ndarray:
        out = np.zeros((self.q, self.p))
        out[:, self.idx[k]] = self.vals[k]
        return out

    def to_array(self) -> np.ndarray:
        out = np.zeros((len(self.idx), self.q, self.p))
        for k, (ind, val) in enumerate(zip(self.idx, self.vals)):
            out[k][:, ind] = val
        return out

    def inclusion(self) -> np.ndarray:
        """Fraction of draws in which each column is non-zero."""
        counts = np.zeros(self.p)
        for ind in self.idx:
            counts[ind] += 1.0
        return counts / max(len(self.idx), 1)


@dataclass
class ChainOutput:
    """Retained draws plus per-sweep bookkeeping of one chain."""

    variant: str
    config: GibbsConfig
    groups: GroupStructure
    delta: SparseDraws
    omega: np.ndarray          # (n_keep, q, q)
    lam: np.ndarray            # (n_keep, p) or (n_keep, m)
    pi: np.ndarray             # (n_keep,) or (n_keep, 2)
    counters: np.ndarray       # (sweeps, 3) int64: N0, G0, J0 per sweep
    nu: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return len(self.delta)

    def delta_draws(self) -> np.ndarray:
        return self.delta.to_array()


@dataclass(frozen=True)
class _MixtureParams:
    """GIG parameters for active entries, Gamma refresh for inactive ones."""

    act: np.ndarray
    gig_nu: np.ndarray
    gig_a: np.ndarray
    gig_b: np.ndarray
    inact: np.ndarray
    gamma_shape: np.ndarray
    gamma_rate: np.ndarray


# ---------------------------------------------------------------------------
# Chain
# ---------------------------------------------------------------------------

class GibbsChain:
    """One chain of the selected variant over a fixed dataset.

    Heavy Gram quantities are precomputed once; the cross-products entering
    the column conditionals are maintained incrementally and audited against
    a from-scratch recomputation every ``_AUDIT_PERIOD`` sweeps.
    """

    def __init__(
        self,
        data: Dataset,
        groups: Optional[GroupStructure],
        hyper: Hyperparameters,
        config: GibbsConfig,
    ):
        if groups is None:
            groups = GroupStructure.unit(data.p)
        groups.validate_for(data.p)
        if hyper.q != data.q:
            raise ValueError(f"hyperparameters are for q={hyper.q}, data has q={data.q}")
        self.variant = config.variant
        self.data = data
        self.groups = groups
        self.hyper = hyper
        self.config = config
        self.q, self.p, self.n, self.m = data.q, data.p, data.n, groups.m

        base = "s" if self.variant == "none" else self.variant
        self._base = base
        if base == "gs":
            self._ell = np.broadcast_to(np.asarray(hyper.ell, dtype=float), (self.m,)).copy()
        else:
            self._ell = np.broadcast_to(np.asarray(hyper.ell, dtype=float), (self.p,)).copy()
        if base == "sgs":
            if hyper.gamma is None or hyper.a2 is None:
                raise ValueError("sgs needs gamma rates and the (a2, b2) Beta pair")
            self._gamma = np.broadcast_to(np.asarray(hyper.gamma, dtype=float), (self.m,)).copy()
        else:
            self._gamma = None

        x, y = data.x, data.y
        self._gram = x.T @ x
        self._xnorm2 = np.diag(self._gram).copy()
        self._xy = x.T @ y                      # (p, q)
        ynorm = y.T @ y
        v_inv = np.linalg.inv(hyper.v_mat)
        self._b_cond = ynorm + 0.5 * (v_inv + v_inv.T)
        self._col_group = groups.column_group()
        self._spans = [groups.span(g) for g in range(groups.m)]
        self._kappas = np.asarray(groups.sizes)
        self._slab_shape = Hyperparameters.slab_shape(self.q)
        self._group_shapes = np.array(
            [Hyperparameters.group_slab_shape(self.q, int(k)) for k in groups.sizes]
        )

        self.state = initial_state(self.variant, data, groups, hyper)
        self._sync_caches()

        self._riccati_info: list[tuple[int, float]] = []
        self._em_trace: list[dict] = []
        self._em_window_lam: deque = deque(maxlen=self._em_maxlen())
        self._em_window_nu: deque = deque(maxlen=self._em_maxlen())
        self._em_updates = 0

    # -- cache plumbing ------------------------------------------------------

    def _em_maxlen(self) -> int:
        em = self.config.em
        if em is None:
            return 1
        return em.window if em.window is not None else em.period

    def _sync_caches(self) -> None:
        """Rebuild every derived quantity from ``self.state`` from scratch."""
        self._t_cross = self.state.delta @ self._gram      # (q, p)
        self._cnt = np.array(
            [int(self.state.active[sp].sum()) for sp in self._spans], dtype=np.int64
        )
        self._refresh_omega_cache()

    def _refresh_omega_cache(self) -> None:
        omega = self.state.omega_y
        if self.q == 1:
            self._omega1 = float(omega[0, 0])
            self._a_slab = self._omega1 * self._xy[:, 0]   # (p,)
        else:
            self._omega_chol = np.linalg.cholesky(omega)
            self._omega_inv = cho_solve((self._omega_chol, True), np.eye(self.q))
            self._a_slab = omega @ self._xy.T              # (q, p)

    def set_state(self, state: ChainState) -> None:
        """Install an externally built state (validates and resyncs caches)."""
        state.validate()
        if state.delta.shape != (self.q, self.p):
            raise ValueError("state has wrong delta shape")
        self.state = state.copy()
        self._sync_caches()

    def counters(self):
        return count_sparsity(self.state.delta, self.groups)

    def _fast_counts(self) -> tuple[int, int, int]:
        n0 = int(self.p - self._cnt.sum())
        g0 = int(np.count_nonzero(self._cnt == 0))
        j0 = int(np.sum((self._kappas - self._cnt)[self._cnt > 0]))
        return n0, g0, j0

    def _audit(self, sweep: int) -> None:
        active_re = np.any(self.state.delta != 0.0, axis=0)
        if not np.array_equal(active_re, self.state.active):
            raise NumericalError(f"sweep {sweep}: active mask out of sync with delta")
        cnt_re = np.array([int(active_re[sp].sum()) for sp in self._spans])
        if not np.array_equal(cnt_re, self._cnt):
            raise NumericalError(f"sweep {sweep}: incremental group counts diverged")
        fresh = self.state.delta @ self._gram
        scale = max(float(np.abs(fresh).max()), 1.0)
        if float(np.abs(fresh - self._t_cross).max()) > 1e-8 * scale:
            raise NumericalError(f"sweep {sweep}: cross-product cache drifted")

    # -- shared conditional statistics ----------------------------------------

    def _col_stats_q1(self, i: int, shrink: float) -> tuple[float, float, float]:
        """(posterior scale s, signal h, log slab factor) for one scalar column."""
        old = self.state.delta[0, i]
        h = self._a_slab[i] + self._t_cross[0, i] - self._xnorm2[i] * old
        su = shrink * self._xnorm2[i]
        s = shrink / (1.0 + su)
        log_t = -0.5 * math.log1p(su) + (0.5 * s / self._omega1) * h * h
        return s, h, log_t

    def _col_stats(self, i: int, shrink: float) -> tuple[float, np.ndarray, float]:
        old = self.state.delta[:, i]
        h = self._a_slab[:, i] + self._t_cross[:, i] - self._xnorm2[i] * old
        su = shrink * self._xnorm2[i]
        s = shrink / (1.0 + su)
        quad = float(h @ self._omega_inv @ h)
        log_t = -0.5 * self.q * math.log1p(su) + 0.5 * s * quad
        return s, h, log_t

    def _group_stats(self, g: int) -> tuple[float, np.ndarray, np.ndarray, float, float]:
        """(lam_g, chol(I+lam*Gram_g), signal block H_g, logdet, log slab factor)."""
        span = self._spans[g]
        kappa = self.groups.sizes[g]
        lam_g = float(self.state.lam[g])
        gg = self._gram[span, span]
        f = lam_g * gg
        f[np.diag_indices(kappa)] += 1.0
        try:
            lf = np.linalg.cholesky(f)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"group {g}: I + lambda*Gram not SPD") from exc
        logdet = 2.0 * float(np.log(np.diag(lf)).sum())
        if self.q == 1:
            old = self.state.delta[0, span]
            h = self._a_slab[span] + self._t_cross[0, span] - gg @ old
            w = solve_triangular(lf, h, lower=True, check_finite=False)
            e_term = lam_g * float(w @ w) / self._omega1
            log_t = -0.5 * logdet + 0.5 * e_term
        else:
            old = self.state.delta[:, span]
            h = self._a_slab[:, span] + self._t_cross[:, span] - old @ gg
            v = solve_triangular(self._omega_chol, h, lower=True, check_finite=False)
            w = solve_triangular(lf, v.T, lower=True, check_finite=False)
            e_term = lam_g * float((w * w).sum())
            log_t = -0.5 * self.q * logdet + 0.5 * e_term
        return lam_g, lf, h, logdet, log_t

    def _col_shrink(self, i: int) -> float:
        if self._base == "sgs":
            return float(self.state.nu[i]) * float(self.state.lam[self._col_group[i]])
        if self._base == "gs":
            return float(self.state.lam[self._col_group[i]])
        return float(self.state.lam[i])

    def _col_spike_logs(self, i: int) -> tuple[float, float]:
        """(log spike weight, log slab weight) for the column mixture."""
        if self._base == "sgs":
            pi1, pi2 = self.state.pi, self.state.pi2
            log_1m_pi1 = math.log1p(-pi1) if pi1 < 1.0 else _NEG_INF
            g = self._col_group[i]
            others = self._cnt[g] - (1 if self.state.active[i] else 0)
            log_rho = log_1m_pi1 + _log(pi2) if others > 0 else _log(pi1)
            log_w = log_1m_pi1 + (math.log1p(-pi2) if pi2 < 1.0 else _NEG_INF)
            return log_rho, log_w
        pi = 0.0 if self.variant == "none" else self.state.pi
        return _spike_logs(pi)

    # -- spike/slab column and block updates -----------------------------------

    def _col_update_q1(self, rng, i: int, shrink: float,
                       log_rho: float, log_w: float) -> bool:
        s, h, log_t = self._col_stats_q1(i, shrink)
        p_spike = _spike_prob(log_rho, log_w, log_t)
        u = rng.uniform()
        if u < p_spike:
            new, now_active = 0.0, False
        else:
            z = rng.standard_normal()
            new = -s * h + math.sqrt(s * self._omega1) * z
            now_active = new != 0.0
        old = self.state.delta[0, i]
        if new != old:
            self.state.delta[0, i] = new
            self._t_cross[0] += (new - old) * self._gram[i]
        self.state.active[i] = now_active
        return now_active

    def _col_update(self, rng, i: int, shrink: float,
                    log_rho: float, log_w: float) -> bool:
        s, h, log_t = self._col_stats(i, shrink)
        p_spike = _spike_prob(log_rho, log_w, log_t)
        u = rng.uniform()
        if u < p_spike:
            new = np.zeros(self.q)
            now_active = False
        else:
            z = rng.standard_normal(self.q)
            new = -s * h + math.sqrt(s) * (self._omega_chol @ z)
            now_active = bool(np.any(new != 0.0))
        old = self.state.delta[:, i]
        if np.any(new != old):
            self._t_cross += np.outer(new - old, self._gram[i])
            self.state.delta[:, i] = new
        self.state.active[i] = now_active
        return now_active

    def _group_update(self, rng, g: int, log_rho: float, log_w: float) -> None:
        span = self._spans[g]
        kappa = self.groups.sizes[g]
        lam_g, lf, h, _, log_t = self._group_stats(g)
        p_spike = _spike_prob(log_rho, log_w, log_t)
        u = rng.uniform()
        if self.q == 1:
            old = self.state.delta[0, span].copy()
            if u < p_spike:
                new = np.zeros(kappa)
                self._cnt[g] = 0
            else:
                mean = -lam_g * cho_solve((lf, True), h, check_finite=False)
                z = rng.standard_normal(kappa)
                new = mean + math.sqrt(self._omega1 * lam_g) * solve_triangular(
                    lf, z, trans="T", lower=True, check_finite=False
                )
                self._cnt[g] = kappa
            self.state.delta[0, span] = new
            self._t_cross[0] += (new - old) @ self._gram[span]
        else:
            old = self.state.delta[:, span].copy()
            if u < p_spike:
                new = np.zeros((self.q, kappa))
                self._cnt[g] = 0
            else:
                mean = -lam_g * cho_solve((lf, True), h.T, check_finite=False).T
                z = rng.standard_normal((self.q, kappa))
                half = solve_triangular(
                    lf, (self._omega_chol @ z).T, trans="T", lower=True, check_finite=False
                ).T
                new = mean + math.sqrt(lam_g) * half
                self._cnt[g] = kappa
            self.state.delta[:, span] = new
            self._t_cross += (new - old) @ self._gram[span]
        self.state.active[span] = self._cnt[g] > 0

    # -- sweep blocks ----------------------------------------------------------

    def _update_delta(self, rng) -> None:
        state = self.state
        if self._base == "s":
            pi = 0.0 if self.variant == "none" else state.pi
            log_rho, log_w = _spike_logs(pi)
            col = self._col_update_q1 if self.q == 1 else self._col_update
            for i in range(self.p):
                was = state.active[i]
                now = col(rng, i, float(state.lam[i]), log_rho, log_w)
                if now != was:
                    self._cnt[self._col_group[i]] += 1 if now else -1
        elif self._base == "gs":
            log_rho, log_w = _spike_logs(state.pi)
            col = self._col_update_q1 if self.q == 1 else self._col_update
            for g in range(self.m):
                if self.groups.sizes[g] == 1:
                    i = int(self.groups.starts[g])
                    now = col(rng, i, float(state.lam[g]), log_rho, log_w)
                    self._cnt[g] = 1 if now else 0
                else:
                    self._group_update(rng, g, log_rho, log_w)
        else:  # sgs
            pi1, pi2 = state.pi, state.pi2
            log_1m_pi1 = math.log1p(-pi1) if pi1 < 1.0 else _NEG_INF
            log_rho_in = log_1m_pi1 + _log(pi2)     # other columns in group active
            log_rho_last = _log(pi1)                # rest of the group is zero
            log_w = log_1m_pi1 + (math.log1p(-pi2) if pi2 < 1.0 else _NEG_INF)
            col = self._col_update_q1 if self.q == 1 else self._col_update
            for g in range(self.m):
                span = self._spans[g]
                lam_g = float(state.lam[g])
                for i in range(span.start, span.stop):
                    was = state.active[i]
                    others = self._cnt[g] - (1 if was else 0)
                    log_rho = log_rho_in if others > 0 else log_rho_last
                    shrink = float(state.nu[i]) * lam_g
                    now = col(rng, i, shrink, log_rho, log_w)
                    if now != was:
                        self._cnt[g] += 1 if now else -1

    def _shrink_diag(self) -> np.ndarray:
        """Per-column prior scale of the active columns (diagonal of D)."""
        if self._base == "s":
            return self.state.lam
        if self._base == "gs":
            return self.state.lam[self._col_group]
        return self.state.nu * self.state.lam[self._col_group]

    def omega_conditional(self):
        """Parameters of the precision conditional given the current state.

        Returns ``("gamma", shape, rate)``
        or ``("gig", order, a, b)`` for q = 1,
        or ``("mgig", order, A, B)`` for q > 1.
        """
        n0, _, _ = self._fast_counts()
        nu_order = 0.5 * (self.n - self.p + n0 + self.hyper.u)
        act = np.flatnonzero(self.state.active)
        if self.q == 1:
            b_par = float(self._b_cond[0, 0])
            if act.size == 0:
                return ("gamma", nu_order, 0.5 * b_par)
            d = self.state.delta[0, act]
            sub = self._gram[np.ix_(act, act)] + np.diag(1.0 / self._shrink_diag()[act])
            a_par = float(d @ sub @ d)
            if a_par < _QUAD_FLOOR:
                return ("gamma", nu_order, 0.5 * b_par)
            return ("gig", nu_order, a_par, b_par)
        if act.size == 0:
            a_mat = np.zeros((self.q, self.q))
        else:
            dact = self.state.delta[:, act]
            sub = self._gram[np.ix_(act, act)] + np.diag(1.0 / self._shrink_diag()[act])
            a_mat = dact @ sub @ dact.T
            a_mat = 0.5 * (a_mat + a_mat.T)
        return ("mgig", nu_order, a_mat, self._b_cond)

    def _update_omega(self, rng) -> None:
        cond = self.omega_conditional()
        if cond[0] == "gamma":
            _, shape, rate = cond
            if shape <= 0.0:
                raise NumericalError("improper precision conditional (order <= 0, A ~ 0)")
            self.state.omega_y = np.array([[float(rng.gamma(shape, 1.0 / rate))]])
        elif cond[0] == "gig":
            _, order, a_par, b_par = cond
            omega = sample_gig(rng, GigParams(order, a_par, b_par))
            self.state.omega_y = np.array([[omega]])
        else:
            _, order, a_mat, b_mat = cond
            mode, steps, resid = _mode_with_info(
                MgigParams(order, a_mat, b_mat),
                self.config.riccati_tol,
                self.config.riccati_max_iter,
            )
            self._riccati_info.append((steps, resid))
            self.state.omega_y = mode
        self._refresh_omega_cache()

    def _column_quads(self, cols: np.ndarray) -> np.ndarray:
        """``delta_i^t omega^-1 delta_i`` for the given columns."""
        if cols.size == 0:
            return np.zeros(0)
        sub = self.state.delta[:, cols]
        if self.q == 1:
            return sub[0] ** 2 / self._omega1
        v = solve_triangular(self._omega_chol, sub, lower=True, check_finite=False)
        return (v * v).sum(axis=0)

    def shrink_conditionals(self) -> dict[str, _MixtureParams]:
        """Exact mixture parameters the shrinkage block draws from.

        Key ``"col"`` covers the predictor-level factors (lambda for the
        sparse variant, nu for the bi-level one), ``"grp"`` the group-level
        factors.  Fixed levels of the bi-level variant are omitted.
        """
        state = self.state
        out: dict[str, _MixtureParams] = {}
        if self._base == "s":
            act = np.flatnonzero(state.active)
            inact = np.flatnonzero(~state.active)
            quads = self._column_quads(act)
            out["col"] = _MixtureParams(
                act, np.full(act.size, 0.5), quads, 2.0 * self._ell[act],
                inact, np.full(inact.size, self._slab_shape), self._ell[inact],
            )
        elif self._base == "gs":
            act_g = np.flatnonzero(self._cnt > 0)
            inact_g = np.flatnonzero(self._cnt == 0)
            cols = np.flatnonzero(state.active)
            quads = self._column_quads(cols)
            col_of = self._col_group[cols]
            sums = np.array([float(quads[col_of == g].sum()) for g in act_g])
            out["grp"] = _MixtureParams(
                act_g, np.full(act_g.size, 0.5), sums, 2.0 * self._ell[act_g],
                inact_g, self._group_shapes[inact_g], self._ell[inact_g],
            )
        else:
            mode = self.hyper.identifiability_mode
            cols = np.flatnonzero(state.active)
            quads = self._column_quads(cols)
            lam_cols = state.lam[self._col_group[cols]]
            if mode != "fix-nu":
                inact = np.flatnonzero(~state.active)
                out["col"] = _MixtureParams(
                    cols, np.full(cols.size, 0.5), quads / lam_cols,
                    2.0 * self._ell[cols],
                    inact, np.full(inact.size, self._slab_shape), self._ell[inact],
                )
            if mode != "fix-lambda":
                act_g = np.flatnonzero(self._cnt > 0)
                inact_g = np.flatnonzero(self._cnt == 0)
                scaled = quads / state.nu[cols]
                col_of = self._col_group[cols]
                sums = np.array([float(scaled[col_of == g].sum()) for g in act_g])
                n0g = (self._kappas - self._cnt)[act_g]
                orders = 0.5 * (self.q * n0g + 1.0)
                out["grp"] = _MixtureParams(
                    act_g, orders, sums, 2.0 * self._gamma[act_g],
                    inact_g, self._group_shapes[inact_g], self._gamma[inact_g],
                )
        return out

    def _draw_mixture(self, rng, mp: _MixtureParams, target: np.ndarray) -> None:
        if mp.act.size:
            target[mp.act] = sample_gig_vec(rng, mp.gig_nu, mp.gig_a, mp.gig_b)
        if mp.inact.size:
            target[mp.inact] = rng.gamma(mp.gamma_shape, 1.0 / mp.gamma_rate)

    def _update_shrink(self, rng) -> None:
        params = self.shrink_conditionals()
        if "col" in params:
            target = self.state.nu if self._base == "sgs" else self.state.lam
            self._draw_mixture(rng, params["col"], target)
        if "grp" in params:
            self._draw_mixture(rng, params["grp"], self.state.lam)

    def pi_conditionals(self) -> dict[str, tuple[float, float]]:
        """Beta parameters of the spike-probability updates (absent if pinned)."""
        n0, g0, j0 = self._fast_counts()
        hyper = self.hyper
        out: dict[str, tuple[float, float]] = {}
        if self.variant == "none":
            return out
        if self._base == "s":
            if hyper.pi_fixed is None:
                out["pi"] = (n0 + hyper.a, self.p - n0 + hyper.b)
        elif self._base == "gs":
            if hyper.pi_fixed is None:
                out["pi"] = (g0 + hyper.a, self.m - g0 + hyper.b)
        else:
            if hyper.pi_fixed is None:
                out["pi"] = (g0 + hyper.a, self.m - g0 + hyper.b)
            if hyper.pi2_fixed is None:
                out["pi2"] = (j0 + hyper.a2, self.p - n0 + hyper.b2)
        return out

    def _update_pi(self, rng) -> None:
        params = self.pi_conditionals()
        if "pi" in params:
            a, b = params["pi"]
            self.state.pi = float(rng.beta(a, b))
        if "pi2" in params:
            a, b = params["pi2"]
            self.state.pi2 = float(rng.beta(a, b))

    # -- conditional evaluators (oracle surface) --------------------------------

    def delta_conditional(self, index: int, fault: Optional[str] = None):
        """Spike probability and normalized slab log-density for one update.

        ``index`` is a column for the sparse/bi-level variants and a group
        for the group-sparse one.  Returns ``(p_spike, slab_logpdf)`` where
        ``slab_logpdf`` maps a candidate value (shaped like the column/block)
        to the log-density of the slab component.  ``fault`` is a test hook:
        ``"slab-mean-sign"`` flips the sign of the slab mean, emulating a
        sign bug that the coherence oracle must detect.
        """
        sign = -1.0 if fault == "slab-mean-sign" else 1.0
        if fault not in (None, "slab-mean-sign"):
            raise ValueError(f"unknown fault {fault!r}")
        if self._base == "gs" and self.groups.sizes[index] > 1:
            g = index
            span = self._spans[g]
            kappa = self.groups.sizes[g]
            log_rho, log_w = _spike_logs(self.state.pi)
            lam_g, lf, h, logdet, log_t = self._group_stats(g)
            p_spike = _spike_prob(log_rho, log_w, log_t)

            def slab_logpdf(value: np.ndarray) -> float:
                val = np.asarray(value, dtype=float).reshape(self.q, kappa)
                if self.q == 1:
                    mean = sign * (-lam_g) * cho_solve((lf, True), h, check_finite=False)
                    diff = val[0] - mean
                    quad = float(diff @ (lf @ (lf.T @ diff))) / (lam_g * self._omega1)
                    log_det_s = kappa * math.log(lam_g * self._omega1) - logdet
                    return -0.5 * (kappa * _LOG_2PI + log_det_s + quad)
                mean = sign * (-lam_g) * cho_solve((lf, True), h.T, check_finite=False).T
                diff = val - mean
                w1 = solve_triangular(self._omega_chol, diff, lower=True, check_finite=False)
                quad = float((w1 @ (lf @ lf.T) * w1).sum()) / lam_g
                log_det_omega = 2.0 * float(np.log(np.diag(self._omega_chol)).sum())
                log_det_s = kappa * math.log(lam_g) - logdet
                return -0.5 * (
                    self.q * kappa * _LOG_2PI
                    + kappa * log_det_omega
                    + self.q * log_det_s
                    + quad
                )

            return p_spike, slab_logpdf

        i = index
        if self._base == "gs":
            i = int(self.groups.starts[index])
        shrink = self._col_shrink(i)
        log_rho, log_w = self._col_spike_logs(i)
        if self.q == 1:
            s, h, log_t = self._col_stats_q1(i, shrink)
            p_spike = _spike_prob(log_rho, log_w, log_t)

            def slab_logpdf(value) -> float:
                v = float(np.asarray(value).reshape(()))
                var = s * self._omega1
                return -0.5 * (_LOG_2PI + math.log(var) + (v - sign * (-s * h)) ** 2 / var)

            return p_spike, slab_logpdf

        s, h, log_t = self._col_stats(i, shrink)
        p_spike = _spike_prob(log_rho, log_w, log_t)

        def slab_logpdf(value) -> float:
            v = np.asarray(value, dtype=float).reshape(self.q)
            diff = v - sign * (-s * h)
            quad = float(diff @ self._omega_inv @ diff) / s
            log_det = 2.0 * float(np.log(np.diag(self._omega_chol)).sum())
            return -0.5 * (self.q * _LOG_2PI + self.q * math.log(s) + log_det + quad)

        return p_spike, slab_logpdf

    # -- EM tuning ---------------------------------------------------------------

    def _em_step(self, sweep: int) -> None:
        em = self.config.em
        self._em_window_lam.append(self.state.lam.copy())
        if self._base == "sgs":
            self._em_window_nu.append(self.state.nu.copy())
        if (
            em is None
            or sweep >= self.config.burn_in
            or (sweep + 1) % em.period != 0
            or (em.max_updates is not None and self._em_updates >= em.max_updates)
        ):
            return
        mode = self.hyper.shrinkage_mode
        entry: dict = {"sweep": sweep}
        if self._base == "s":
            self._ell = em_update_ell(np.asarray(self._em_window_lam), self._slab_shape, mode)
            entry["ell"] = self._ell.copy()
        elif self._base == "gs":
            self._ell = em_update_ell(np.asarray(self._em_window_lam), self._group_shapes, mode)
            entry["ell"] = self._ell.copy()
        else:
            if self.hyper.identifiability_mode != "fix-nu":
                self._ell = em_update_ell(np.asarray(self._em_window_nu), self._slab_shape, mode)
                entry["ell"] = self._ell.copy()
            if self.hyper.identifiability_mode != "fix-lambda":
                self._gamma = em_update_gamma(
                    np.asarray(self._em_window_lam), self._group_shapes, mode
                )
                entry["gamma"] = self._gamma.copy()
        self._em_window_lam.clear()
        self._em_window_nu.clear()
        self._em_updates += 1
        self._em_trace.append(entry)

    # -- driver --------------------------------------------------------------------

    def sweep(self, t: int) -> None:
        seed = self.config.seed
        self._update_delta(stream(seed, t, _TAG_DELTA))
        self._update_omega(stream(seed, t, _TAG_OMEGA))
        self._update_shrink(stream(seed, t, _TAG_SHRINK))
        self._update_pi(stream(seed, t, _TAG_PI))
        self._em_step(t)
        if (t + 1) % _AUDIT_PERIOD == 0:
            self._audit(t)

    def run(self) -> ChainOutput:
        cfg = self.config
        n_keep = cfg.n_keep
        delta_draws = SparseDraws(self.q, self.p)
        omega_draws = np.zeros((n_keep, self.q, self.q))
        lam_draws = np.zeros((n_keep, self.state.lam.size))
        nu_draws = np.zeros((n_keep, self.p)) if self._base == "sgs" else None
        pi_dim = 2 if self._base == "sgs" else 1
        pi_draws = np.zeros((n_keep, pi_dim))
        counters = np.zeros((cfg.iterations, 3), dtype=np.int64)

        keep = 0
        t = 0
        try:
            for t in range(cfg.iterations):
                self.sweep(t)
                counters[t] = self._fast_counts()
                if t >= cfg.burn_in and (t - cfg.burn_in) % cfg.thin == 0:
                    delta_draws.append(self.state.delta, self.state.active)
                    omega_draws[keep] = self.state.omega_y
                    lam_draws[keep] = self.state.lam
                    if nu_draws is not None:
                        nu_draws[keep] = self.state.nu
                    pi_draws[keep, 0] = self.state.pi
                    if pi_dim == 2:
                        pi_draws[keep, 1] = self.state.pi2
                    keep += 1
        except Exception as exc:
            partial = self._build_output(
                delta_draws, omega_draws[:keep], lam_draws[:keep],
                None if nu_draws is None else nu_draws[:keep],
                pi_draws[:keep], counters[:t],
            )
            raise ChainAbortError(
                f"chain aborted at sweep {t}: {exc}", sweep=t, partial=partial
            ) from exc
        return self._build_output(
            delta_draws, omega_draws, lam_draws, nu_draws, pi_draws, counters
        )

    def _build_output(self, delta_draws, omega, lam, nu, pi, counters) -> ChainOutput:
        metadata = {
            "omega_mode_propagated": self.q > 1,
            "em_trace": self._em_trace,
            "riccati": self._riccati_info,
            "final_ell": self._ell.copy(),
        }
        if self._gamma is not None:
            metadata["final_gamma"] = self._gamma.copy()
        return ChainOutput(
            variant=self.variant,
            config=self.config,
            groups=self.groups,
            delta=delta_draws,
            omega=omega,
            lam=lam,
            nu=nu,
            pi=pi[:, 0] if pi.shape[1] == 1 else pi,
            counters=counters,
            metadata=metadata,
        )


def run_chain(
    data: Dataset,
    groups: Optional[GroupStructure],
    hyper: Hyperparameters,
    config: GibbsConfig,
) -> ChainOutput:
    """Run one chain; deterministic given ``config.seed``."""
    return GibbsChain(data, groups, hyper, config).run()
