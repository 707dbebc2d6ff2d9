"""Joint-posterior density oracles and the conditional-coherence suite.

``log_full_posterior`` evaluates the unnormalized log joint posterior of each
variant directly from the hierarchical model (likelihood x priors), written
independently of the sampler.  The coherence suite then checks, for random
pairs of states differing in a single parameter block, that the log-ratio of
the sampler's conditional (as exposed by ``GibbsChain``) equals the
log-ratio of the joint density.  Since conditionals are proportional to the
joint along their block, any formula error in either side breaks the
identity; this validates every conditional without Monte-Carlo noise.

Spike/slab bookkeeping: densities are taken with respect to the natural
mixed dominating measure (Lebesgue on the slab, a point mass on the spike),
so the Gaussian normalizing constants of the slab components are kept --
they differ between spiked and non-spiked states and do not cancel.

The within-group spike weight of the bi-level variant conditions on whether
the rest of the group is zero; the published conditional treats the spike
weight in the "rest zero" corner in a way that no single joint density
reproduces, so the suite draws states whose groups keep at least two active
columns (the regime the identity holds in; see the decisions ledger).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gibbs import GibbsChain, GibbsConfig
from .model import ChainState, Dataset, GroupStructure, Hyperparameters

__all__ = ["log_full_posterior", "coherence_suite", "CoherenceReport"]

_LOG_2PI = math.log(2.0 * math.pi)


def _log(x: float) -> float:
    return math.log(x) if x > 0.0 else float("-inf")


def _logdet_spd(mat: np.ndarray) -> float:
    return 2.0 * float(np.log(np.diag(np.linalg.cholesky(mat))).sum())


def _likelihood_terms(state: ChainState, data: Dataset) -> float:
    """n/2 log|Omega| - 1/2 || (Y + X Delta^t Omega^-1) Omega^(1/2) ||_F^2."""
    omega = state.omega_y
    delta = state.delta
    omega_inv = np.linalg.inv(omega)
    frob = (
        float(np.trace(data.y.T @ data.y @ omega))
        + 2.0 * float(np.sum((data.x.T @ data.y) * delta.T))
        + float(np.trace(delta @ (data.x.T @ data.x) @ delta.T @ omega_inv))
    )
    return 0.5 * data.n * _logdet_spd(omega) - 0.5 * frob


def _wishart_terms(state: ChainState, hyper: Hyperparameters, q: int) -> float:
    return 0.5 * (hyper.u - q - 1.0) * _logdet_spd(state.omega_y) - 0.5 * float(
        np.trace(np.linalg.inv(hyper.v_mat) @ state.omega_y)
    )


def _beta_terms(pi: float, a: float, b: float) -> float:
    return (a - 1.0) * _log(pi) + (b - 1.0) * (math.log1p(-pi) if pi < 1.0 else float("-inf"))


def _gamma_prior_terms(values: np.ndarray, shapes, rates) -> float:
    values = np.asarray(values, dtype=float)
    shapes = np.broadcast_to(np.asarray(shapes, dtype=float), values.shape)
    rates = np.broadcast_to(np.asarray(rates, dtype=float), values.shape)
    return float(np.sum((shapes - 1.0) * np.log(values) - rates * values))


def log_full_posterior(
    variant: str,
    state: ChainState,
    data: Dataset,
    groups: GroupStructure,
    hyper: Hyperparameters,
) -> float:
    """Unnormalized log joint posterior of ``(delta, omega, shrinkages, pi)``."""
    q = data.q
    omega_inv = np.linalg.inv(state.omega_y)
    logdet_omega = _logdet_spd(state.omega_y)
    total = _likelihood_terms(state, data) + _wishart_terms(state, hyper, q)

    def col_quad(i: int) -> float:
        d = state.delta[:, i]
        return float(d @ omega_inv @ d)

    if variant in ("none", "s"):
        pi = state.pi
        for i in range(data.p):
            if state.active[i]:
                lam_i = float(state.lam[i])
                total += (
                    math.log1p(-pi)
                    - 0.5 * q * (_LOG_2PI + math.log(lam_i))
                    - 0.5 * logdet_omega
                    - 0.5 * col_quad(i) / lam_i
                )
            else:
                total += _log(pi)
        total += _gamma_prior_terms(state.lam, Hyperparameters.slab_shape(q), hyper.ell)
        if variant == "s" and hyper.pi_fixed is None:
            total += _beta_terms(pi, hyper.a, hyper.b)
        return total

    if variant == "gs":
        pi = state.pi
        shapes = np.array([Hyperparameters.group_slab_shape(q, k) for k in groups.sizes])
        for g in range(groups.m):
            span = groups.span(g)
            kappa = groups.sizes[g]
            if np.any(state.active[span]):
                lam_g = float(state.lam[g])
                block = state.delta[:, span]
                tr_quad = float(np.sum(block * (omega_inv @ block)))
                total += (
                    math.log1p(-pi)
                    - 0.5 * q * kappa * (_LOG_2PI + math.log(lam_g))
                    - 0.5 * kappa * logdet_omega
                    - 0.5 * tr_quad / lam_g
                )
            else:
                total += _log(pi)
        total += _gamma_prior_terms(state.lam, shapes, hyper.ell)
        if hyper.pi_fixed is None:
            total += _beta_terms(pi, hyper.a, hyper.b)
        return total

    if variant == "sgs":
        pi1, pi2 = state.pi, state.pi2
        shapes = np.array([Hyperparameters.group_slab_shape(q, k) for k in groups.sizes])
        for g in range(groups.m):
            span = groups.span(g)
            if np.any(state.active[span]):
                lam_g = float(state.lam[g])
                total += math.log1p(-pi1)
                for i in range(span.start, span.stop):
                    if state.active[i]:
                        scale = float(state.nu[i]) * lam_g
                        total += (
                            math.log1p(-pi2)
                            - 0.5 * q * (_LOG_2PI + math.log(scale))
                            - 0.5 * logdet_omega
                            - 0.5 * col_quad(i) / scale
                        )
                    else:
                        total += _log(pi2)
            else:
                total += _log(pi1)
        total += _gamma_prior_terms(state.lam, shapes, hyper.gamma)
        total += _gamma_prior_terms(state.nu, Hyperparameters.slab_shape(q), hyper.ell)
        if hyper.pi_fixed is None:
            total += _beta_terms(pi1, hyper.a, hyper.b)
        if hyper.pi2_fixed is None:
            total += _beta_terms(pi2, hyper.a2, hyper.b2)
        return total

    raise ValueError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# Coherence suite
# ---------------------------------------------------------------------------

@dataclass
class CoherenceReport:
    """Per-block worst-case errors of the conditional-vs-joint identity."""

    entries: list = field(default_factory=list)   # (variant, q, block, max_err, n_pairs)
    tol: float = 1e-8

    @property
    def passed(self) -> bool:
        return all(err <= self.tol for (_, _, _, err, _) in self.entries)

    def format_lines(self) -> list[str]:
        lines = []
        for variant, q, block, err, n in self.entries:
            status = "ok" if err <= self.tol else "FAIL"
            lines.append(
                f"{status:4s} {variant:>4s} q={q} {block:<9s} "
                f"max |log-ratio error| = {err:.3e} over {n} pairs"
            )
        return lines


def _random_spd(rng: np.random.Generator, q: int) -> np.ndarray:
    w = rng.standard_normal((q, q))
    return w @ w.T + (0.5 + rng.uniform()) * np.eye(q)


def _random_state(
    rng: np.random.Generator,
    variant: str,
    q: int,
    groups: GroupStructure,
    min_active_per_group: int = 2,
) -> ChainState:
    """A dispersed interior state; every group keeps several active columns."""
    p, m = groups.p, groups.m
    active = np.zeros(p, dtype=bool)
    for g in range(m):
        span = groups.span(g)
        kappa = groups.sizes[g]
        if variant == "gs":
            active[span] = rng.uniform() < 0.7
        else:
            keep = max(min(min_active_per_group, kappa), 1)
            extras = rng.uniform(size=kappa) < 0.6
            chosen = rng.permutation(kappa)[:keep]
            sel = extras.copy()
            sel[chosen] = True
            active[span] = sel
    delta = np.where(active, 1.0, 0.0) * rng.standard_normal((q, p))
    omega = _random_spd(rng, q)
    lam_len = p if variant in ("none", "s") else m
    lam = rng.uniform(0.5, 2.0, size=lam_len)
    if variant == "sgs":
        return ChainState(
            delta=delta, active=active, omega_y=omega, lam=lam,
            nu=rng.uniform(0.5, 2.0, size=p),
            pi=rng.uniform(0.2, 0.8), pi2=rng.uniform(0.2, 0.8),
        )
    return ChainState(
        delta=delta, active=active, omega_y=omega, lam=lam,
        pi=rng.uniform(0.2, 0.8),
    )


def _delta_cond_logpdf(chain: GibbsChain, index: int, value, fault=None) -> float:
    p_spike, slab_logpdf = chain.delta_conditional(index, fault=fault)
    if not np.any(np.asarray(value) != 0.0):
        return _log(p_spike)
    return (math.log1p(-p_spike) if p_spike < 1.0 else float("-inf")) + slab_logpdf(value)


def _mixture_cond_logpdf(mp, pos_in_act, pos_in_inact, value: float) -> float:
    """Unnormalized log-density of one shrinkage factor's conditional."""
    if pos_in_act is not None:
        nu, a, b = mp.gig_nu[pos_in_act], mp.gig_a[pos_in_act], mp.gig_b[pos_in_act]
        return (nu - 1.0) * math.log(value) - 0.5 * a / value - 0.5 * b * value
    shape, rate = mp.gamma_shape[pos_in_inact], mp.gamma_rate[pos_in_inact]
    return (shape - 1.0) * math.log(value) - rate * value


def _omega_cond_logpdf(chain: GibbsChain, omega: np.ndarray) -> float:
    cond = chain.omega_conditional()
    if cond[0] == "gamma":
        _, shape, rate = cond
        x = float(omega[0, 0])
        return (shape - 1.0) * math.log(x) - rate * x
    if cond[0] == "gig":
        _, order, a, b = cond
        x = float(omega[0, 0])
        return (order - 1.0) * math.log(x) - 0.5 * a / x - 0.5 * b * x
    _, order, a_mat, b_mat = cond
    q = omega.shape[0]
    return (order - 0.5 * (q + 1)) * _logdet_spd(omega) - 0.5 * float(
        np.trace(a_mat @ np.linalg.inv(omega) + b_mat @ omega)
    )


def _rel_err(lr_impl: float, lr_full: float) -> float:
    return abs(lr_impl - lr_full) / max(1.0, abs(lr_full))


def coherence_suite(
    variants=("s", "gs", "sgs"),
    q_values=(1, 2),
    n_pairs: int = 100,
    seed: int = 20240,
    n: int = 12,
    p: int = 6,
    m: int = 3,
    tol: float = 1e-8,
    fault: str | None = None,
) -> CoherenceReport:
    """Run the conditional-vs-joint log-ratio checks on random instances.

    ``fault`` injects a deliberate bug into the evaluated conditionals
    (see ``GibbsChain.delta_conditional``) to confirm the suite has teeth.
    """
    report = CoherenceReport(tol=tol)
    rng = np.random.default_rng(seed)
    sizes = [p // m] * m
    sizes[-1] += p - sum(sizes)
    groups = GroupStructure(tuple(sizes))

    for variant in variants:
        for q in q_values:
            x = rng.standard_normal((n, p))
            y = rng.standard_normal((n, q))
            data = Dataset(x=x, y=y)
            hyper = Hyperparameters(
                ell=rng.uniform(0.5, 2.0, size=(m if variant == "gs" else p)),
                u=float(q),
                v_mat=np.eye(q) / q,
                a=1.3, b=2.1,
                a2=1.1 if variant == "sgs" else None,
                b2=2.7 if variant == "sgs" else None,
                gamma=rng.uniform(0.5, 2.0, size=m) if variant == "sgs" else None,
            )
            config = GibbsConfig(variant=variant, iterations=2, burn_in=1, seed=1)
            chain = GibbsChain(data, groups, hyper, config)

            errs: dict[str, float] = {}
            counts: dict[str, int] = {}

            def record(block: str, lr_impl: float, lr_full: float) -> None:
                errs[block] = max(errs.get(block, 0.0), _rel_err(lr_impl, lr_full))
                counts[block] = counts.get(block, 0) + 1

            for _ in range(n_pairs):
                state = _random_state(rng, variant, q, groups)
                chain.set_state(state)
                full0 = log_full_posterior(variant, chain.state, data, groups, hyper)

                # --- delta block -------------------------------------------------
                if variant == "gs":
                    g = int(rng.integers(m))
                    span = groups.span(g)
                    kappa = groups.sizes[g]
                    if rng.uniform() < 0.5:
                        new_val = np.zeros((q, kappa))
                    else:
                        new_val = rng.standard_normal((q, kappa))
                    cur_val = chain.state.delta[:, span].copy()
                    lp_cur = _delta_cond_logpdf(chain, g, cur_val, fault)
                    lp_new = _delta_cond_logpdf(chain, g, new_val, fault)
                    alt = chain.state.copy()
                    alt.delta[:, span] = new_val
                    alt.active[span] = np.any(new_val != 0.0)
                    full1 = log_full_posterior(variant, alt, data, groups, hyper)
                    record("delta", lp_new - lp_cur, full1 - full0)
                else:
                    # keep two other active columns in the group: the published
                    # within-group spike weight is only joint-consistent there
                    col_ok = None
                    for i in rng.permutation(p):
                        g = int(chain._col_group[i])
                        span = groups.span(g)
                        others = int(chain.state.active[span].sum()) - int(
                            chain.state.active[i]
                        )
                        if variant != "sgs" or others >= 2:
                            col_ok = int(i)
                            break
                    if col_ok is not None:
                        i = col_ok
                        if rng.uniform() < 0.5:
                            new_val = np.zeros(q)
                        else:
                            new_val = rng.standard_normal(q)
                        cur_val = chain.state.delta[:, i].copy()
                        lp_cur = _delta_cond_logpdf(chain, i, cur_val, fault)
                        lp_new = _delta_cond_logpdf(chain, i, new_val, fault)
                        alt = chain.state.copy()
                        alt.delta[:, i] = new_val
                        alt.active[i] = bool(np.any(new_val != 0.0))
                        full1 = log_full_posterior(variant, alt, data, groups, hyper)
                        record("delta", lp_new - lp_cur, full1 - full0)

                # --- shrinkage blocks --------------------------------------------
                conds = chain.shrink_conditionals()
                for key, mp in conds.items():
                    k = mp.act.size + mp.inact.size
                    if k == 0:
                        continue
                    vec_name = "nu" if (variant == "sgs" and key == "col") else "lam"
                    idx_all = np.concatenate([mp.act, mp.inact])
                    j = int(idx_all[rng.integers(idx_all.size)])
                    pos_a = np.flatnonzero(mp.act == j)
                    pos_i = np.flatnonzero(mp.inact == j)
                    cur = float(getattr(chain.state, vec_name)[j])
                    new = float(rng.uniform(0.5, 2.5))
                    lp_cur = _mixture_cond_logpdf(
                        mp, pos_a[0] if pos_a.size else None,
                        pos_i[0] if pos_i.size else None, cur,
                    )
                    lp_new = _mixture_cond_logpdf(
                        mp, pos_a[0] if pos_a.size else None,
                        pos_i[0] if pos_i.size else None, new,
                    )
                    alt = chain.state.copy()
                    getattr(alt, vec_name)[j] = new
                    full1 = log_full_posterior(variant, alt, data, groups, hyper)
                    record(f"shrink-{key}", lp_new - lp_cur, full1 - full0)

                # --- pi blocks -----------------------------------------------------
                for key, (a_par, b_par) in chain.pi_conditionals().items():
                    cur = getattr(chain.state, key)
                    new = float(rng.uniform(0.2, 0.8))
                    lp_cur = (a_par - 1.0) * _log(cur) + (b_par - 1.0) * math.log1p(-cur)
                    lp_new = (a_par - 1.0) * _log(new) + (b_par - 1.0) * math.log1p(-new)
                    alt = chain.state.copy()
                    setattr(alt, key, new)
                    full1 = log_full_posterior(variant, alt, data, groups, hyper)
                    record(key, lp_new - lp_cur, full1 - full0)

                # --- omega block ---------------------------------------------------
                new_omega = _random_spd(rng, q)
                lp_cur = _omega_cond_logpdf(chain, chain.state.omega_y)
                lp_new = _omega_cond_logpdf(chain, new_omega)
                alt = chain.state.copy()
                alt.omega_y = new_omega
                full1 = log_full_posterior(variant, alt, data, groups, hyper)
                record("omega", lp_new - lp_cur, full1 - full0)

            for block in sorted(errs):
                report.entries.append((variant, q, block, errs[block], counts[block]))
    return report
