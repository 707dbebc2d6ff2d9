"""Data model: datasets, group structures, hyperparameters, chain state.

Exact zeros in the direct-link matrix are represented structurally: a dense
``delta`` array whose spiked columns are written as machine zeros, alongside a
boolean ``active`` mask that is the single source of truth for zero tests.
The mixture conditionals branch on exact-zero events, so zero-ness is never
decided by an epsilon comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import spd_cholesky
from .errors import DataError

__all__ = [
    "Dataset",
    "GroupStructure",
    "Hyperparameters",
    "ChainState",
    "SparsityCounters",
    "StandardizationRecord",
    "count_sparsity",
    "reparam_B",
    "standardize",
    "initial_state",
]


@dataclass(frozen=True)
class Dataset:
    """Predictors ``x`` (n x p) and responses ``y`` (n x q), observations in rows."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if x.shape[0] != y.shape[0]:
            raise DataError(f"X has {x.shape[0]} rows but Y has {y.shape[0]}")
        if x.shape[0] < 1 or x.shape[1] < 1 or y.shape[1] < 1:
            raise DataError(f"empty dataset: X {x.shape}, Y {y.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite entries")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def q(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class GroupStructure:
    """Partition of the p predictor columns into contiguous groups."""

    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        sizes = tuple(int(k) for k in np.atleast_1d(self.sizes))
        object.__setattr__(self, "sizes", sizes)
        if len(sizes) < 1 or any(k < 1 for k in sizes):
            raise ValueError(f"group sizes must be positive, got {sizes}")

    @classmethod
    def single(cls, p: int) -> "GroupStructure":
        return cls((p,))

    @classmethod
    def unit(cls, p: int) -> "GroupStructure":
        """One group per predictor."""
        return cls((1,) * p)

    @property
    def m(self) -> int:
        return len(self.sizes)

    @property
    def p(self) -> int:
        return sum(self.sizes)

    @property
    def starts(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)[:-1]]).astype(int)

    def span(self, g: int) -> slice:
        start = self.starts[g]
        return slice(start, start + self.sizes[g])

    def column_group(self) -> np.ndarray:
        """Group index of each predictor column, length p."""
        return np.repeat(np.arange(self.m), self.sizes)

    def validate_for(self, p: int) -> None:
        if self.p != p:
            raise DataError(f"group sizes sum to {self.p} but there are {p} predictors")


def _as_rate_vector(value, length: int, name: str) -> np.ndarray:
    vec = np.asarray(value, dtype=float)
    if vec.ndim == 0:
        vec = np.full(length, float(vec))
    if vec.shape != (length,):
        raise ValueError(f"{name} must be a scalar or a vector of length {length}")
    if np.any(vec <= 0) or not np.all(np.isfinite(vec)):
        raise ValueError(f"{name} must be strictly positive and finite")
    return vec


@dataclass(frozen=True)
class Hyperparameters:
    """Prior constants of one model variant.

    ``ell`` holds the shrinkage rates attached to the finest selection level:
    per predictor for the sparse and sparse-group-sparse variants, per group
    for the group-sparse one.  ``gamma`` holds the group-level rates of the
    sparse-group-sparse variant and is ``None`` otherwise.  ``a, b`` drive the
    variant's own spike probability (column level for sparse, group level for
    group-sparse, the group-level pair of the bi-level variant); ``a2, b2``
    are the within-group pair of the bi-level variant.

    ``pi_fixed``/``pi2_fixed`` pin a spike probability at a constant instead
    of updating it (for example ``pi_fixed=0`` with
    ``identifiability_mode='fix-lambda'`` switches the group level of the
    bi-level variant off entirely).
    """

    ell: np.ndarray
    u: float
    v_mat: np.ndarray
    a: float = 1.0
    b: float = 1.0
    a2: Optional[float] = None
    b2: Optional[float] = None
    gamma: Optional[np.ndarray] = None
    shrinkage_mode: str = "adaptative"
    identifiability_mode: str = "free"
    pi_fixed: Optional[float] = None
    pi2_fixed: Optional[float] = None

    def __post_init__(self) -> None:
        ell = np.asarray(self.ell, dtype=float)
        v_mat = np.atleast_2d(np.asarray(self.v_mat, dtype=float))
        object.__setattr__(self, "ell", ell)
        object.__setattr__(self, "v_mat", v_mat)
        spd_cholesky(v_mat, "Wishart scale V")
        q = v_mat.shape[0]
        if not self.u > q - 1:
            raise ValueError(f"u must exceed q-1 = {q - 1}, got {self.u}")
        if np.any(ell <= 0):
            raise ValueError("shrinkage rates ell must be positive")
        if not (self.a > 0 and self.b > 0):
            raise ValueError("Beta constants a, b must be positive")
        if (self.a2 is None) != (self.b2 is None):
            raise ValueError("a2 and b2 must be given together")
        if self.a2 is not None and not (self.a2 > 0 and self.b2 > 0):
            raise ValueError("Beta constants a2, b2 must be positive")
        if self.gamma is not None:
            gamma = np.asarray(self.gamma, dtype=float)
            object.__setattr__(self, "gamma", gamma)
            if np.any(gamma <= 0):
                raise ValueError("group rates gamma must be positive")
        if self.shrinkage_mode not in ("adaptative", "global"):
            raise ValueError(f"unknown shrinkage_mode {self.shrinkage_mode!r}")
        if self.identifiability_mode not in ("free", "fix-lambda", "fix-nu"):
            raise ValueError(f"unknown identifiability_mode {self.identifiability_mode!r}")
        for name, val in (("pi_fixed", self.pi_fixed), ("pi2_fixed", self.pi2_fixed)):
            if val is not None and not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def q(self) -> int:
        return self.v_mat.shape[0]

    @staticmethod
    def slab_shape(q: int) -> float:
        """Gamma shape of a predictor-level shrinkage factor: (q+1)/2."""
        return 0.5 * (q + 1)

    @staticmethod
    def group_slab_shape(q: int, kappa: int) -> float:
        """Gamma shape of a group-level shrinkage factor: (q*kappa+1)/2."""
        return 0.5 * (q * kappa + 1)

    @classmethod
    def defaults(
        cls,
        variant: str,
        q: int,
        groups: GroupStructure,
        a: float = 1.0,
        b: float = 1.0,
        a2: Optional[float] = None,
        b2: Optional[float] = None,
        shrinkage_mode: str = "adaptative",
        identifiability_mode: str = "free",
    ) -> "Hyperparameters":
        """Paper-recommended defaults: ``u = q``, ``V = I/q``, and initial
        rates set to twice the Gamma shapes so prior shrinkage means are 1/2
        (keeping ``E[lambda] < 1`` controls the group determinant terms)."""
        p, m = groups.p, groups.m
        kappas = np.asarray(groups.sizes, dtype=float)
        if variant in ("none", "s"):
            ell = np.full(p, 2.0 * cls.slab_shape(q))
            gamma = None
        elif variant == "gs":
            ell = 2.0 * np.array([cls.group_slab_shape(q, int(k)) for k in kappas])
            gamma = None
        elif variant == "sgs":
            ell = np.full(p, 2.0 * cls.slab_shape(q))
            gamma = 2.0 * np.array([cls.group_slab_shape(q, int(k)) for k in kappas])
            if a2 is None:
                a2, b2 = 1.0, 1.0
        else:
            raise ValueError(f"unknown variant {variant!r}")
        return cls(
            ell=ell,
            u=float(q),
            v_mat=np.eye(q) / q,
            a=a,
            b=b,
            a2=a2,
            b2=b2,
            gamma=gamma,
            shrinkage_mode=shrinkage_mode,
            identifiability_mode=identifiability_mode,
        )


@dataclass
class ChainState:
    """One draw of the sampler: direct links, response precision, shrinkages.

    ``lam`` has length p for the sparse variant and length m for the grouped
    ones; ``nu`` (length p) exists only for the bi-level variant.  ``pi`` is
    the variant's own spike probability (column level for sparse, group level
    otherwise); ``pi2`` is the within-group spike probability of the bi-level
    variant.
    """

    delta: np.ndarray
    active: np.ndarray
    omega_y: np.ndarray
    lam: np.ndarray
    pi: float
    nu: Optional[np.ndarray] = None
    pi2: Optional[float] = None

    def __post_init__(self) -> None:
        self.delta = np.atleast_2d(np.asarray(self.delta, dtype=float))
        self.active = np.asarray(self.active, dtype=bool)
        self.omega_y = np.atleast_2d(np.asarray(self.omega_y, dtype=float))
        self.lam = np.asarray(self.lam, dtype=float)
        if self.nu is not None:
            self.nu = np.asarray(self.nu, dtype=float)
        self.validate()

    def validate(self) -> None:
        q, p = self.delta.shape
        if self.active.shape != (p,):
            raise ValueError(f"active mask must have length {p}")
        if self.omega_y.shape != (q, q):
            raise ValueError(f"omega_y must be {q}x{q}")
        if not np.all(np.isfinite(self.delta)) or not np.all(np.isfinite(self.omega_y)):
            raise ValueError("state contains non-finite entries")
        spd_cholesky(self.omega_y, "omega_y")
        for name, vec in (("lam", self.lam), ("nu", self.nu)):
            if vec is not None and (np.any(vec <= 0) or not np.all(np.isfinite(vec))):
                raise ValueError(f"{name} must be strictly positive and finite")
        for name, val in (("pi", self.pi), ("pi2", self.pi2)):
            if val is not None and not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if np.any(self.delta[:, ~self.active] != 0.0):
            raise ValueError("inactive columns of delta must be exact zeros")

    def copy(self) -> "ChainState":
        return ChainState(
            delta=self.delta.copy(),
            active=self.active.copy(),
            omega_y=self.omega_y.copy(),
            lam=self.lam.copy(),
            pi=self.pi,
            nu=None if self.nu is None else self.nu.copy(),
            pi2=self.pi2,
        )


@dataclass(frozen=True)
class SparsityCounters:
    """Zero-column bookkeeping driving the Beta and MGIG conditionals."""

    n0: int
    g0: int
    n0g: tuple[int, ...]
    j0: int

    def __post_init__(self) -> None:
        if self.n0 != sum(self.n0g):
            raise ValueError("N0 must equal the sum of the per-group counts")


def count_sparsity(delta: np.ndarray, groups: GroupStructure) -> SparsityCounters:
    """Exact zero-column counts of ``delta`` under ``groups``.

    ``n0`` counts zero columns, ``g0`` zero groups, ``n0g`` zero columns per
    group and ``j0`` zero columns lying inside non-zero groups.
    """
    delta = np.atleast_2d(np.asarray(delta))
    groups.validate_for(delta.shape[1])
    zero_col = ~np.any(delta != 0.0, axis=0)
    n0g = []
    g0 = 0
    j0 = 0
    for g in range(groups.m):
        cnt = int(np.count_nonzero(zero_col[groups.span(g)]))
        n0g.append(cnt)
        if cnt == groups.sizes[g]:
            g0 += 1
        else:
            j0 += cnt
    return SparsityCounters(n0=int(zero_col.sum()), g0=g0, n0g=tuple(n0g), j0=j0)


def reparam_B(delta: np.ndarray, omega_y: np.ndarray) -> np.ndarray:
    """Regression coefficients ``B = -delta^t omega_y^-1`` (p x q).

    Zero columns of ``delta`` map to exactly zero rows of ``B``.
    """
    delta = np.atleast_2d(np.asarray(delta, dtype=float))
    omega_y = np.atleast_2d(np.asarray(omega_y, dtype=float))
    spd_cholesky(omega_y, "omega_y")
    b = -np.linalg.solve(omega_y, delta).T
    b[~np.any(delta != 0.0, axis=0), :] = 0.0
    return b


@dataclass(frozen=True)
class StandardizationRecord:
    """Per-column centering/scaling used to standardize a dataset.

    Constant columns keep scale 1 (centered only) and are flagged.
    """

    x_center: np.ndarray
    x_scale: np.ndarray
    y_center: np.ndarray
    y_scale: np.ndarray
    x_constant: np.ndarray
    y_constant: np.ndarray

    def apply(self, data: Dataset) -> Dataset:
        return Dataset(
            x=(data.x - self.x_center) / self.x_scale,
            y=(data.y - self.y_center) / self.y_scale,
        )

    def predict_raw(self, x_raw: np.ndarray, b_std: np.ndarray) -> np.ndarray:
        """Raw-scale predictions from coefficients fit on the standardized scale."""
        x_std = (np.atleast_2d(np.asarray(x_raw, dtype=float)) - self.x_center) / self.x_scale
        return x_std @ b_std * self.y_scale + self.y_center

    def b_raw(self, b_std: np.ndarray) -> np.ndarray:
        """Map standardized-scale coefficients back to the raw scale."""
        return (np.asarray(b_std) / self.x_scale[:, None]) * self.y_scale[None, :]


def _center_scale(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    center = mat.mean(axis=0)
    scale = mat.std(axis=0, ddof=1)
    constant = scale == 0.0
    scale = np.where(constant, 1.0, scale)
    return center, scale, constant


def standardize(data: Dataset) -> tuple[Dataset, StandardizationRecord]:
    """Center each column of X and Y and scale to unit sample variance."""
    if data.n < 2:
        raise DataError("standardization needs at least two observations")
    xc, xs, xconst = _center_scale(data.x)
    yc, ys, yconst = _center_scale(data.y)
    record = StandardizationRecord(
        x_center=xc, x_scale=xs, y_center=yc, y_scale=ys,
        x_constant=xconst, y_constant=yconst,
    )
    return record.apply(data), record


def initial_state(
    variant: str,
    data: Dataset,
    groups: GroupStructure,
    hyper: Hyperparameters,
) -> ChainState:
    """Neutral deterministic start: zero links, prior-mean scales.

    ``delta = 0``, ``omega_y = u V`` (Wishart prior mean), shrinkage factors
    at their Gamma prior means, spike probabilities at their Beta prior means.
    """
    q, p, m = data.q, data.p, groups.m
    if hyper.q != q:
        raise DataError(f"hyperparameters built for q={hyper.q}, data has q={q}")
    groups.validate_for(p)
    delta = np.zeros((q, p))
    active = np.zeros(p, dtype=bool)
    omega = hyper.u * hyper.v_mat.copy()
    pi0 = hyper.pi_fixed if hyper.pi_fixed is not None else hyper.a / (hyper.a + hyper.b)
    if variant in ("none", "s"):
        lam = Hyperparameters.slab_shape(q) / hyper.ell
        pi = 0.0 if variant == "none" else pi0
        return ChainState(delta=delta, active=active, omega_y=omega, lam=lam, pi=pi)
    if variant == "gs":
        shapes = np.array([Hyperparameters.group_slab_shape(q, k) for k in groups.sizes])
        lam = shapes / hyper.ell
        return ChainState(delta=delta, active=active, omega_y=omega, lam=lam, pi=pi0)
    if variant == "sgs":
        if hyper.gamma is None or hyper.a2 is None:
            raise ValueError("sgs needs gamma rates and the (a2, b2) Beta pair")
        shapes = np.array([Hyperparameters.group_slab_shape(q, k) for k in groups.sizes])
        if hyper.identifiability_mode == "fix-lambda":
            lam = np.ones(m)
        else:
            lam = shapes / hyper.gamma
        if hyper.identifiability_mode == "fix-nu":
            nu = np.ones(p)
        else:
            nu = Hyperparameters.slab_shape(q) / hyper.ell
        pi2 = hyper.pi2_fixed if hyper.pi2_fixed is not None else hyper.a2 / (hyper.a2 + hyper.b2)
        return ChainState(
            delta=delta, active=active, omega_y=omega, lam=lam, nu=nu,
            pi=pi0, pi2=pi2,
        )
    raise ValueError(f"unknown variant {variant!r}")
