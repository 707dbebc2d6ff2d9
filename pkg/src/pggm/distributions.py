"""Random-variate generation and density evaluation for the model's priors.

Parametrizations
----------------
* ``GIG(nu, a, b)``: density proportional to ``x^(nu-1) exp(-a/(2x) - b*x/2)``
  on ``(0, inf)`` with ``a, b > 0``.
* ``Gamma(shape, rate)``: density proportional to ``x^(shape-1) exp(-rate*x)``;
  ``Exponential(l)`` is the ``shape=1`` case.
* ``Wishart(dof, V)``: density proportional to
  ``|X|^((dof-d-1)/2) exp(-tr(V^-1 X)/2)``, so ``E[X] = dof * V``; for ``d=1``
  this is ``Gamma(dof/2, 1/(2V))``.
* Matrix normal ``MN(M, S1, S2)``: ``vec(X)`` has covariance ``kron(S2, S1)``.

All samplers take an explicit ``numpy.random.Generator`` and are
bit-reproducible given the stream.  Density evaluations are unnormalized
(Bessel-type constants omitted) since all internal uses are ratios at fixed
parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = [
    "GigParams",
    "WishartParams",
    "MatrixNormalParams",
    "sample_gig",
    "sample_gig_vec",
    "sample_gamma",
    "sample_wishart",
    "sample_matrix_normal",
    "sample_beta",
    "logpdf_gig",
    "spd_cholesky",
]

# Below this, the x-dependence of the exp(-a/(2x)) term is numerically nil and
# the GIG collapses to its Gamma limit (only meaningful when nu > 0).
_GIG_A_FLOOR = 1e-280


def spd_cholesky(mat: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor of ``mat``, raising ``ValueError`` if not SPD."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{what} must be square, got shape {mat.shape}")
    if not np.allclose(mat, mat.T, rtol=1e-10, atol=1e-12):
        raise ValueError(f"{what} must be symmetric")
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"{what} must be positive definite") from exc


@dataclass(frozen=True)
class GigParams:
    """Order and the two positive rate terms of a scalar GIG distribution."""

    nu: float
    a: float
    b: float

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"GIG requires a > 0 and b > 0, got a={self.a}, b={self.b}")
        if not (np.isfinite(self.nu) and np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("GIG parameters must be finite")


@dataclass(frozen=True)
class WishartParams:
    dof: float
    scale: np.ndarray

    def __post_init__(self) -> None:
        scale = np.asarray(self.scale, dtype=float)
        object.__setattr__(self, "scale", scale)
        spd_cholesky(scale, "Wishart scale")
        if not self.dof > scale.shape[0] - 1:
            raise ValueError(f"Wishart dof must exceed d-1 = {scale.shape[0] - 1}, got {self.dof}")

    @property
    def dim(self) -> int:
        return self.scale.shape[0]


@dataclass(frozen=True)
class MatrixNormalParams:
    mean: np.ndarray
    row_cov: np.ndarray
    col_cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float)
        row_cov = np.asarray(self.row_cov, dtype=float)
        col_cov = np.asarray(self.col_cov, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "row_cov", row_cov)
        object.__setattr__(self, "col_cov", col_cov)
        if mean.ndim != 2:
            raise ValueError(f"mean must be a matrix, got shape {mean.shape}")
        spd_cholesky(row_cov, "row covariance")
        spd_cholesky(col_cov, "column covariance")
        if row_cov.shape[0] != mean.shape[0] or col_cov.shape[0] != mean.shape[1]:
            raise ValueError(
                f"dimension mismatch: mean {mean.shape}, row_cov {row_cov.shape}, "
                f"col_cov {col_cov.shape}"
            )


# ---------------------------------------------------------------------------
# GIG sampling
# ---------------------------------------------------------------------------

def sample_gig(rng: np.random.Generator, params: GigParams, size=None):
    """Draw from ``GIG(nu, a, b)``.

    Delegates to scipy's rejection sampler (ratio-of-uniforms with mode shift
    plus dedicated small-parameter algorithms), which is valid for every
    ``(nu, a > 0, b > 0)``.  In scipy's parametrization the draw is
    ``sqrt(a/b) * geninvgauss(nu, sqrt(a*b))``.
    """
    s = math.sqrt(params.a / params.b)
    omega = math.sqrt(params.a * params.b)
    out = s * stats.geninvgauss.rvs(params.nu, omega, size=size, random_state=rng)
    return float(out) if size is None else out


def sample_gig_vec(rng: np.random.Generator, nu, a, b) -> np.ndarray:
    """Draw one GIG variate per entry of the parameter vectors.

    Fast path: entries with ``nu == +-1/2`` map exactly onto the inverse
    Gaussian (``GIG(-1/2, a, b)`` is ``IG(sqrt(a/b), a)`` and ``GIG(1/2, a, b)``
    is the reciprocal of ``IG(sqrt(b/a), b)``), drawn in one vectorized
    ``Generator.wald`` call.  Remaining entries fall back to the general
    rejection sampler one by one, in index order.  Consumption from ``rng`` is
    deterministic: order +1/2 entries first, then order -1/2, then the rest.
    """
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    a = np.broadcast_to(np.asarray(a, dtype=float), nu.shape).copy()
    b = np.broadcast_to(np.asarray(b, dtype=float), nu.shape).copy()
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("GIG requires a > 0 and b > 0")
    out = np.empty(nu.shape, dtype=float)

    pos_half = nu == 0.5
    if np.any(pos_half):
        ah, bh = a[pos_half], b[pos_half]
        out[pos_half] = 1.0 / rng.wald(np.sqrt(bh / ah), bh)
    neg_half = nu == -0.5
    if np.any(neg_half):
        ah, bh = a[neg_half], b[neg_half]
        out[neg_half] = rng.wald(np.sqrt(ah / bh), ah)
    rest = ~(pos_half | neg_half)
    for i in np.flatnonzero(rest):
        out[i] = sample_gig(rng, GigParams(nu[i], a[i], b[i]))
    return out


def logpdf_gig(x, params: GigParams):
    """Unnormalized log-density of ``GIG(nu, a, b)``: raises on ``x <= 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("GIG density is supported on x > 0")
    out = (params.nu - 1.0) * np.log(x) - 0.5 * params.a / x - 0.5 * params.b * x
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Gamma / Beta / Wishart / matrix normal
# ---------------------------------------------------------------------------

def sample_gamma(rng: np.random.Generator, shape, rate, size=None):
    """Draw from ``Gamma(shape, rate)`` (rate parametrization)."""
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(shape <= 0) or np.any(rate <= 0):
        raise ValueError(f"Gamma requires shape > 0 and rate > 0, got {shape}, {rate}")
    out = rng.gamma(shape, 1.0 / rate, size=size)
    return float(out) if size is None and out.ndim == 0 else out


def sample_beta(rng: np.random.Generator, a: float, b: float, size=None):
    if not (a > 0 and b > 0):
        raise ValueError(f"Beta requires a > 0 and b > 0, got a={a}, b={b}")
    out = rng.beta(a, b, size=size)
    return float(out) if size is None else out


def sample_wishart(rng: np.random.Generator, params: WishartParams) -> np.ndarray:
    """One SPD draw from ``Wishart(dof, V)``; ``E[X] = dof * V``."""
    draw = stats.wishart.rvs(df=params.dof, scale=params.scale, random_state=rng)
    return np.atleast_2d(np.asarray(draw, dtype=float))


def sample_matrix_normal(rng: np.random.Generator, params: MatrixNormalParams) -> np.ndarray:
    """One draw ``M + L1 Z L2^t`` with ``Z`` i.i.d. standard normal."""
    l1 = spd_cholesky(params.row_cov, "row covariance")
    l2 = spd_cholesky(params.col_cov, "column covariance")
    z = rng.standard_normal(params.mean.shape)
    return params.mean + l1 @ z @ l2.T
