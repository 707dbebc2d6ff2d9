"""Mode of the matrix generalized inverse Gaussian distribution.

The MGIG(nu, A, B) density on SPD matrices is proportional to
``|X|^(nu-(d+1)/2) exp(-tr(A X^-1 + B X)/2)``.  Its unique mode solves the
algebraic Riccati equation

    (d + 1 - 2*nu) * M + M B M = A.

With ``c = d + 1 - 2*nu`` and ``N = B^(1/2) M B^(1/2)`` the equation becomes
``N^2 + c N = B^(1/2) A B^(1/2)``, whose SPD solution is obtained by
completing the square:

    N = (B^(1/2) A B^(1/2) + (c^2/4) I)^(1/2) - (c/2) I.

This closed form (two symmetric eigendecompositions) is exact; a Newton
polish on the residual is kept as a guard for ill-conditioned inputs.  An SPD
solution exists iff ``A`` is nonsingular or ``c < 0``; the usual Gibbs calls
have ``c < 0``, so a singular (PSD) ``A`` is accepted.

For ``d = 1`` the MGIG is the scalar GIG(nu, a, b), which is sampled exactly;
for ``d > 1`` the mode substitutes for a draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_sylvester

from .distributions import GigParams, sample_gig
from .errors import NoConvergenceError, NumericalError

__all__ = ["MgigParams", "mgig_mode", "mgig_draw_or_mode", "riccati_residual"]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200


@dataclass(frozen=True)
class MgigParams:
    """Order ``nu`` and the SPD pair ``(A, B)`` of an MGIG over d x d matrices.

    ``A`` may be singular (PSD) as long as ``d + 1 - 2*nu < 0``, which is the
    regime every Gibbs conditional of this package operates in.
    """

    nu: float
    a_mat: np.ndarray
    b_mat: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.a_mat, dtype=float)
        b = np.asarray(self.b_mat, dtype=float)
        object.__setattr__(self, "a_mat", a)
        object.__setattr__(self, "b_mat", b)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != b.shape:
            raise ValueError(f"A and B must be square with equal shape, got {a.shape}, {b.shape}")
        for name, mat in (("A", a), ("B", b)):
            if not np.allclose(mat, mat.T, rtol=1e-10, atol=1e-12):
                raise ValueError(f"{name} must be symmetric")
        scale_a = float(np.linalg.norm(a))
        if np.any(np.linalg.eigvalsh(a) < -1e-10 * max(scale_a, 1.0)):
            raise ValueError("A must be positive semidefinite")
        try:
            np.linalg.cholesky(b)
        except np.linalg.LinAlgError as exc:
            raise ValueError("B must be positive definite") from exc

    @property
    def dim(self) -> int:
        return self.b_mat.shape[0]


def riccati_residual(m: np.ndarray, params: MgigParams) -> float:
    """Relative Frobenius residual of the mode equation at ``m``."""
    c = params.dim + 1.0 - 2.0 * params.nu
    res = c * m + m @ params.b_mat @ m - params.a_mat
    denom = np.linalg.norm(params.a_mat)
    if denom == 0.0:
        denom = max(np.linalg.norm(c * m), 1.0)
    return float(np.linalg.norm(res) / denom)


def _psd_power(mat: np.ndarray, power: float, floor: float = 0.0) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    vals = np.maximum(vals, floor)
    return (vecs * vals**power) @ vecs.T


def _mode_with_info(
    params: MgigParams, tol: float, max_iter: int
) -> tuple[np.ndarray, int, float]:
    """Mode plus (Newton steps used, final relative residual)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    d = params.dim
    c = d + 1.0 - 2.0 * params.nu

    b_half = _psd_power(params.b_mat, 0.5)
    b_inv_half = _psd_power(params.b_mat, -0.5, floor=np.finfo(float).tiny)
    a_tilde = b_half @ params.a_mat @ b_half
    a_tilde = 0.5 * (a_tilde + a_tilde.T)

    shifted = a_tilde + (0.25 * c * c) * np.eye(d)
    vals, vecs = np.linalg.eigh(shifted)
    n_vals = np.sqrt(np.maximum(vals, 0.0)) - 0.5 * c
    if np.any(n_vals <= 0.0):
        raise NumericalError(
            f"no SPD Riccati solution for nu={params.nu}, d={d} "
            f"(coefficient {c:g} >= 0 with singular A)"
        )
    m = b_inv_half @ ((vecs * n_vals) @ vecs.T) @ b_inv_half
    m = 0.5 * (m + m.T)

    steps = 0
    for steps in range(max_iter + 1):
        resid = riccati_residual(m, params)
        if resid <= tol:
            break
        if steps == max_iter:
            raise NoConvergenceError(
                f"Riccati residual {resid:.3e} above tol={tol:g} "
                f"after {max_iter} Newton steps"
            )
        res = c * m + m @ params.b_mat @ m - params.a_mat
        lhs = m @ params.b_mat + (0.5 * c) * np.eye(d)
        delta = solve_sylvester(lhs, lhs.T, -res)
        m = m + 0.5 * (delta + delta.T)
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Riccati solution is not positive definite") from exc
    return m, steps, resid


def mgig_mode(
    params: MgigParams,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """Unique SPD solution of ``(d+1-2*nu) M + M B M = A``.

    Raises ``NumericalError`` when no SPD solution exists for the given
    parameters and ``NoConvergenceError`` if the Newton polish cannot push the
    relative residual below ``tol`` within ``max_iter`` steps.
    """
    return _mode_with_info(params, tol, max_iter)[0]


def mgig_draw_or_mode(
    rng: np.random.Generator,
    params: MgigParams,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """Exact GIG draw when ``d = 1``; the (deterministic) MGIG mode otherwise."""
    if params.dim == 1:
        draw = sample_gig(rng, GigParams(params.nu, params.a_mat[0, 0], params.b_mat[0, 0]))
        return np.array([[draw]])
    return mgig_mode(params, tol=tol, max_iter=max_iter)
