"""Bayesian partial Gaussian graphical models with spike-and-slab sparsity."""

from .distributions import (
    GigParams,
    MatrixNormalParams,
    WishartParams,
    logpdf_gig,
    sample_beta,
    sample_gamma,
    sample_gig,
    sample_gig_vec,
    sample_matrix_normal,
    sample_wishart,
)
from .errors import (
    ChainAbortError,
    DataError,
    EmptyChainError,
    NoConvergenceError,
    NumericalError,
    PggmError,
)
from .evaluation import PosteriorSummary, aggregate_runs, f_score, mspe, summarize
from .gibbs import VARIANTS, ChainOutput, GibbsChain, GibbsConfig, run_chain
from .model import (
    ChainState,
    Dataset,
    GroupStructure,
    Hyperparameters,
    SparsityCounters,
    StandardizationRecord,
    count_sparsity,
    initial_state,
    reparam_B,
    standardize,
)
from .oracles import coherence_suite, log_full_posterior
from .riccati import MgigParams, mgig_draw_or_mode, mgig_mode, riccati_residual
from .scenarios import GroundTruth, ScenarioSpec, ar1_matrix, generate
from .streams import stream
from .tuning import EmSchedule, em_update_ell, em_update_gamma

__version__ = "0.1.0"
