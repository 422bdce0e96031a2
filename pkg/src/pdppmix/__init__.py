"""Bayesian mixtures with a projection determinantal point process prior on the atoms."""

from ._jit import USE_NUMBA
from .dpp import DppSample, sample_palm_dpp, sample_projection_dpp
from .errors import ConfigError, DataError, DomainError, NumericalError, PdppError
from .jumps import GammaJumpModel, sample_u_conditional, sample_u_marginal
from .kernel import (
    Domain,
    FourierProjectionKernel,
    PalmKernel,
    eval_kernel,
    global_repulsiveness,
    gram_matrix,
    log_det_gram,
    make_palm,
    pair_correlation,
)
from .mixture import ComponentSet, Dataset, Hyperparameters, MixtureState, build_domain
from .samplers import (
    SamplerKind,
    SweepReport,
    conditional_sweep,
    marginal_a_sweep,
    marginal_b_sweep,
    mh_update_atoms,
    reshuffle,
    run_chain,
)
from .summaries import (
    ChainTrace,
    PosteriorSummary,
    density_estimate,
    effective_sample_size,
    partition_entropy,
    point_estimate_vi,
    similarity_matrix,
    summarize,
)

__version__ = "0.1.0"
