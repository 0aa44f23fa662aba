"""Restricted isometry certification and spiked-Wishart hardness experiments."""
from .bounds import (
    BoundReport,
    bernoulli_norm_bounds,
    chi2_upper_bound,
    derive_experiment_params,
    null_nonrip_prob_bound,
    planted_rip_prob_bound,
)
from .certifier import CertificateOutcome, LazyConfig, certify, certify_problem1, lazy_certify, select_r
from .errors import DataError, EnumerationRefused, ParameterError, PhiOverflow
from .ldlr import LdlrEstimate, PhiSeries, ldlr_moment_bound, ldlr_norm_exact, ldlr_norm_mc, phi_truncated
from .rip_core import (
    EnumerationPolicy,
    RestrictedNormResult,
    RipParams,
    is_rip_exact,
    max_restricted_norm,
    restricted_gram_norm,
)
from .sampling import (
    SensingMatrix,
    SparseRademacherParams,
    SpikedSample,
    WishartParams,
    sample_null,
    sample_planted,
    sample_sparse_rademacher,
    sample_truncated_prior,
)

__version__ = "0.1.0"
