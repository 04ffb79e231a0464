"""Community detection for multi-sample networks with correlated
within-community edges."""

from .net_model import (BlockParams, HardMembership, MembershipProbs,
                        MultiNetwork, adjusted_rand_index, block_mean,
                        standardize_edge)
from .likelihood import (ConcordanceCache, LikelihoodParts, approx_log_lik,
                         bayes_factor_log, concordance_cache, concordance_stat,
                         log_lik_correlation, log_lik_independent)
from .estimator import (DegenerateBlockError, EstimationError, FitConfig,
                        FitResult, e_step, fit, fit_vem, m_step_beta,
                        m_step_rho)
from .simulator import (CorrelationStructure, FeasibilityError, SimConfig,
                        apply_random_effects, gen_covariates,
                        latent_threshold_solve, sample_networks)
from .spectral import (ConsensusError, InitSpec, consensus_k, init_alpha,
                       spectral_cluster)
from .bench import (Cell, ExperimentPreset, ExperimentReport, preset,
                    run_lambda_sweep, run_preset)

__all__ = [
    "BlockParams", "HardMembership", "MembershipProbs", "MultiNetwork",
    "adjusted_rand_index", "block_mean", "standardize_edge",
    "ConcordanceCache", "LikelihoodParts", "approx_log_lik", "bayes_factor_log",
    "concordance_cache", "concordance_stat", "log_lik_correlation",
    "log_lik_independent",
    "DegenerateBlockError", "EstimationError", "FitConfig", "FitResult",
    "e_step", "fit", "fit_vem", "m_step_beta", "m_step_rho",
    "CorrelationStructure", "FeasibilityError", "SimConfig",
    "apply_random_effects", "gen_covariates", "latent_threshold_solve",
    "sample_networks",
    "ConsensusError", "InitSpec", "consensus_k", "init_alpha",
    "spectral_cluster",
    "Cell", "ExperimentPreset", "ExperimentReport", "preset",
    "run_lambda_sweep", "run_preset",
]

__version__ = "0.1.0"
