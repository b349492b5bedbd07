"""Bayesian inference for Lévy-driven returns observed with their running maxima.

Stick-breaking approximations of the latent process, particle marginal
Metropolis-Hastings and a multilevel estimator across approximation levels.
"""

__version__ = "0.1.0"

from .levy import LevyParams, Subordinator, sample_increment
from .stick import ChiTriple, StickPartition, sb_sample, sb_sample_coupled, stick_partition
from .model import (GammaPrior, InverseWishartPrior, Observation, PriorSpec, Theta, log_G_bar,
                    log_R1, log_R2, log_g, log_prior)
from .filters import FilterDegeneracy, ResamplePolicy, run_delta_pf, run_pf
from .pmmh import Chain, ChainRecord, ProposalSpec, run_coupled_pmmh, run_pmmh
from .mlmc import (LevelEstimate, LevelPlan, allocate_samples, estimate_increment,
                   estimate_multilevel, estimate_single_level, parameter)
from .data import Dataset, generate_synthetic, ingest_csv

__all__ = [
    "LevyParams", "Subordinator", "sample_increment",
    "ChiTriple", "StickPartition", "sb_sample", "sb_sample_coupled", "stick_partition",
    "GammaPrior", "InverseWishartPrior", "Observation", "PriorSpec", "Theta",
    "log_G_bar", "log_R1", "log_R2", "log_g", "log_prior",
    "FilterDegeneracy", "ResamplePolicy", "run_delta_pf", "run_pf",
    "Chain", "ChainRecord", "ProposalSpec", "run_coupled_pmmh", "run_pmmh",
    "LevelEstimate", "LevelPlan", "allocate_samples", "estimate_increment",
    "estimate_multilevel", "estimate_single_level", "parameter",
    "Dataset", "generate_synthetic", "ingest_csv",
]
