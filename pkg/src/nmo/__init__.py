"""Bivariate and multivariate shock models with negative dependence."""

from .data import DataFormatError, Dataset, MultiDataset, read_dataset, write_dataset
from .dependence import (kendall_tau, rcsd_diagnostic, rho_tau_ratio, spearman_rho,
                         tail_dependence)
from .errors import (ConvergenceError, DomainError, EvaluationError, IllConditionedError,
                     NmoError)
from .estimation import FitConfig, FitResult, bias_mse_study, fit_mle, log_likelihood, score
from .model import (BnmoParams, DepSign, density_continuous, joint_survival,
                    marginal_survival, singular_mass)
from .multivariate import MnmoParams, mnmo_survival, survival_copula
from .sampler import make_rng, sample_bnmo, sample_dataset, sample_mnmo
from .stress import stress_strength_index, sub_distribution

__all__ = [
    "BnmoParams", "ConvergenceError", "DataFormatError", "Dataset", "DepSign", "DomainError",
    "EvaluationError", "FitConfig", "FitResult", "IllConditionedError", "MnmoParams",
    "MultiDataset", "NmoError", "bias_mse_study", "density_continuous", "fit_mle",
    "joint_survival", "kendall_tau", "log_likelihood", "make_rng", "marginal_survival",
    "mnmo_survival", "rcsd_diagnostic", "read_dataset", "rho_tau_ratio", "sample_bnmo",
    "sample_dataset", "sample_mnmo", "score", "singular_mass", "spearman_rho",
    "stress_strength_index", "sub_distribution", "survival_copula", "tail_dependence",
    "write_dataset",
]
__version__ = "0.1.0"
