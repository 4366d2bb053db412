"""Multi-fidelity GP surrogates with cost-aware adaptive sampling."""

__version__ = "0.1.0"

from .acquisition import (
    CandidatePool,
    CostModel,
    Decision,
    select_if_ucr,
    select_if_ucr_bel,
    select_mf_ucr,
    select_uncertainty,
)
from .gp_core import CondensedGP, Hyperparameters, TrainingSet, build_covariance, kernel_eval, predict
from .inference import ChainConfig, PriorSpec, condense, log_posterior, run_chain
from .mf_model import FidelityLevel, MultiFidelityModel, assemble_blocked, believer_variance, fit_mf, predict_mf

__all__ = [
    "CandidatePool", "ChainConfig", "CondensedGP", "CostModel", "Decision", "FidelityLevel",
    "Hyperparameters", "MultiFidelityModel", "PriorSpec", "TrainingSet", "assemble_blocked",
    "believer_variance", "build_covariance", "condense", "fit_mf", "kernel_eval", "log_posterior",
    "predict", "predict_mf", "run_chain", "select_if_ucr", "select_if_ucr_bel", "select_mf_ucr",
    "select_uncertainty",
]
