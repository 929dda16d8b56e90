"""Clustering of multivariate binary data with a sparse low-dimensional subspace."""

from .bindata import Dataset, SimulationDesign, SimulatedSample, load_csv, simulate, write_csv
from .model import (
    ModelParams,
    PenaltySpec,
    bic,
    canonical_theta,
    degrees_of_freedom,
    inverse_logit,
    log_likelihood,
    penalized_objective,
    penalty_value,
)
from .estep import Responsibilities, responsibilities
from .stiefel import GpConfig, gp_minimize, project
from .fit import FitConfig, FitReport, LambdaGrid, fit_multistart, fit_once, select_lambda
from .scores import estimate_scores
from .evaluate import adjusted_rand_index, support_recovery

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "SimulationDesign",
    "SimulatedSample",
    "load_csv",
    "write_csv",
    "simulate",
    "ModelParams",
    "PenaltySpec",
    "inverse_logit",
    "canonical_theta",
    "log_likelihood",
    "penalty_value",
    "penalized_objective",
    "degrees_of_freedom",
    "bic",
    "Responsibilities",
    "responsibilities",
    "GpConfig",
    "gp_minimize",
    "project",
    "FitConfig",
    "FitReport",
    "LambdaGrid",
    "fit_once",
    "fit_multistart",
    "select_lambda",
    "estimate_scores",
    "adjusted_rand_index",
    "support_recovery",
]
