"""SVM-based mixture cure rate models for interval-censored survival data."""

from .data import (
    ColumnSchema,
    Dataset,
    IntervalObservation,
    ScalingParams,
    from_observations,
    load_dataset,
    midpoint_times,
    standardize_covariates,
    write_dataset,
)
from .em import (
    BootstrapResult,
    EMConfig,
    FitResult,
    bootstrap_se,
    e_step,
    fit_em,
    initial_values,
    observed_loglik,
)
from .errors import CureSvmError
from .estimator import MixtureCureModel
from .latency import LatencyParams, maximize_q2, q2_gradient, q2_objective, survival_u
from .logistic import LogisticParams, fit_weighted_logistic, logistic_pi
from .metrics import MetricsSummary, bias_mse_pi, bias_mse_survival, monte_carlo_study, roc_auc
from .simulate import ScenarioSpec, generate_dataset, scenario_pi
from .svm import (
    HyperParams,
    PlattCalibration,
    SvmModel,
    decision_value,
    decision_values,
    impute_and_estimate_pi,
    platt_fit,
    platt_probability,
    rbf_gram,
    rbf_kernel,
    smo_train,
    tune_hyperparams,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapResult",
    "ColumnSchema",
    "CureSvmError",
    "Dataset",
    "EMConfig",
    "FitResult",
    "HyperParams",
    "IntervalObservation",
    "LatencyParams",
    "LogisticParams",
    "MetricsSummary",
    "MixtureCureModel",
    "PlattCalibration",
    "ScalingParams",
    "ScenarioSpec",
    "SvmModel",
    "bias_mse_pi",
    "bias_mse_survival",
    "bootstrap_se",
    "decision_value",
    "decision_values",
    "e_step",
    "fit_em",
    "fit_weighted_logistic",
    "from_observations",
    "generate_dataset",
    "impute_and_estimate_pi",
    "initial_values",
    "load_dataset",
    "logistic_pi",
    "maximize_q2",
    "midpoint_times",
    "monte_carlo_study",
    "observed_loglik",
    "platt_fit",
    "platt_probability",
    "q2_gradient",
    "q2_objective",
    "rbf_gram",
    "rbf_kernel",
    "roc_auc",
    "scenario_pi",
    "smo_train",
    "standardize_covariates",
    "survival_u",
    "tune_hyperparams",
    "write_dataset",
]
