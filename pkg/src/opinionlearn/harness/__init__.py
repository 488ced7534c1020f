"""Ensemble experiments, metrics and the command line interface."""

from .config import ALGORITHMS, ExperimentConfig, load_config
from .experiment import ExperimentResult, run_experiment
from .metrics import prediction_rmse, rule_accuracy, tpr_fpr

__all__ = [
    "ALGORITHMS", "ExperimentConfig", "ExperimentResult", "load_config",
    "prediction_rmse", "rule_accuracy", "run_experiment", "tpr_fpr",
]
