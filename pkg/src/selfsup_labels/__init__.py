"""Naive versus autoencoder-denoised labels for financial time-series classification."""

from .experiment import ExperimentConfig, ExperimentReport, run_experiment, run_workflow1, run_workflow2
from .labeling import LabelSeries, class_counts_sweep, naive_label
from .market_data import PriceSeries, ReturnSeries, ingest_csv, log_returns, simple_returns

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "LabelSeries",
    "PriceSeries",
    "ReturnSeries",
    "class_counts_sweep",
    "ingest_csv",
    "log_returns",
    "naive_label",
    "run_experiment",
    "run_workflow1",
    "run_workflow2",
    "simple_returns",
]
