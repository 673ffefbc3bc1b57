"""Calibrated, gated decisions for migrating between LLMs.

Automated correctness metrics are calibrated against human labels, the
calibration turns metric verdicts into a posterior for the true correctness
difference between two models, and a sequence of thresholded gates plus a
coverage selection picks the models to migrate to.
"""

from .calibration import Calibration, ConfusionMatrix, calibrate, confusion_matrix, summarize_posterior
from .comparison import ComparisonResult, compare_models, compare_with
from .dataset import LabelRecord, PairedVerdicts, RunRecord, TestExample, VerdictRecord, align_paired_runs
from .errors import MigrationGateError
from .pipeline import GatePolicy, ModelProfile, SelectionRequirements, run_gates, run_pipeline, select_models
from .stochastics import BetaParams, beta_quantile, beta_sample, substream

__version__ = "0.1.0"

__all__ = [
    "BetaParams", "Calibration", "ComparisonResult", "ConfusionMatrix", "GatePolicy", "LabelRecord",
    "MigrationGateError", "ModelProfile", "PairedVerdicts", "RunRecord", "SelectionRequirements",
    "TestExample", "VerdictRecord", "align_paired_runs", "beta_quantile", "beta_sample", "calibrate",
    "compare_models", "compare_with", "confusion_matrix", "run_gates", "run_pipeline", "select_models",
    "substream", "summarize_posterior",
]
