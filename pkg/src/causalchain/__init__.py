"""Simulation learner and effect estimators for a chain of nested point exposures."""
from .estimands import EstimandSpec, EstimateReport, resolve
from .simlearner import DGPConfig, generate, true_contrast, truth_table

__all__ = ["DGPConfig", "EstimandSpec", "EstimateReport", "generate", "resolve", "true_contrast", "truth_table"]
