"""Isotropic stable paths with Feynman-Kac killing."""
from .simulate import (
    FactorizationReport, PathConfig, RegressionResult, RngStream, SurvivalEstimate,
    default_workers, dyadic_grid, encode_domain, factorization_check, fit_exponent,
    normal_ray, run_weights, sample_increments, sample_stable_increment, simulate_survival,
)

__all__ = [
    "FactorizationReport", "PathConfig", "RegressionResult", "RngStream", "SurvivalEstimate",
    "default_workers", "dyadic_grid", "encode_domain", "factorization_check", "fit_exponent",
    "normal_ray", "run_weights", "sample_increments", "sample_stable_increment", "simulate_survival",
]
