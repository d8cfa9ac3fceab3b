from .estimators import (
    compute_lag_stats,
    rice,
    tong_wang,
    muller_stadtmuller,
    general_domain,
    confidence_interval,
    estimate_gamma4,
    select_bandwidth,
)
from .quadratic import build_tw_matrix, build_ms_matrix, quad_form, exact_mse

__all__ = [
    "compute_lag_stats",
    "rice",
    "tong_wang",
    "muller_stadtmuller",
    "general_domain",
    "confidence_interval",
    "estimate_gamma4",
    "select_bandwidth",
    "build_tw_matrix",
    "build_ms_matrix",
    "quad_form",
    "exact_mse",
]
