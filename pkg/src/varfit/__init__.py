"""
Varfit: Difference-Based Residual Variance Estimation.
"""

from varfit.algorithms.estimators import (
    general_domain,
    muller_stadtmuller,
    rice,
    tong_wang,
)
from varfit.structures.records import NoiseMoments, Sample1D, VarianceEstimate

# Re-exporting for top-level access
__all__ = [
    "Sample1D",
    "NoiseMoments",
    "VarianceEstimate",
    "rice",
    "tong_wang",
    "muller_stadtmuller",
    "general_domain",
]
