from .records import (
    Sample1D,
    NoiseMoments,
    DenominatorMode,
    RegressionMethod,
    LagStats,
    RegressionFit,
    ConfidenceInterval,
    VarianceEstimate,
    ExactMoments,
)
from .banded import BandedSymmetric

__all__ = [
    "Sample1D",
    "NoiseMoments",
    "DenominatorMode",
    "RegressionMethod",
    "LagStats",
    "RegressionFit",
    "ConfidenceInterval",
    "VarianceEstimate",
    "ExactMoments",
    "BandedSymmetric",
]
