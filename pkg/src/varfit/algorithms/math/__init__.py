from .least_squares import CompoundSymmetryMetric, DiagonalMetric, fit_line

__all__ = ["CompoundSymmetryMetric", "DiagonalMetric", "fit_line"]
