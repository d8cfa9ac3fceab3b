from .generators import MeanFunction, get_mean_function, noise_block, synthetic_sample

__all__ = [
    "MeanFunction",
    "get_mean_function",
    "noise_block",
    "synthetic_sample",
]
