"""
Varfit: Data Generators
Mean functions and seeded noise streams for simulation studies.

Every replicate r of a study draws from its own stream, seeded by
SeedSequence(master_seed, spawn_key=(r,)). Streams never depend on how
replicates are grouped or scheduled, so any partition of the replicate
range reproduces the same numbers.
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from varfit.structures.records import Sample1D, equally_spaced_grid

ArrayFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MeanFunction:
    """
    A mean function g on [0, 1].

    Attributes:
        name (str): Identifier ('g1', 'g2', 'g3', 'zero' or a custom tag).
        func (ArrayFunction): Vectorized evaluator x -> g(x).
        derivative (Optional[ArrayFunction]): Vectorized g', if known.
    """

    name: str
    func: ArrayFunction
    derivative: Optional[ArrayFunction] = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def on_grid(self, n: int) -> np.ndarray:
        """Returns g(i/n) for i = 1..n."""
        return self(equally_spaced_grid(n))


MEAN_FUNCTIONS: Dict[str, MeanFunction] = {
    "g1": MeanFunction("g1", lambda x: 5.0 * x, lambda x: np.full_like(x, 5.0)),
    "g2": MeanFunction("g2", lambda x: 5.0 * x * (1.0 - x), lambda x: 5.0 - 10.0 * x),
    "g3": MeanFunction(
        "g3",
        lambda x: 5.0 * np.sin(2.0 * math.pi * x),
        lambda x: 10.0 * math.pi * np.cos(2.0 * math.pi * x),
    ),
    "zero": MeanFunction("zero", np.zeros_like, np.zeros_like),
}


def get_mean_function(name: str) -> MeanFunction:
    """
    Looks up a built-in mean function.

    Raises:
        ValueError: If the name is unknown.
    """
    try:
        return MEAN_FUNCTIONS[name]
    except KeyError:
        known = ", ".join(sorted(MEAN_FUNCTIONS))
        raise ValueError(f"Unknown mean function {name!r}; expected one of {known}") from None


def replicate_rng(master_seed: int, replicate: int) -> np.random.Generator:
    """Independent generator for one replicate of a seeded study."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(replicate,)))


def _standard_normal(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.standard_normal(n)


def _rademacher(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.choice(np.array([-1.0, 1.0]), size=n)


# Standardized laws: mean 0, variance 1.
NOISE_LAWS: Dict[str, Callable[[np.random.Generator, int], np.ndarray]] = {
    "normal": _standard_normal,
    "rademacher": _rademacher,
}


def noise_block(
    master_seed: int,
    start: int,
    stop: int,
    n: int,
    sigma2: float,
    law: str = "normal",
) -> np.ndarray:
    """
    Draws the errors of replicates start..stop-1.

    Args:
        master_seed (int): Seed of the whole study.
        start (int): First replicate index.
        stop (int): One past the last replicate index.
        n (int): Errors per replicate.
        sigma2 (float): Error variance.
        law (str): Name of a standardized law in NOISE_LAWS.

    Returns:
        np.ndarray: Errors of shape (stop - start, n).
    """
    draw = NOISE_LAWS[law]
    scale = math.sqrt(sigma2)
    out = np.empty((stop - start, n))
    for row, r in enumerate(range(start, stop)):
        out[row] = scale * draw(replicate_rng(master_seed, r), n)
    return out


def synthetic_sample(
    n: int,
    mean: str = "g1",
    sigma2: float = 1.0,
    seed: int = 0,
    law: str = "normal",
) -> Sample1D:
    """
    One equally spaced dataset y_i = g(i/n) + e_i.

    Args:
        n (int): Sample size.
        mean (str): Built-in mean function name.
        sigma2 (float): Error variance.
        seed (int): Master seed; replicate 0 of that study is returned.
        law (str): Noise law.

    Returns:
        Sample1D: The dataset.
    """
    g = get_mean_function(mean).on_grid(n)
    return Sample1D.equally_spaced(g + noise_block(seed, 0, 1, n, sigma2, law)[0])
