# tests/test_varfit/conftest.py
import numpy as np
import pandas as pd
import pytest
from varfit import Sample1D
from varfit.utils.generators import synthetic_sample


@pytest.fixture
def alternating_sample():
    """y_i = (-1)^i on x_i = i/20: odd lags give s_k = 2, even lags give 0."""
    n = 20
    return Sample1D.equally_spaced([(-1.0) ** i for i in range(1, n + 1)])


@pytest.fixture(scope="session")
def noisy_sample():
    """One seeded dataset g1 + N(0, 1) with n = 200."""
    return synthetic_sample(200, mean="g1", sigma2=1.0, seed=7)


@pytest.fixture
def line_csv(tmp_path, noisy_sample):
    """CSV with an equally spaced covariate, written in shuffled row order."""
    rng = np.random.default_rng(3)
    perm = rng.permutation(noisy_sample.n)
    frame = pd.DataFrame({"t": noisy_sample.x[perm], "y": noisy_sample.y[perm]})
    path = tmp_path / "line.csv"
    frame.to_csv(path, index=False)
    return str(path)


@pytest.fixture
def grid_csv(tmp_path):
    """CSV with two covariates on a 12 x 12 grid."""
    rng = np.random.default_rng(11)
    u, v = np.meshgrid(np.linspace(0, 1, 12), np.linspace(0, 1, 12))
    lat, lon = u.ravel(), v.ravel()
    y = np.sin(lat) + lon + rng.standard_normal(lat.size)
    path = tmp_path / "grid.csv"
    pd.DataFrame({"lat": lat, "lon": lon, "y": y}).to_csv(path, index=False)
    return str(path)
