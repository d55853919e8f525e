import numpy as np
import pytest

from pocpd.model import ModelParams


def random_stable_model(
    rng: np.random.Generator,
    q: int,
    p: int,
    sigma_q: float = 0.1,
    sigma_r: float = 0.1,
    radius: float = 0.9,
) -> ModelParams:
    """Random model with spectral radius scaled to `radius`."""
    a = rng.normal(size=(q, q))
    a *= radius / np.max(np.abs(np.linalg.eigvals(a)))
    c = rng.normal(size=(p, q))
    return ModelParams(A=a, C=c, sigma_q=sigma_q, sigma_r=sigma_r)


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)
