import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_psd_kernel(r: np.random.Generator, size: int, rank: int | None = None) -> np.ndarray:
    """Random PSD Gram with unit-ish diagonal."""
    rank = rank or size
    A = r.standard_normal((size, rank))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    return A @ A.T
