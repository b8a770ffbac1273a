import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from polylab.data import Dataset, gen_gaussian_xor

settings.register_profile(
    "default",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def xor_small():
    """400/200 Gaussian-XOR split shared by the slower model tests."""
    return gen_gaussian_xor(400, 200, sigma=0.5, seed=5)


@pytest.fixture(scope="session")
def blobs2():
    """Linearly separable 2-class blobs at (+-2, 0)."""
    rng = np.random.default_rng(42)
    n = 200
    labels = rng.integers(0, 2, n)
    centers = np.array([[-2.0, 0.0], [2.0, 0.0]])
    pts = centers[labels] + rng.normal(0.0, 0.3, (n, 2))
    return Dataset(pts, labels.astype(np.int64), 2, name="blobs2")


def tiny_dataset(n=24, d=2, classes=2, seed=0, name="tiny"):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % classes
    centers = rng.normal(0.0, 2.0, (classes, d))
    pts = centers[labels] + rng.normal(0.0, 0.6, (n, d))
    return Dataset(pts, labels.astype(np.int64), classes, name=name)
