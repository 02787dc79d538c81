import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_hermitian(rng, d, scale=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (a + a.conj().T) / 2


def quadrature_average(h, x, steps=10_000):
    """Midpoint rule for the integral over a in [0, 1] of exp(iah) x exp(-iah)."""
    w, v = np.linalg.eigh(h)
    acc = np.zeros_like(x, dtype=complex)
    for a in (np.arange(steps) + 0.5) / steps:
        u = (v * np.exp(1j * a * w)) @ v.conj().T
        acc += u @ x @ u.conj().T
    return acc / steps
