"""Shared generators for randomized property tests."""

import numpy as np
import pytest

from mnlab.noisemodel import confusion_measurement
from mnlab.povm import Povm
from mnlab.qcore import DensityState


def random_povm(n: int, rng: np.random.Generator, rank: int | None = None) -> Povm:
    """Generic random POVM: Ginibre blocks renormalized to sum to identity."""
    d = 2**n
    k = rank if rank is not None else d
    blocks = rng.normal(size=(d, k, d)) + 1j * rng.normal(size=(d, k, d))
    effects = np.einsum("xki,xkj->xij", blocks.conj(), blocks)
    total = effects.sum(axis=0)
    w, v = np.linalg.eigh(total)
    inv_sqrt = v @ np.diag(1.0 / np.sqrt(w)) @ v.conj().T
    return Povm(n, np.einsum("ab,xbc,cd->xad", inv_sqrt, effects, inv_sqrt))


def random_classical_povm(n: int, rng: np.random.Generator) -> Povm:
    d = 2**n
    a = rng.uniform(0.05, 1.0, size=(d, d))
    return confusion_measurement(a / a.sum(axis=0))


def random_density(n: int, rng: np.random.Generator) -> DensityState:
    d = 2**n
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return DensityState(rho / np.trace(rho))


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture(scope="session")
def povm_pool():
    """200 random POVMs over n in {1, 2, 3}, reused by several suites."""
    rng = np.random.default_rng(20240811)
    pool = []
    for i in range(200):
        n = 1 + i % 3
        pool.append(random_povm(n, rng, rank=1 + rng.integers(0, 2**n)))
    return pool
