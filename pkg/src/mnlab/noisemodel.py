"""Noisy measurement device factories and the seeded shot sampler."""

from __future__ import annotations

import json
from dataclasses import dataclass
from hashlib import blake2b

import numpy as np

from .povm import Povm
from .qcore import DensityState, bitstrings, kron_all, ry_gate

DEFAULT_RY_ANGLE = np.pi / 40

PROB_FLOOR = -1e-12
PROB_SUM_TOL = 1e-9


class InconsistentInputsError(ValueError):
    """State and device produce probabilities outside valid tolerance."""


@dataclass(frozen=True)
class SeededRng:
    """Counter-based random source keyed by (seed, stream).

    Uses Philox with a key derived from both fields, so identical
    (seed, stream) pairs reproduce identical draws and distinct substreams
    are statistically independent and order-free.  ``generator()`` always
    starts from the same point; derive a fresh substream per independent
    piece of work.
    """

    seed: int
    stream: str = "root"

    def substream(self, label) -> "SeededRng":
        return SeededRng(self.seed, f"{self.stream}/{label}")

    def generator(self) -> np.random.Generator:
        digest = blake2b(
            f"{self.seed}|{self.stream}".encode(), digest_size=16
        ).digest()
        key = np.frombuffer(digest, dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class ProbVector:
    """Normalized outcome distribution over the 2**n bitstrings."""

    n: int
    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.shape != (2**self.n,):
            raise ValueError(f"expected {2**self.n} probabilities, got {p.shape}")
        if p.min() < PROB_FLOOR:
            raise ValueError(f"negative probability {p.min()}")
        if abs(p.sum() - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {p.sum()}")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    def to_dict(self) -> dict[str, float]:
        return {x: float(v) for x, v in zip(bitstrings(self.n), self.p)}

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "p": [float(v) for v in self.p]})

    @classmethod
    def from_json(cls, text: str) -> "ProbVector":
        payload = json.loads(text)
        return cls(int(payload["n"]), np.array(payload["p"], dtype=float))


@dataclass(frozen=True)
class Histogram:
    """Outcome counts from repeated measurement shots."""

    n: int
    counts: np.ndarray
    shots: int

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if c.shape != (2**self.n,):
            raise ValueError(f"expected {2**self.n} counts, got {c.shape}")
        if c.min() < 0:
            raise ValueError("counts must be non-negative")
        if c.sum() != self.shots:
            raise ValueError(f"counts sum to {c.sum()}, not {self.shots}")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    def frequencies(self) -> ProbVector:
        return ProbVector(self.n, self.counts / self.shots)

    def to_dict(self) -> dict[str, int]:
        return {x: int(c) for x, c in zip(bitstrings(self.n), self.counts)}


def ideal_measurement(n: int) -> Povm:
    """Perfect computational-basis measurement: Pi_x = |x><x|."""
    d = 2**n
    els = np.zeros((d, d, d), dtype=complex)
    for x in range(d):
        els[x, x, x] = 1.0
    return Povm(n, els)


def rotated_measurement(gate: np.ndarray, n: int) -> Povm:
    """Measurement whose elements are G^dagger |x><x| G for a unitary G."""
    d = 2**n
    gd = np.asarray(gate, dtype=complex).conj().T
    els = np.einsum("ax,bx->xab", gd, gd.conj())
    return Povm(n, els)


def ry_measurement(n: int, angle: float = DEFAULT_RY_ANGLE) -> Povm:
    """Coherently miscalibrated device: exp(-i*angle*Y) on every qubit
    before an ideal measurement."""
    if n < 1:
        raise ValueError("need at least one qubit")
    return rotated_measurement(kron_all([ry_gate(angle)] * n), n)


def confusion_measurement(a: np.ndarray) -> Povm:
    """Purely classical device defined by a column-stochastic matrix.

    Pi_x = sum_y a[x, y] |y><y|, where a[x, y] is the probability of
    reporting x when the true outcome is y.
    """
    a = np.asarray(a, dtype=float)
    d = a.shape[0]
    n = d.bit_length() - 1
    if a.shape != (d, d) or 2**n != d:
        raise ValueError(f"confusion matrix must be 2^n x 2^n, got {a.shape}")
    if a.min() < 0 or np.abs(a.sum(axis=0) - 1.0).max() > 1e-9:
        raise ValueError("confusion matrix must be column-stochastic")
    els = np.stack([np.diag(a[x]).astype(complex) for x in range(d)])
    return Povm(n, els)


def apply_confusion(povm: Povm, a: np.ndarray) -> Povm:
    """Compose classical confusion after any device: Pi_x -> sum_y a[x,y] Pi_y."""
    a = np.asarray(a, dtype=float)
    if a.shape != (povm.dim, povm.dim):
        raise ValueError("confusion matrix dimension mismatch")
    if a.min() < 0 or np.abs(a.sum(axis=0) - 1.0).max() > 1e-9:
        raise ValueError("confusion matrix must be column-stochastic")
    return Povm(povm.n, np.einsum("xy,yab->xab", a, povm.elements))


def born_probabilities(povm: Povm, state: DensityState) -> ProbVector:
    """Outcome distribution p(x) = tr[Pi_x rho].

    Round-off negatives above the floor are clamped to zero and the vector
    renormalized; anything below the floor means inconsistent inputs.
    """
    if state.dim != povm.dim:
        raise InconsistentInputsError(
            f"state dimension {state.dim} does not match device {povm.dim}"
        )
    p = np.einsum("xab,ba->x", povm.elements, state.matrix).real
    if p.min() < PROB_FLOOR:
        raise InconsistentInputsError(f"negative probability {p.min()}")
    p = np.clip(p, 0.0, None)
    return ProbVector(povm.n, p / p.sum())


def sample_histogram(p: ProbVector, shots: int, rng: SeededRng) -> Histogram:
    """Multinomial draw of outcome counts; deterministic in (seed, stream)."""
    if shots < 1:
        raise ValueError("shots must be positive")
    counts = rng.generator().multinomial(shots, p.p)
    return Histogram(p.n, counts, shots)
