"""POVM and Pauli-transfer representations of noisy measurement devices.

A measurement device is a POVM {Pi_x} indexed by outcome bitstrings x.
Nonzero off-diagonal entries of the elements are coherent (quantum) noise;
off-target diagonal entries are classical noise.  This module provides the
two representations and their conversions, the classicality predicate, the
phase-swept coherence witness with its exact Fourier coefficients, the
derived noise measure, measurement fidelity, an l_inf coherence monotone,
and the outcome transition matrices of Pauli-twirled devices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .qcore import (
    ATOL,
    bitstring_index,
    bitstrings,
    hamming_weight,
    is_hermitian,
    pauli_stack,
    plus_theta_state,
)

PSD_FLOOR = -1e-10
COMPLETENESS_TOL = 1e-8


class MalformedPtmError(ValueError):
    """PTM does not describe a valid measurement channel."""


@dataclass(frozen=True)
class Povm:
    """Ordered POVM with 2**n elements, one per outcome bitstring.

    ``elements`` has shape (2**n, 2**n, 2**n); elements[x] is the operator
    for outcome ``format(x, '0nb')``.
    """

    n: int
    elements: np.ndarray

    def __post_init__(self):
        d = 2**self.n
        el = np.array(self.elements, dtype=complex)
        if el.shape != (d, d, d):
            raise ValueError(f"expected {d} elements of shape {d}x{d}, got {el.shape}")
        for x in range(d):
            if not is_hermitian(el[x]):
                raise ValueError(f"element {x} is not Hermitian")
            if np.linalg.eigvalsh(el[x])[0] < PSD_FLOOR:
                raise ValueError(f"element {x} is not positive semidefinite")
        if np.abs(el.sum(axis=0) - np.eye(d)).max() > COMPLETENESS_TOL:
            raise ValueError("elements do not sum to the identity")
        el.setflags(write=False)
        object.__setattr__(self, "elements", el)

    @property
    def dim(self) -> int:
        return 2**self.n

    def element(self, outcome: str) -> np.ndarray:
        return self.elements[bitstring_index(outcome)]

    def outcomes(self) -> list[str]:
        return bitstrings(self.n)

    def to_json(self) -> str:
        payload = {
            "n": self.n,
            "elements": [
                [[float(v.real), float(v.imag)] for v in e.ravel()]
                for e in self.elements
            ],
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Povm":
        payload = json.loads(text)
        n = int(payload["n"])
        d = 2**n
        els = []
        for flat in payload["elements"]:
            arr = np.array([complex(re, im) for re, im in flat]).reshape(d, d)
            els.append(arr)
        return cls(n, np.stack(els))


@dataclass(frozen=True)
class Ptm:
    """Pauli-transfer matrix of a measurement channel.

    Real 4**n x 4**n matrix indexed by Pauli strings in lexicographic order.
    Rows whose Pauli string contains an X or Y letter vanish for every
    measurement channel, which is validated here.
    """

    n: int
    matrix: np.ndarray

    def __post_init__(self):
        q = 4**self.n
        m = np.array(self.matrix, dtype=float)
        if m.shape != (q, q):
            raise ValueError(f"expected {q}x{q} matrix, got {m.shape}")
        bad = ~_iz_row_mask(self.n)
        if m[bad].size and np.abs(m[bad]).max() > ATOL:
            raise ValueError("rows with X or Y letters must vanish")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


@lru_cache(maxsize=8)
def _iz_row_mask(n: int) -> np.ndarray:
    """Boolean mask over Pauli indices that contain only I and Z letters."""
    mask = np.zeros(4**n, dtype=bool)
    for i in range(4**n):
        digits = []
        v = i
        for _ in range(n):
            digits.append(v % 4)
            v //= 4
        mask[i] = all(dg in (0, 3) for dg in digits)  # 0 -> I, 3 -> Z
    return mask


@lru_cache(maxsize=8)
def _pauli_diagonals(n: int) -> np.ndarray:
    """Real diagonals of every Pauli string, shape (4**n, 2**n).

    Rows for strings containing X or Y are identically zero, which makes
    this the matrix <x|P_i|x> used in both PTM conversion directions.
    """
    return np.einsum("jaa->ja", pauli_stack(n)).real.copy()


def povm_to_ptm(povm: Povm) -> Ptm:
    """PTM entry (i, j) = (1/2**n) sum_x tr[Pi_x P_j] <x|P_i|x>."""
    stack = pauli_stack(povm.n)
    traces = np.einsum("xab,jba->xj", povm.elements, stack).real
    diag = _pauli_diagonals(povm.n)
    return Ptm(povm.n, diag @ traces / povm.dim)


def ptm_to_povm(ptm: Ptm) -> Povm:
    """Reconstruct Pi_x = (1/2**n) sum_ij <x|P_i|x> [M]_ij P_j."""
    n = ptm.n
    stack = pauli_stack(n)
    diag = _pauli_diagonals(n)
    coeff = diag.T @ ptm.matrix  # (2**n, 4**n)
    elements = np.einsum("xj,jab->xab", coeff, stack) / 2**n
    for x in range(2**n):
        if np.linalg.eigvalsh((elements[x] + elements[x].conj().T) / 2)[0] < PSD_FLOOR:
            raise MalformedPtmError(f"reconstructed element {x} is not PSD")
    try:
        return Povm(n, elements)
    except ValueError as exc:
        raise MalformedPtmError(str(exc)) from exc


def is_classical(povm: Povm, tol: float = 1e-8) -> bool:
    """True iff every off-diagonal modulus of every element is below tol."""
    off = povm.elements - np.einsum(
        "xab,ab->xab", povm.elements, np.eye(povm.dim)
    )
    return bool(np.abs(off).max() < tol)


def max_offdiagonal(povm: Povm) -> float:
    off = povm.elements * (1 - np.eye(povm.dim))
    return float(np.abs(off).max())


@dataclass(frozen=True)
class WitnessReport:
    """Signed coherence-witness expectation for one outcome and phase.

    ``value`` is 2**n * tr[W Pi_x] with W = 1/2**n - |Phi_theta><Phi_theta|,
    before taking the absolute value.  Because 0 <= Pi_x <= 1, the value
    lies in [-(2**n - 1), 2**n - 1]; the bound is sharp (take Pi_x equal to
    the probe projector, or the complement) and specializes to [-1, 1] for
    a single qubit.
    """

    outcome: str
    theta: float
    value: float

    def __post_init__(self):
        bound = 2 ** len(self.outcome) - 1
        if abs(self.value) > bound + 1e-9:
            raise ValueError(
                f"witness value {self.value} outside [-{bound}, {bound}]"
            )


def witness_expectation(povm: Povm, outcome: str, theta: float) -> WitnessReport:
    el = povm.element(outcome)
    probe = plus_theta_state(theta, povm.n).matrix
    value = float(np.trace(el).real - povm.dim * np.einsum("ij,ji->", probe, el).real)
    return WitnessReport(outcome=outcome, theta=theta, value=value)


@dataclass(frozen=True)
class FourierFit:
    """Cosine/sine series for the signed witness value of one outcome.

    value(theta) = a[0] + sum_k a[k] cos(k theta) + b[k] sin(k theta),
    with k running from 1 to the harmonic cap.  ``b[0]`` is kept at zero so
    both arrays index directly by harmonic.  ``residual`` is the RMS misfit
    against the data the series was fitted to (zero for exact coefficients).
    """

    outcome: str
    a: np.ndarray
    b: np.ndarray
    residual: float

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("coefficient arrays must be 1-d and equal length")
        if b[0] != 0.0:
            raise ValueError("b[0] must be zero")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def harmonics(self) -> int:
        return len(self.a) - 1

    def evaluate(self, theta) -> np.ndarray | float:
        scalar = np.ndim(theta) == 0
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        k = np.arange(len(self.a))
        val = self.a @ np.cos(np.outer(k, th)) + self.b @ np.sin(np.outer(k, th))
        return float(val[0]) if scalar else val


@lru_cache(maxsize=8)
def _offdiag_pairs(n: int):
    """Index arrays (ys, zs, |h|, sign(h)) over pairs y < z, h = |y| - |z|."""
    d = 2**n
    ys, zs, ks, sg = [], [], [], []
    for y in range(d):
        for z in range(y + 1, d):
            h = hamming_weight(y) - hamming_weight(z)
            ys.append(y)
            zs.append(z)
            ks.append(abs(h))
            sg.append(np.sign(h))
    return np.array(ys), np.array(zs), np.array(ks), np.array(sg)


def theoretical_fourier_coeffs(povm: Povm, outcome: str) -> FourierFit:
    """Exact witness series grouped by Hamming-weight difference.

    The cosine coefficient at harmonic k collects -2 Re of all off-diagonal
    entries whose weight difference has magnitude k; the sine coefficient
    collects the matching -2 sign(h) Im parts (cosine is even in h, sine is
    odd).  Reproduces witness_expectation exactly for every theta.
    """
    n = povm.n
    el = povm.element(outcome)
    ys, zs, ks, sg = _offdiag_pairs(n)
    vals = el[ys, zs]
    a = np.zeros(n + 1)
    b = np.zeros(n + 1)
    np.add.at(a, ks, -2.0 * vals.real)
    np.add.at(b, ks, -2.0 * sg * vals.imag)
    b[0] = 0.0
    return FourierFit(outcome=outcome, a=a, b=b, residual=0.0)


def noise_measure(povm: Povm, outcome: str, theta: float) -> float:
    """Probe-induced quantum-noise measure of one element: |witness value|."""
    return abs(witness_expectation(povm, outcome, theta).value)


def average_noise_measure(povm: Povm, theta: float) -> float:
    """Average of the per-outcome noise measures."""
    return float(
        np.mean([noise_measure(povm, x, theta) for x in povm.outcomes()])
    )


def measurement_fidelity(povm: Povm) -> float:
    """Average probability that basis input |x> produces outcome x."""
    d = povm.dim
    return float(sum(povm.elements[x, x, x].real for x in range(d)) / d)


def linf_coherence(povm: Povm) -> float:
    """Sum over elements of the moduli of upper-triangular entries.

    Bounds the average noise measure at theta = 0 from above:
    linf_coherence >= 2**(n-1) * average_noise_measure(theta=0).
    """
    ys, zs, _, _ = _offdiag_pairs(povm.n)
    return float(np.abs(povm.elements[:, ys, zs]).sum())


def pauli_transition_matrix(x: str) -> np.ndarray:
    """Outcome transition matrix T_x with (T_x)_ij = (-1)^((x XOR i) . j).

    Relates the diagonals of any two elements of a Pauli-twirled device:
    diag(Pi_y) = T_y T_x^{-1} diag(Pi_x).  Always invertible, with
    T_x T_x^T = 2**n I.
    """
    n = len(x)
    xv = bitstring_index(x)
    d = 2**n
    idx = np.arange(d)
    pops = np.array(
        [[hamming_weight((xv ^ i) & j) for j in idx] for i in idx]
    )
    return np.where(pops % 2 == 0, 1.0, -1.0)
