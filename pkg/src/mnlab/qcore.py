"""Dense complex linear algebra: Pauli operators, states, and gates.

Everything is a plain ``numpy`` array of dimension ``2**n x 2**n``.  Qubit 0
is the leftmost letter of a Pauli string and the leftmost character of an
outcome bitstring, i.e. the most significant bit of an integer index.
Intended for desk-scale systems (all built-in experiments use n <= 4; dense
matrices stay practical up to n ~ 6).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, reduce
from itertools import product

import numpy as np

ATOL = 1e-10

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_MATRICES = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}

PAULI_LETTERS = "IXYZ"


def kron_all(mats) -> np.ndarray:
    """Kronecker product of a sequence of matrices, leftmost factor first."""
    return reduce(np.kron, mats)


def validate_pauli_string(letters: str) -> str:
    if not letters or any(c not in PAULI_MATRICES for c in letters):
        raise ValueError(f"invalid Pauli string {letters!r}")
    return letters


def pauli_operator(letters: str) -> np.ndarray:
    """Dense matrix of a Pauli string, qubit 0 as the leftmost factor."""
    validate_pauli_string(letters)
    return kron_all([PAULI_MATRICES[c] for c in letters])


def pauli_strings(n: int) -> list[str]:
    """All length-n Pauli strings in lexicographic order (I < X < Y < Z)."""
    return ["".join(p) for p in product(PAULI_LETTERS, repeat=n)]


@lru_cache(maxsize=8)
def pauli_stack(n: int) -> np.ndarray:
    """Stacked dense matrices of all 4**n Pauli strings, shape (4**n, d, d)."""
    return np.stack([pauli_operator(p) for p in pauli_strings(n)])


def pauli_xz_masks(letters: str) -> tuple[int, int]:
    """Binary (x, z) encoding of a Pauli string as integer bitmasks.

    Qubit 0 occupies the most significant bit.  X -> (1,0), Z -> (0,1),
    Y -> (1,1), I -> (0,0).
    """
    ax = az = 0
    for c in validate_pauli_string(letters):
        ax <<= 1
        az <<= 1
        if c in "XY":
            ax |= 1
        if c in "ZY":
            az |= 1
    return ax, az


def symplectic_inner(p: str, q: str) -> int:
    """Symplectic form of two Pauli strings: 0 if they commute, 1 if not."""
    px, pz = pauli_xz_masks(p)
    qx, qz = pauli_xz_masks(q)
    return (hamming_weight(px & qz) + hamming_weight(pz & qx)) % 2


def hamming_weight(x: int) -> int:
    return bin(x).count("1")


def bitstrings(n: int) -> list[str]:
    return [format(x, f"0{n}b") for x in range(2**n)]


def bitstring_index(x: str) -> int:
    if not x or any(c not in "01" for c in x):
        raise ValueError(f"invalid outcome bitstring {x!r}")
    return int(x, 2)


def is_hermitian(a: np.ndarray, atol: float = ATOL) -> bool:
    return bool(np.abs(a - a.conj().T).max() <= atol)


def is_unitary(a: np.ndarray, atol: float = ATOL) -> bool:
    d = a.shape[0]
    return bool(np.abs(a.conj().T @ a - np.eye(d)).max() <= atol)


def min_eigenvalue(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(a)[0])


def _qubit_count(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim <= 0 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True)
class DensityState:
    """An n-qubit density matrix, validated to be a physical quantum state."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        _qubit_count(m.shape[0])
        if abs(np.trace(m) - 1.0) > ATOL:
            raise ValueError(f"trace {np.trace(m)} differs from 1")
        if not is_hermitian(m):
            raise ValueError("density matrix is not Hermitian")
        if min_eigenvalue(m) < -ATOL:
            raise ValueError("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return _qubit_count(self.dim)

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)


def pure_state(vector: np.ndarray) -> DensityState:
    v = np.asarray(vector, dtype=complex)
    v = v / np.linalg.norm(v)
    return DensityState(np.outer(v, v.conj()))


def basis_state(x: str | int, n: int) -> DensityState:
    """Computational basis state |x><x|."""
    idx = bitstring_index(x) if isinstance(x, str) else int(x)
    v = np.zeros(2**n, dtype=complex)
    v[idx] = 1.0
    return pure_state(v)


def plus_theta_state(theta: float, n: int) -> DensityState:
    """Tensor power of (|0> + e^{i theta} |1>)/sqrt(2).

    Entry (y, z) of the density matrix equals
    ``exp(i theta (|y| - |z|)) / 2**n`` with |.| the Hamming weight, so every
    entry has modulus 1/2**n.
    """
    if n < 1:
        raise ValueError("need at least one qubit")
    w = np.array([hamming_weight(y) for y in range(2**n)])
    v = np.exp(1j * theta * w) / np.sqrt(2**n)
    return pure_state(v)


def maximally_mixed(n: int) -> DensityState:
    if n < 1:
        raise ValueError("need at least one qubit")
    d = 2**n
    return DensityState(np.eye(d, dtype=complex) / d)


def ghz_state(n: int) -> DensityState:
    """(|0...0> + |1...1>)/sqrt(2)."""
    if n < 2:
        raise ValueError("GHZ state needs at least two qubits")
    v = np.zeros(2**n, dtype=complex)
    v[0] = v[-1] = 1.0
    return pure_state(v)


def mermin_state() -> DensityState:
    """The 4-qubit state (|0000> + e^{3 pi i / 4} |1111>)/sqrt(2)."""
    v = np.zeros(16, dtype=complex)
    v[0] = 1.0
    v[15] = np.exp(3j * np.pi / 4)
    return pure_state(v)


def hadamard_gate() -> np.ndarray:
    return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def s_gate() -> np.ndarray:
    return np.diag([1.0, 1.0j]).astype(complex)


def phase_gate(theta: float) -> np.ndarray:
    """diag(1, e^{i theta})."""
    return np.diag([1.0, np.exp(1j * theta)]).astype(complex)


def ry_gate(angle: float) -> np.ndarray:
    """exp(-i * angle * Y) = [[cos, -sin], [sin, cos]]."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]], dtype=complex)


def cz_gate(n: int, i: int, j: int) -> np.ndarray:
    """Controlled-Z between qubits i and j as a diagonal 2**n matrix."""
    if not (0 <= i < n and 0 <= j < n and i != j):
        raise ValueError(f"bad qubit pair ({i}, {j}) for n={n}")
    bi, bj = n - 1 - i, n - 1 - j
    diag = np.array(
        [-1.0 if (x >> bi) & 1 and (x >> bj) & 1 else 1.0 for x in range(2**n)]
    )
    return np.diag(diag).astype(complex)


def apply_gate(state: DensityState, gate: np.ndarray) -> DensityState:
    """Conjugate a state by a unitary: rho -> G rho G^dagger."""
    g = np.asarray(gate, dtype=complex)
    if g.shape != state.matrix.shape:
        raise ValueError(
            f"gate shape {g.shape} does not match state dimension {state.dim}"
        )
    if not is_unitary(g):
        raise ValueError("gate is not unitary")
    return DensityState(g @ state.matrix @ g.conj().T)
