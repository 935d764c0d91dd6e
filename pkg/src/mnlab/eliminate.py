"""Quantum-noise elimination by randomized twirling of the measurement.

Three twirl sets are supported: IZ dephasing ({I,Z} tensor powers, no
outcome relabeling), XY twirling ({X,Y} tensor powers, every outcome bit
flipped), and full Pauli twirling (bits flipped where the sampled Pauli has
an X or Y letter).  Each turns the effective device into a purely classical
one while preserving measurement fidelity.  The channel-level effective
POVM is available in closed form as the oracle for the shot procedures.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import product

import numpy as np

from .noisemodel import (
    ProbVector,
    SeededRng,
    born_probabilities,
    sample_histogram,
)
from .povm import Povm, Ptm, _iz_row_mask, povm_to_ptm, ptm_to_povm
from .qcore import (
    DensityState,
    bitstring_index,
    hamming_weight,
    pauli_operator,
    validate_pauli_string,
)


class TwirlMethod(Enum):
    IZ = "iz"
    XY = "xy"
    PAULI = "pauli"

    @property
    def letters(self) -> str:
        return {"iz": "IZ", "xy": "XY", "pauli": "IXYZ"}[self.value]

    def twirl_size(self, n: int) -> int:
        return len(self.letters) ** n


def twirl_set(method: TwirlMethod, n: int) -> list[str]:
    """The full set of Pauli strings the method samples from."""
    return ["".join(p) for p in product(method.letters, repeat=n)]


def flip_mask(pauli: str) -> int:
    """Bitmask of positions where the Pauli letter is X or Y."""
    validate_pauli_string(pauli)
    mask = 0
    for c in pauli:
        mask = (mask << 1) | (1 if c in "XY" else 0)
    return mask


def outcome_relabel(x: str, pauli: str) -> str:
    """Flip bit i of x iff letter i of the twirl Pauli is X or Y."""
    if len(x) != len(pauli):
        raise ValueError("outcome and Pauli string lengths differ")
    flipped = bitstring_index(x) ^ flip_mask(pauli)
    return format(flipped, f"0{len(x)}b")


@dataclass(frozen=True)
class EliminationConfig:
    """Settings for a twirling run.

    Modes: ``sampled`` draws ``k`` Paulis uniformly with replacement and
    takes ``shots`` per draw; ``exhaustive`` runs every Pauli in the twirl
    set once with ``shots`` each; ``analytic`` enumerates the set with exact
    Born probabilities (no sampling at all).
    """

    method: TwirlMethod
    k: int = 32
    shots: int = 8192
    seed: int = 0
    mode: str = "sampled"

    def __post_init__(self):
        if self.mode not in ("sampled", "exhaustive", "analytic"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "sampled" and self.k < 1:
            raise ValueError("k must be positive in sampled mode")
        if self.mode != "analytic" and self.shots < 1:
            raise ValueError("shots must be positive")


def _mask_signs(n: int) -> np.ndarray:
    """(-1)^{|i_z xor j_z|} over pairs of IZ Pauli indices, in z-mask order."""
    d = 2**n
    i = np.arange(d)
    pops = np.array([[hamming_weight(a ^ b) for b in i] for a in i])
    return np.where(pops % 2 == 0, 1.0, -1.0)


def effective_povm(povm: Povm, method: TwirlMethod) -> Povm:
    """Exact POVM of the twirled measurement channel.

    IZ dephasing zeroes every off-diagonal entry and keeps diagonals.  XY
    and Pauli twirling act on the transfer matrix restricted to I/Z rows
    and columns: XY flips signs by the parity of the combined z-mask, Pauli
    keeps only the diagonal.  All three outputs are classical devices with
    the fidelity of the original.
    """
    n = povm.n
    if method is TwirlMethod.IZ:
        eye = np.eye(povm.dim)
        return Povm(n, np.einsum("xab,ab->xab", povm.elements, eye))
    mask = _iz_row_mask(n)
    m = np.array(povm_to_ptm(povm).matrix)
    iz = np.ix_(mask, mask)
    block = m[iz]
    m[:, :] = 0.0
    if method is TwirlMethod.XY:
        m[iz] = _mask_signs(n) * block
    else:
        m[iz] = np.diag(np.diag(block))
    return ptm_to_povm(Ptm(n, m))


def _relabel_vector(values: np.ndarray, mask: int) -> np.ndarray:
    """Permute an outcome-indexed vector by XOR with a flip mask."""
    idx = np.arange(values.shape[0]) ^ mask
    return values[idx]


def run_elimination(
    povm: Povm, state: DensityState, cfg: EliminationConfig, rng: SeededRng
) -> ProbVector:
    """Estimate the outcome distribution of the twirled device on a state.

    Averages relabeled (empirical or exact) distributions over the sampled
    or enumerated twirl Paulis.  The result is an unbiased estimate of
    born_probabilities(effective_povm(povm, method), state): the diagonal
    of the state seen through classical noise only.
    """
    n = povm.n
    if cfg.mode == "sampled":
        gen = rng.substream("paulis").generator()
        full = twirl_set(cfg.method, n)
        paulis = [full[i] for i in gen.integers(0, len(full), cfg.k)]
    else:
        paulis = twirl_set(cfg.method, n)

    conjugated: dict[str, ProbVector] = {}
    total = np.zeros(povm.dim)
    for k, pstr in enumerate(paulis):
        if pstr not in conjugated:
            gate = pauli_operator(pstr)
            twirled = DensityState(gate @ state.matrix @ gate.conj().T)
            conjugated[pstr] = born_probabilities(povm, twirled)
        p = conjugated[pstr]
        if cfg.mode == "analytic":
            observed = p.p
        else:
            hist = sample_histogram(p, cfg.shots, rng.substream(f"twirl/{k}"))
            observed = hist.counts / cfg.shots
        total += _relabel_vector(observed, flip_mask(pstr))
    return ProbVector(n, total / len(paulis))
