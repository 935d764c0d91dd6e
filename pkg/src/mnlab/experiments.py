"""End-to-end applications: Mermin polynomial, GHZ parity oscillation, VQE.

Each experiment measures multi-qubit observables through a (possibly noisy)
measurement device, optionally routing the statistics through quantum-noise
elimination and classical readout mitigation, and reports estimates against
dense-matrix oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eliminate import EliminationConfig, TwirlMethod, effective_povm, run_elimination
from .mitigate import (
    CalibrationMatrix,
    calibrate,
    mitigate_ibu,
    mitigate_inverse,
    mitigate_least_squares,
)
from .noisemodel import SeededRng, born_probabilities, sample_histogram
from .povm import Povm
from .qcore import (
    DensityState,
    PAULI_MATRICES,
    cz_gate,
    ghz_state,
    hadamard_gate,
    hamming_weight,
    kron_all,
    mermin_state,
    pauli_operator,
    pure_state,
    ry_gate,
    s_gate,
    validate_pauli_string,
)

MITIGATORS = ("none", "inverse", "lsq", "ibu")

# Y-weight 0 and 4 strings enter negatively; this combination peaks at
# 8*sqrt(2) on the phased GHZ state built by mermin_state().
MERMIN_TERMS = (
    ("XXXY", 1.0), ("XXYX", 1.0), ("XYXX", 1.0), ("YXXX", 1.0),
    ("XXYY", 1.0), ("XYXY", 1.0), ("XYYX", 1.0), ("YXXY", 1.0),
    ("YXYX", 1.0), ("YYXX", 1.0),
    ("XXXX", -1.0), ("XYYY", -1.0), ("YXYY", -1.0), ("YYXY", -1.0),
    ("YYYX", -1.0), ("YYYY", -1.0),
)


@dataclass(frozen=True)
class Hamiltonian:
    """Linear combination of Pauli strings on n qubits."""

    n: int
    terms: tuple

    def __post_init__(self):
        for coeff, pstr in self.terms:
            validate_pauli_string(pstr)
            if len(pstr) != self.n:
                raise ValueError(f"term {pstr!r} has wrong length for n={self.n}")
            float(coeff)

    def to_matrix(self) -> np.ndarray:
        d = 2**self.n
        out = np.zeros((d, d), dtype=complex)
        for coeff, pstr in self.terms:
            out += coeff * pauli_operator(pstr)
        return out

    def ground_energy(self) -> float:
        return float(np.linalg.eigvalsh(self.to_matrix())[0])


def h2_hamiltonian() -> Hamiltonian:
    """4-qubit hydrogen-molecule Hamiltonian (15 Pauli terms)."""
    return Hamiltonian(
        4,
        (
            (-0.097066, "IIII"),
            (-0.045303, "XXYY"),
            (0.045303, "XYYX"),
            (0.045303, "YXXY"),
            (-0.045303, "YYXX"),
            (0.171413, "ZIII"),
            (0.168689, "ZZII"),
            (0.120625, "ZIZI"),
            (0.165928, "ZIIZ"),
            (0.171413, "IZII"),
            (0.165928, "IZZI"),
            (0.120625, "IZIZ"),
            (-0.223432, "IIZI"),
            (0.174413, "IIZZ"),
            (-0.223432, "IIIZ"),
        ),
    )


def basis_change(obs: str) -> np.ndarray:
    """Unitary Q with Q P Q^dagger diagonal: H for X, H S^dagger for Y."""
    validate_pauli_string(obs)
    h = hadamard_gate()
    sd = s_gate().conj().T
    mats = []
    for c in obs:
        if c == "X":
            mats.append(h)
        elif c == "Y":
            mats.append(h @ sd)
        else:
            mats.append(np.eye(2, dtype=complex))
    return kron_all(mats)


def parity_signs(obs: str, n: int) -> np.ndarray:
    """Eigenvalue of the diagonalized observable per outcome: parity of the
    outcome bits at non-identity positions."""
    mask = 0
    for c in obs:
        mask = (mask << 1) | (0 if c == "I" else 1)
    pops = np.array([hamming_weight(x & mask) for x in range(2**n)])
    return np.where(pops % 2 == 0, 1.0, -1.0)


@dataclass(frozen=True)
class Pipeline:
    """How an expectation value is routed from device statistics.

    ``method`` selects quantum-noise elimination (None = raw device) and
    ``twirl_mode`` how it runs: "channel" uses the exact effective POVM,
    "sampled"/"exhaustive" run the shot-level twirling procedure with
    ``twirl_count`` draws.  ``mitigator`` applies classical correction with
    an analytically calibrated confusion matrix (or one estimated with
    ``calibration_shots``).  ``analytic`` replaces all shot sampling with
    exact Born probabilities.
    """

    method: TwirlMethod | None = None
    mitigator: str = "none"
    analytic: bool = False
    shots: int = 8192
    twirl_mode: str = "channel"
    twirl_count: int = 32
    calibration_shots: int | None = None

    def __post_init__(self):
        if self.mitigator not in MITIGATORS:
            raise ValueError(f"unknown mitigator {self.mitigator!r}")
        if self.twirl_mode not in ("channel", "sampled", "exhaustive"):
            raise ValueError(f"unknown twirl mode {self.twirl_mode!r}")
        if not self.analytic and self.shots < 1:
            raise ValueError("shots must be positive")


class PipelineRunner:
    """Caches the effective device and calibration for repeated estimates."""

    def __init__(self, povm: Povm, pipeline: Pipeline, rng: SeededRng | None = None):
        self.povm = povm
        self.pipeline = pipeline
        self.n = povm.n
        if pipeline.method is not None:
            self.effective = effective_povm(povm, pipeline.method)
        else:
            self.effective = povm
        # Channel mode measures with the effective device directly; the
        # shot-level twirl modes still measure with the raw device but are
        # calibrated against the effective one they emulate.
        self.device = (
            self.effective if pipeline.twirl_mode == "channel" else povm
        )
        self.calibration: CalibrationMatrix | None = None
        if pipeline.mitigator != "none":
            if pipeline.calibration_shots is None:
                self.calibration = calibrate(self.effective)
            else:
                if rng is None:
                    raise ValueError("shot-mode calibration needs an rng")
                self.calibration = calibrate(
                    self.effective,
                    shots=pipeline.calibration_shots,
                    rng=rng.substream("calibration"),
                )

    def probabilities(
        self, state: DensityState, rng: SeededRng | None
    ) -> np.ndarray:
        pipe = self.pipeline
        if not pipe.analytic and rng is None:
            raise ValueError("shot sampling needs an rng")
        if pipe.method is not None and pipe.twirl_mode != "channel":
            cfg = EliminationConfig(
                method=pipe.method,
                k=pipe.twirl_count,
                shots=pipe.shots,
                mode="analytic" if pipe.analytic else pipe.twirl_mode,
            )
            return run_elimination(
                self.povm, state, cfg, rng if rng is not None else SeededRng(0)
            ).p
        p = born_probabilities(self.device, state)
        if pipe.analytic:
            return p.p
        return sample_histogram(p, pipe.shots, rng).counts / pipe.shots

    def correct(self, probs: np.ndarray) -> np.ndarray:
        mit = self.pipeline.mitigator
        if mit == "none":
            return probs
        assert self.calibration is not None
        if mit == "inverse":
            return mitigate_inverse(self.calibration, probs)
        if mit == "lsq":
            return mitigate_least_squares(self.calibration, probs).p
        return mitigate_ibu(self.calibration, probs).p

    def expectation(
        self, state: DensityState, obs: str, rng: SeededRng | None = None
    ) -> float:
        """Estimate tr[P rho] for a Pauli-string observable."""
        if len(obs) != self.n:
            raise ValueError("observable length does not match device")
        if set(obs) == {"I"}:
            return 1.0
        q = basis_change(obs)
        rotated = DensityState(q @ state.matrix @ q.conj().T)
        probs = self.probabilities(rotated, rng)
        return float(parity_signs(obs, self.n) @ self.correct(probs))


def pauli_expectation(
    povm: Povm,
    state: DensityState,
    obs: str,
    pipeline: Pipeline = Pipeline(analytic=True),
    rng: SeededRng | None = None,
) -> float:
    """One-shot convenience wrapper around PipelineRunner."""
    return PipelineRunner(povm, pipeline, rng).expectation(state, obs, rng)


@dataclass(frozen=True)
class ExperimentResult:
    mean: float
    stderr: float
    values: np.ndarray


def _summary(values: list[float]) -> ExperimentResult:
    arr = np.array(values, dtype=float)
    err = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return ExperimentResult(float(arr.mean()), err, arr)


def mermin_oracle() -> float:
    """Dense-matrix value of the Mermin combination on the phased GHZ state."""
    rho = mermin_state().matrix
    return float(
        sum(
            sign * np.einsum("ij,ji->", pauli_operator(p), rho).real
            for p, sign in MERMIN_TERMS
        )
    )


def run_mermin(
    povm: Povm,
    pipeline: Pipeline,
    repeats: int = 1000,
    seed: int = 0,
) -> ExperimentResult:
    """Repeatedly estimate the 16-term Mermin combination on mermin_state()."""
    if povm.n != 4:
        raise ValueError("the Mermin experiment needs a 4-qubit device")
    state = mermin_state()
    root = SeededRng(seed, "mermin")
    runner = PipelineRunner(povm, pipeline, root)
    # analytic pipelines are deterministic, so one repeat stands for all
    reps = 1 if pipeline.analytic else repeats
    values = []
    for r in range(reps):
        total = 0.0
        for t, (obs, sign) in enumerate(MERMIN_TERMS):
            rng = root.substream(f"rep/{r}/term/{t}")
            total += sign * runner.expectation(state, obs, rng)
        values.append(total)
    return _summary(values * repeats if reps == 1 else values)


def u_phi_gate(phi: float) -> np.ndarray:
    """exp(i pi sigma_phi / 4) with sigma_phi = cos(phi) X + sin(phi) Y."""
    sigma = np.cos(phi) * PAULI_MATRICES["X"] + np.sin(phi) * PAULI_MATRICES["Y"]
    return (np.eye(2, dtype=complex) + 1j * sigma) / np.sqrt(2)


def _ghz_rotated(phi: float, n: int) -> DensityState:
    gate = kron_all([u_phi_gate(phi)] * n)
    return DensityState(gate @ ghz_state(n).matrix @ gate.conj().T)


def ghz_parity_oracle(phis, n: int = 4) -> np.ndarray:
    """Ideal parity curve from the dense matrix (equals cos(n*phi))."""
    zn = pauli_operator("Z" * n)
    return np.array(
        [
            np.einsum("ij,ji->", zn, _ghz_rotated(phi, n).matrix).real
            for phi in np.atleast_1d(phis)
        ]
    )


@dataclass(frozen=True)
class GhzParityResult:
    phis: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray


def run_ghz_parity(
    povm: Povm,
    phis,
    pipeline: Pipeline,
    repeats: int = 100,
    seed: int = 0,
) -> GhzParityResult:
    """Parity of Z^(x)n after rotating every GHZ qubit by u_phi, per phi."""
    if povm.n != 4:
        raise ValueError("the GHZ experiment needs a 4-qubit device")
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    root = SeededRng(seed, "ghz")
    runner = PipelineRunner(povm, pipeline, root)
    obs = "Z" * povm.n
    means, errs = [], []
    for i, phi in enumerate(phis):
        state = _ghz_rotated(phi, povm.n)
        reps = 1 if pipeline.analytic else repeats
        vals = [
            runner.expectation(state, obs, root.substream(f"phi/{i}/rep/{r}"))
            for r in range(reps)
        ]
        vals = vals * repeats if reps == 1 else vals
        res = _summary(vals)
        means.append(res.mean)
        errs.append(res.stderr)
    return GhzParityResult(phis, np.array(means), np.array(errs))


def transformed_hamiltonian(ham: Hamiltonian, noise_gate: np.ndarray) -> np.ndarray:
    """Hamiltonian actually estimated when a coherent gate precedes readout.

    Every term's diagonalized observable is conjugated by the noise gate
    inside the basis-change sandwich:
    sum_i alpha_i Q_i^dag R^dag D_i R Q_i.
    """
    d = 2**ham.n
    r = np.asarray(noise_gate, dtype=complex)
    if r.shape != (d, d):
        raise ValueError("noise gate dimension mismatch")
    out = np.zeros((d, d), dtype=complex)
    for coeff, pstr in ham.terms:
        if set(pstr) == {"I"}:
            out += coeff * np.eye(d)
            continue
        q = basis_change(pstr)
        dmat = np.diag(parity_signs(pstr, ham.n)).astype(complex)
        out += coeff * q.conj().T @ r.conj().T @ dmat @ r @ q
    return out


@dataclass(frozen=True)
class OptimizerConfig:
    """Cyclic per-parameter analytic minimization (three-point rule)."""

    layers: int = 6
    sweeps: int = 100
    tol: float = 1e-6

    def __post_init__(self):
        if self.layers < 1 or self.sweeps < 1:
            raise ValueError("layers and sweeps must be positive")


_N_VQE = 4


def _cz_layer_diagonals(n: int):
    odd = np.diag(cz_gate(n, 0, 1) @ cz_gate(n, 2, 3)).real
    even = np.diag(cz_gate(n, 1, 2)).real
    return odd, even


def ansatz_vector(thetas: np.ndarray) -> np.ndarray:
    """Statevector of the layered ansatz from |0...0>.

    Each layer applies Y-rotations exp(-i theta Y / 2) on all qubits, then
    CZ on pairs (0,1),(2,3) for layers 1,3,5 and (1,2) for layers 2,4,6.
    """
    thetas = np.asarray(thetas, dtype=float)
    layers, n = thetas.shape
    if n != _N_VQE:
        raise ValueError("ansatz is defined on 4 qubits")
    odd, even = _cz_layer_diagonals(n)
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1.0
    for layer in range(layers):
        rot = kron_all([ry_gate(thetas[layer, q] / 2) for q in range(n)])
        psi = rot @ psi
        psi = psi * (odd if layer % 2 == 0 else even)
    return psi


def ansatz_state(thetas: np.ndarray) -> DensityState:
    return pure_state(ansatz_vector(thetas))


class _CostEvaluator:
    """Hamiltonian cost of the ansatz through a measurement pipeline.

    In analytic channel mode each term reduces to one precomputed effective
    observable (unmitigated / inverse) or a probability contraction
    (lsq / ibu); otherwise evaluation routes through PipelineRunner.
    """

    def __init__(self, povm: Povm, ham: Hamiltonian, pipeline: Pipeline,
                 rng: SeededRng):
        self.ham = ham
        self.pipeline = pipeline
        self.rng = rng
        self.runner = PipelineRunner(povm, pipeline, rng)
        self.constant = sum(c for c, p in ham.terms if set(p) == {"I"})
        self.pauli_terms = [(c, p) for c, p in ham.terms if set(p) != {"I"}]
        self.fast = pipeline.analytic and (
            pipeline.method is None or pipeline.twirl_mode == "channel"
        )
        self.evals = 0
        if not self.fast:
            return
        device = self.runner.device
        self._contexts = []
        for coeff, pstr in self.pauli_terms:
            q = basis_change(pstr)
            signs = parity_signs(pstr, ham.n)
            if pipeline.mitigator in ("none", "inverse"):
                weights = signs
                if pipeline.mitigator == "inverse":
                    weights = np.linalg.inv(self.runner.calibration.matrix).T @ signs
                eff = q.conj().T @ np.einsum(
                    "x,xab->ab", weights, device.elements
                ) @ q
                self._contexts.append((coeff, "linear", eff))
            else:
                stack = np.einsum(
                    "ca,xab,bd->xcd", q.conj().T, device.elements, q
                )
                self._contexts.append((coeff, pipeline.mitigator, (stack, signs)))

    def cost(self, thetas: np.ndarray) -> float:
        self.evals += 1
        psi = ansatz_vector(thetas)
        if self.fast:
            total = self.constant
            for coeff, kind, ctx in self._contexts:
                if kind == "linear":
                    total += coeff * np.einsum("a,ab,b->", psi.conj(), ctx, psi).real
                else:
                    stack, signs = ctx
                    p = np.einsum("xab,a,b->x", stack, psi.conj(), psi).real
                    p = np.clip(p, 0.0, None)
                    p = p / p.sum()
                    total += coeff * float(signs @ self.runner.correct(p))
            return float(total)
        state = pure_state(psi)
        total = self.constant
        for t, (coeff, pstr) in enumerate(self.pauli_terms):
            rng = self.rng.substream(f"eval/{self.evals}/term/{t}")
            total += coeff * self.runner.expectation(state, pstr, rng)
        return float(total)


def _rotosolve_update(f0: float, fp: float, fm: float, t0: float) -> float:
    """Exact minimizer of a + b cos(theta - c) from three evaluations."""
    mid = 0.5 * (fp + fm)
    u = f0 - mid
    w = 0.5 * (fp - fm)
    if np.hypot(u, w) < 1e-14:
        return t0
    return t0 - np.arctan2(-w, u) + np.pi


@dataclass(frozen=True)
class VqeResult:
    trace: tuple
    final_energy: float
    thetas: np.ndarray


def run_vqe(
    povm: Povm,
    ham: Hamiltonian,
    pipeline: Pipeline = Pipeline(analytic=True),
    optimizer: OptimizerConfig = OptimizerConfig(),
    seed: int = 0,
    restart: int = 0,
) -> VqeResult:
    """Minimize the measured Hamiltonian cost over the layered ansatz.

    Parameters start uniform in [0, 2pi).  Sweeps run qubit-major with the
    layer index varying fastest; each parameter is set to the exact
    minimizer of its sinusoidal section.  The trace records the energy
    after every sweep, starting with the initial point.  ``restart``
    selects an independent random initialization under the same seed.
    """
    if ham.n != _N_VQE or povm.n != _N_VQE:
        raise ValueError("VQE is configured for 4 qubits")
    root = SeededRng(seed, f"vqe/{restart}")
    evaluator = _CostEvaluator(povm, ham, pipeline, root)
    thetas = (
        root.substream("init").generator().uniform(0, 2 * np.pi,
                                                   (optimizer.layers, _N_VQE))
    )
    energy = evaluator.cost(thetas)
    trace = [(0, energy)]
    for sweep in range(1, optimizer.sweeps + 1):
        for q in range(_N_VQE):
            for layer in range(optimizer.layers):
                t0 = thetas[layer, q]
                f0 = evaluator.cost(thetas)
                thetas[layer, q] = t0 + np.pi / 2
                fp = evaluator.cost(thetas)
                thetas[layer, q] = t0 - np.pi / 2
                fm = evaluator.cost(thetas)
                thetas[layer, q] = _rotosolve_update(f0, fp, fm, t0)
        new_energy = evaluator.cost(thetas)
        trace.append((sweep, new_energy))
        if abs(new_energy - energy) < optimizer.tol:
            energy = new_energy
            break
        energy = new_energy
    return VqeResult(tuple(trace), float(energy), thetas)
