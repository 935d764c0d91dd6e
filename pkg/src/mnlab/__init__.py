"""mnlab: a simulation lab for noise in quantum measurement devices.

Simulates noisy measurement devices as POVMs, detects coherent (quantum)
noise with a phase-swept witness fitted to a Fourier series, eliminates it
by randomized twirling, mitigates the remaining classical noise, and
reproduces three end-to-end experiments at desk scale.
"""

__version__ = "0.1.0"

from .detect import DetectionConfig, hoeffding_shots, run_detection
from .eliminate import (
    EliminationConfig,
    TwirlMethod,
    effective_povm,
    outcome_relabel,
    run_elimination,
)
from .experiments import (
    Hamiltonian,
    OptimizerConfig,
    Pipeline,
    h2_hamiltonian,
    pauli_expectation,
    run_ghz_parity,
    run_mermin,
    run_vqe,
    transformed_hamiltonian,
)
from .mitigate import (
    CalibrationMatrix,
    calibrate,
    mitigate_ibu,
    mitigate_inverse,
    mitigate_least_squares,
)
from .noisemodel import (
    Histogram,
    ProbVector,
    SeededRng,
    born_probabilities,
    confusion_measurement,
    ideal_measurement,
    ry_measurement,
    sample_histogram,
)
from .povm import (
    FourierFit,
    Povm,
    Ptm,
    WitnessReport,
    is_classical,
    linf_coherence,
    measurement_fidelity,
    noise_measure,
    pauli_transition_matrix,
    povm_to_ptm,
    ptm_to_povm,
    theoretical_fourier_coeffs,
    witness_expectation,
)
from .qcore import (
    DensityState,
    apply_gate,
    ghz_state,
    maximally_mixed,
    mermin_state,
    pauli_operator,
    plus_theta_state,
)

__all__ = [name for name in dir() if not name.startswith("_")]
