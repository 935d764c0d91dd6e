"""Shot-based quantum-noise detection via phase sweeps and Fourier fitting.

The detector feeds maximally coherent probe states with swept relative phase
and maximally mixed states into the device, estimates the signed witness
value for every outcome from the count difference, and fits each outcome's
phase dependence to a cosine/sine series by least squares.  The fitted
coefficients quantify the real and imaginary off-diagonal content of the
POVM elements, harmonic by harmonic.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .noisemodel import SeededRng, born_probabilities, sample_histogram
from .povm import FourierFit, Povm, witness_expectation
from .qcore import maximally_mixed, plus_theta_state


class DegenerateFitError(RuntimeError):
    """The phase design matrix is rank deficient."""


@dataclass(frozen=True)
class DetectionConfig:
    """Settings for a detection run.

    ``k`` phases are drawn i.i.d. uniform on [0, 2pi); ``harmonics`` caps
    the fitted series (defaults to the qubit count, the exact span of the
    witness).  ``analytic`` replaces shot sampling with exact Born
    probabilities, isolating the fit from statistics.
    """

    k: int
    shots: int
    seed: int
    harmonics: int | None = None
    analytic: bool = False

    def __post_init__(self):
        if self.k < 1 or self.shots < 1:
            raise ValueError("k and shots must be positive")
        if self.harmonics is not None and self.harmonics < 0:
            raise ValueError("harmonics must be non-negative")

    def resolved_harmonics(self, n: int) -> int:
        h = self.harmonics if self.harmonics is not None else n
        if self.k < 2 * h + 1:
            raise ValueError(
                f"k={self.k} phases underdetermine a fit with {h} harmonics"
            )
        return h


def hoeffding_shots(epsilon: float, delta: float) -> int:
    """Shots needed for precision epsilon at confidence 1 - delta."""
    if not (0 < delta < 1) or epsilon <= 0:
        raise ValueError("need epsilon > 0 and 0 < delta < 1")
    return math.ceil(math.log(2 / delta) / (2 * epsilon**2))


def exact_witness_values(povm: Povm, theta: float) -> np.ndarray:
    """Signed witness values for all outcomes, no sampling."""
    return np.array(
        [witness_expectation(povm, x, theta).value for x in povm.outcomes()]
    )


def estimate_witness_at(
    povm: Povm, theta: float, shots: int, rng: SeededRng
) -> np.ndarray:
    """Shot estimate 2**n (M_x - N_x) / shots of the witness, per outcome.

    M_x counts outcomes on maximally mixed inputs (equivalently, uniformly
    random basis states), N_x on coherent probes with relative phase theta.
    Unbiased for the signed witness value.
    """
    n = povm.n
    p_coherent = born_probabilities(povm, plus_theta_state(theta, n))
    p_mixed = born_probabilities(povm, maximally_mixed(n))
    n_counts = sample_histogram(p_coherent, shots, rng.substream("coherent"))
    m_counts = sample_histogram(p_mixed, shots, rng.substream("mixed"))
    return 2**n * (m_counts.counts - n_counts.counts) / shots


def _design_matrix(thetas: np.ndarray, harmonics: int) -> np.ndarray:
    cols = [np.ones_like(thetas)]
    for k in range(1, harmonics + 1):
        cols.append(np.cos(k * thetas))
    for k in range(1, harmonics + 1):
        cols.append(np.sin(k * thetas))
    return np.column_stack(cols)


def fit_fourier_series(
    thetas: np.ndarray, values: np.ndarray, harmonics: int, outcome: str
) -> FourierFit:
    """Ordinary least squares on the basis {1, cos k*t, sin k*t}."""
    design = _design_matrix(np.asarray(thetas, dtype=float), harmonics)
    coef, _, rank, _ = np.linalg.lstsq(design, np.asarray(values, float), rcond=None)
    if rank < design.shape[1]:
        raise DegenerateFitError(
            f"design matrix rank {rank} < {design.shape[1]}; need more phases"
        )
    resid = values - design @ coef
    a = np.concatenate([[coef[0]], coef[1 : harmonics + 1]])
    b = np.concatenate([[0.0], coef[harmonics + 1 :]])
    return FourierFit(
        outcome=outcome, a=a, b=b, residual=float(np.sqrt(np.mean(resid**2)))
    )


def sweep_witness_estimates(
    povm: Povm, cfg: DetectionConfig, threads: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Draw the phase sample and estimate the witness at each phase.

    Returns (thetas, estimates) with estimates of shape (k, 2**n).  Phase
    points are independent work items; with ``threads`` > 1 they are
    evaluated concurrently on dedicated RNG substreams, so results are
    bit-identical to sequential execution.
    """
    root = SeededRng(cfg.seed)
    thetas = root.substream("thetas").generator().uniform(0.0, 2 * np.pi, cfg.k)

    def one_theta(k: int) -> np.ndarray:
        if cfg.analytic:
            return exact_witness_values(povm, thetas[k])
        return estimate_witness_at(
            povm, thetas[k], cfg.shots, root.substream(f"theta/{k}")
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one_theta, range(cfg.k)))
    else:
        rows = [one_theta(k) for k in range(cfg.k)]
    return thetas, np.stack(rows)


def run_detection(
    povm: Povm, cfg: DetectionConfig, threads: int = 1
) -> list[FourierFit]:
    """Full detection pass: sweep phases, estimate, fit one series per outcome."""
    harmonics = cfg.resolved_harmonics(povm.n)
    thetas, estimates = sweep_witness_estimates(povm, cfg, threads)
    return [
        fit_fourier_series(thetas, estimates[:, i], harmonics, outcome)
        for i, outcome in enumerate(povm.outcomes())
    ]
