"""Classical readout-error mitigation: calibration plus three correctors.

Once quantum noise is eliminated, the remaining device is described by a
column-stochastic calibration matrix A with A[x, y] = P(outcome x | basis
input y).  Measured distributions are corrected by direct inversion, by
least squares constrained to the probability simplex, or by iterative
Bayesian unfolding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .noisemodel import Histogram, ProbVector, SeededRng, born_probabilities, sample_histogram
from .povm import Povm
from .qcore import basis_state


class SingularCalibrationError(ValueError):
    """Calibration matrix cannot be inverted."""


class DegenerateCalibrationError(ValueError):
    """Unfolding hit a zero predicted probability with observed counts."""


class NonConvergenceError(RuntimeError):
    """Constrained solver failed to converge; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class CalibrationMatrix:
    """Column-stochastic confusion matrix of a classical device."""

    n: int
    matrix: np.ndarray

    def __post_init__(self):
        d = 2**self.n
        a = np.array(self.matrix, dtype=float)
        if a.shape != (d, d):
            raise ValueError(f"expected {d}x{d} matrix, got {a.shape}")
        if a.min() < -1e-9 or a.max() > 1 + 1e-9:
            raise ValueError("entries must lie in [0, 1]")
        if np.abs(a.sum(axis=0) - 1.0).max() > 1e-9:
            raise ValueError("columns must sum to 1")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix))

    def to_json(self) -> str:
        return json.dumps(
            {"n": self.n, "A": [float(v) for v in self.matrix.ravel()]}
        )

    @classmethod
    def from_json(cls, text: str) -> "CalibrationMatrix":
        payload = json.loads(text)
        n = int(payload["n"])
        d = 2**n
        return cls(n, np.array(payload["A"], dtype=float).reshape(d, d))


def calibrate(
    povm: Povm, shots: int | None = None, rng: SeededRng | None = None
) -> CalibrationMatrix:
    """Learn the confusion matrix by preparing every basis state.

    Analytic mode (shots=None) reads A[x, y] = <y|Pi_x|y> directly; shot
    mode records empirical outcome frequencies per basis input.
    """
    d = povm.dim
    a = np.zeros((d, d))
    for y in range(d):
        p = born_probabilities(povm, basis_state(y, povm.n))
        if shots is None:
            a[:, y] = p.p
        else:
            if rng is None:
                raise ValueError("shot-mode calibration needs an rng")
            hist = sample_histogram(p, shots, rng.substream(f"basis/{y}"))
            a[:, y] = hist.counts / shots
    return CalibrationMatrix(povm.n, a)


def _as_probs(p) -> np.ndarray:
    if isinstance(p, ProbVector):
        return np.asarray(p.p, dtype=float)
    if isinstance(p, Histogram):
        return p.counts / p.shots
    return np.asarray(p, dtype=float)


def mitigate_inverse(a: CalibrationMatrix, p) -> np.ndarray:
    """Correct by direct inversion: q = A^{-1} p.

    The output sums to 1 but can carry negative entries; it is returned
    unclamped so downstream consumers can see them.  Check
    ``a.condition_number`` when the device is nearly singular.
    """
    vec = _as_probs(p)
    try:
        inv = np.linalg.inv(a.matrix)
    except np.linalg.LinAlgError as exc:
        raise SingularCalibrationError(str(exc)) from exc
    return inv @ vec


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u + (1.0 - css) / np.arange(1, len(v) + 1) > 0)[0][-1]
    lam = (1.0 - css[rho]) / (rho + 1.0)
    return np.maximum(v + lam, 0.0)


def mitigate_least_squares(
    a: CalibrationMatrix, p, max_iters: int = 10000, tol: float = 1e-10
) -> ProbVector:
    """argmin over the simplex of ||A q - p||_2 by projected gradient.

    Deterministic: uniform start, fixed step 1 / ||A^T A||_2, stops when the
    L1 change drops below tol.  Raises NonConvergenceError (with the last
    residual attached) if the iteration cap is hit first.
    """
    vec = _as_probs(p)
    mat = a.matrix
    gram = mat.T @ mat
    step = 1.0 / np.linalg.norm(gram, 2)
    atp = mat.T @ vec
    q = np.full(len(vec), 1.0 / len(vec))
    for _ in range(max_iters):
        q_next = project_to_simplex(q - step * (gram @ q - atp))
        if np.abs(q_next - q).sum() < tol:
            return ProbVector(a.n, q_next)
        q = q_next
    raise NonConvergenceError(
        f"projected gradient did not converge in {max_iters} iterations",
        residual=float(np.linalg.norm(mat @ q - vec)),
    )


def mitigate_ibu(
    a: CalibrationMatrix, p, iters: int = 100, tol: float = 1e-8,
    init=None,
) -> ProbVector:
    """Iterative Bayesian unfolding from a uniform prior.

    Multiplicative fixed-point update
    t_y <- t_y * sum_x A[x, y] p_x / (A t)_x, stopped at ``iters`` rounds
    or when the L1 change drops below tol.  Output lies on the simplex.
    ``init`` overrides the uniform starting prior.
    """
    if iters < 1:
        raise ValueError("iters must be positive")
    vec = _as_probs(p)
    mat = a.matrix
    if init is None:
        t = np.full(len(vec), 1.0 / len(vec))
    else:
        t = _as_probs(init).copy()
    for _ in range(iters):
        pred = mat @ t
        dead = pred <= 0
        if np.any(dead & (vec > 0)):
            raise DegenerateCalibrationError(
                "calibration predicts zero probability for an observed outcome"
            )
        ratio = np.divide(vec, pred, out=np.zeros_like(vec), where=~dead)
        t_next = t * (mat.T @ ratio)
        total = t_next.sum()
        if total <= 0:
            raise DegenerateCalibrationError("unfolding collapsed to zero mass")
        t_next /= total
        if np.abs(t_next - t).sum() < tol:
            return ProbVector(a.n, t_next)
        t = t_next
    return ProbVector(a.n, t)
