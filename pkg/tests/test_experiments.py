import numpy as np
import pytest

from mnlab.eliminate import TwirlMethod
from mnlab.experiments import (
    MERMIN_TERMS,
    Hamiltonian,
    OptimizerConfig,
    Pipeline,
    PipelineRunner,
    ansatz_state,
    ansatz_vector,
    basis_change,
    ghz_parity_oracle,
    h2_hamiltonian,
    mermin_oracle,
    parity_signs,
    pauli_expectation,
    run_ghz_parity,
    run_mermin,
    run_vqe,
    transformed_hamiltonian,
    u_phi_gate,
    _rotosolve_update,
)
from mnlab.noisemodel import SeededRng, ideal_measurement, ry_measurement
from mnlab.qcore import (
    basis_state,
    ghz_state,
    is_unitary,
    kron_all,
    mermin_state,
    pauli_operator,
    plus_theta_state,
    ry_gate,
)

ANGLE = np.pi / 40
ANALYTIC = Pipeline(analytic=True)


# --- Hamiltonian ---

def test_h2_term_count_and_identity_coefficient():
    ham = h2_hamiltonian()
    assert len(ham.terms) == 15
    identity = [c for c, p in ham.terms if p == "IIII"]
    assert identity == [-0.097066]


def test_h2_ground_energy():
    assert h2_hamiltonian().ground_energy() == pytest.approx(-1.137, abs=5e-4)


def test_hamiltonian_matrix_is_hermitian():
    m = h2_hamiltonian().to_matrix()
    assert np.abs(m - m.conj().T).max() < 1e-12


def test_hamiltonian_validation():
    with pytest.raises(ValueError):
        Hamiltonian(2, ((1.0, "XYZ"),))


# --- observables and basis changes ---

def test_basis_change_diagonalizes():
    rng = np.random.default_rng(51)
    for _ in range(10):
        n = int(rng.integers(1, 4))
        obs = "".join(rng.choice(list("IXYZ"), n))
        q = basis_change(obs)
        assert is_unitary(q)
        rotated = q @ pauli_operator(obs) @ q.conj().T
        off = rotated - np.diag(np.diag(rotated))
        assert np.abs(off).max() < 1e-12
        assert np.abs(np.diag(rotated).real - parity_signs(obs, n)).max() < 1e-12


def test_pauli_expectation_eigenstates():
    ideal = ideal_measurement(1)
    assert pauli_expectation(ideal, plus_theta_state(0.0, 1), "X") == pytest.approx(
        1.0, abs=1e-12
    )
    assert pauli_expectation(ideal, basis_state(0, 1), "Z") == pytest.approx(
        1.0, abs=1e-12
    )
    assert pauli_expectation(ideal, basis_state(0, 1), "I") == 1.0


def test_pauli_expectation_matches_dense_oracle():
    ideal = ideal_measurement(4)
    rho = mermin_state()
    runner = PipelineRunner(ideal, ANALYTIC)
    for obs, _ in MERMIN_TERMS:
        dense = np.einsum("ij,ji->", pauli_operator(obs), rho.matrix).real
        assert runner.expectation(rho, obs) == pytest.approx(dense, abs=1e-10)


def test_pauli_expectation_identity_padding():
    # terms with identity letters marginalize correctly
    ideal = ideal_measurement(4)
    rho = ghz_state(4)
    for obs in ("ZIII", "ZZII", "IZIZ"):
        dense = np.einsum("ij,ji->", pauli_operator(obs), rho.matrix).real
        assert pauli_expectation(ideal, rho, obs) == pytest.approx(dense, abs=1e-12)


# --- Mermin ---

def test_mermin_oracle_value():
    assert mermin_oracle() == pytest.approx(8 * np.sqrt(2), abs=1e-9)


def test_mermin_ideal_analytic():
    res = run_mermin(ideal_measurement(4), ANALYTIC, repeats=5, seed=0)
    assert res.mean == pytest.approx(8 * np.sqrt(2), abs=1e-9)
    assert res.stderr == 0.0


def test_mermin_raw_analytic_closed_form():
    # per-qubit effective observables X -> cX - sZ, Y -> cY - sZ give
    # cos(2a)^4 * 8 sqrt(2) + (sum of term signs) * sin(2a)^4 on this state
    res = run_mermin(ry_measurement(4, ANGLE), ANALYTIC, repeats=1, seed=0)
    c2, s2 = np.cos(2 * ANGLE), np.sin(2 * ANGLE)
    sign_sum = sum(sign for _, sign in MERMIN_TERMS)
    expected = c2**4 * 8 * np.sqrt(2) + sign_sum * s2**4
    assert res.mean == pytest.approx(expected, abs=1e-9)
    assert res.mean == pytest.approx(10.775, abs=0.05)


def test_mermin_raw_inverse_analytic_closed_form():
    res = run_mermin(
        ry_measurement(4, ANGLE), Pipeline(analytic=True, mitigator="inverse"),
        repeats=1, seed=0,
    )
    t = np.tan(2 * ANGLE)
    sign_sum = sum(sign for _, sign in MERMIN_TERMS)
    expected = 8 * np.sqrt(2) + sign_sum * t**4
    assert res.mean == pytest.approx(expected, abs=1e-9)


def test_mermin_eliminated_mitigated_analytic():
    for method in TwirlMethod:
        pipe = Pipeline(analytic=True, method=method, mitigator="lsq")
        res = run_mermin(ry_measurement(4, ANGLE), pipe, repeats=1, seed=0)
        assert res.mean == pytest.approx(8 * np.sqrt(2), abs=1e-6)


def test_mermin_mitigators_statistically_consistent():
    povm = ry_measurement(4, ANGLE)
    results = {}
    for mit in ("inverse", "lsq", "ibu"):
        pipe = Pipeline(shots=2**13, method=TwirlMethod.IZ, mitigator=mit)
        results[mit] = run_mermin(povm, pipe, repeats=30, seed=11)
    pairs = [("inverse", "lsq"), ("inverse", "ibu"), ("lsq", "ibu")]
    for a, b in pairs:
        gap = abs(results[a].mean - results[b].mean)
        combined = np.hypot(results[a].stderr, results[b].stderr)
        assert gap < 4 * combined + 1e-4


def test_mermin_shot_determinism():
    povm = ry_measurement(4, ANGLE)
    pipe = Pipeline(shots=512)
    a = run_mermin(povm, pipe, repeats=3, seed=7)
    b = run_mermin(povm, pipe, repeats=3, seed=7)
    assert np.array_equal(a.values, b.values)


# --- GHZ parity ---

def test_u_phi_gate_properties():
    rng = np.random.default_rng(52)
    x, y, z = (pauli_operator(c) for c in "XYZ")
    for phi in rng.uniform(0, 2 * np.pi, 5):
        u = u_phi_gate(phi)
        assert is_unitary(u)
        effective = u.conj().T @ z @ u
        expected = np.sin(phi) * x - np.cos(phi) * y
        assert np.abs(effective - expected).max() < 1e-12


def test_ghz_oracle_is_cos_4phi():
    phis = np.linspace(0, 2 * np.pi, 17)
    assert np.abs(ghz_parity_oracle(phis) - np.cos(4 * phis)).max() < 1e-10


def test_ghz_ideal_analytic_matches_oracle():
    phis = np.linspace(0, 2 * np.pi, 9, endpoint=False)
    res = run_ghz_parity(ideal_measurement(4), phis, ANALYTIC, seed=0)
    assert np.abs(res.means - ghz_parity_oracle(phis)).max() < 1e-10


def test_ghz_raw_gap_and_mitigated_recovery():
    phis = np.linspace(0, 2 * np.pi, 20, endpoint=False)
    ideal = ghz_parity_oracle(phis)
    povm = ry_measurement(4, ANGLE)
    raw = run_ghz_parity(povm, phis, ANALYTIC, seed=0)
    gaps = np.abs(raw.means - ideal)
    assert (gaps > 0.02).sum() > 10
    for method in TwirlMethod:
        pipe = Pipeline(analytic=True, method=method, mitigator="lsq")
        cured = run_ghz_parity(povm, phis, pipe, seed=0)
        assert np.abs(cured.means - ideal).max() < 0.02


# --- transformed Hamiltonian ---

def test_transformed_hamiltonian_identity_gate():
    ham = h2_hamiltonian()
    m = transformed_hamiltonian(ham, np.eye(16, dtype=complex))
    assert np.abs(m - ham.to_matrix()).max() < 1e-10


def test_transformed_hamiltonian_ry_ground_energy():
    ham = h2_hamiltonian()
    noise = kron_all([ry_gate(ANGLE)] * 4)
    m = transformed_hamiltonian(ham, noise)
    assert np.abs(m - m.conj().T).max() < 1e-12
    assert np.linalg.eigvalsh(m)[0] == pytest.approx(-1.135, abs=1e-3)


def test_transformed_hamiltonian_letter_map_oracle():
    # independent route: map each letter X -> cX - sZ, Y -> cY - sZ, Z -> cZ - sX
    ham = h2_hamiltonian()
    noise = kron_all([ry_gate(ANGLE)] * 4)
    c2, s2 = np.cos(2 * ANGLE), np.sin(2 * ANGLE)
    x, y, z = (pauli_operator(c) for c in "XYZ")
    eff = {
        "I": np.eye(2, dtype=complex),
        "X": c2 * x - s2 * z,
        "Y": c2 * y - s2 * z,
        "Z": c2 * z - s2 * x,
    }
    oracle = sum(
        coeff * kron_all([eff[ch] for ch in pstr]) for coeff, pstr in ham.terms
    )
    assert np.abs(transformed_hamiltonian(ham, noise) - oracle).max() < 1e-10


# --- VQE ---

def test_ansatz_vector_normalized_and_shape_checked():
    thetas = np.random.default_rng(53).uniform(0, 2 * np.pi, (6, 4))
    psi = ansatz_vector(thetas)
    assert abs(np.linalg.norm(psi) - 1) < 1e-12
    assert ansatz_state(thetas).purity() == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        ansatz_vector(np.zeros((6, 3)))


def test_rotosolve_update_finds_sinusoid_minimum():
    rng = np.random.default_rng(54)
    for _ in range(20):
        a, b, c = rng.normal(), rng.uniform(0.1, 2.0), rng.uniform(0, 2 * np.pi)
        f = lambda t: a + b * np.cos(t - c)
        t0 = rng.uniform(0, 2 * np.pi)
        t_star = _rotosolve_update(f(t0), f(t0 + np.pi / 2), f(t0 - np.pi / 2), t0)
        assert f(t_star) == pytest.approx(a - b, abs=1e-12)


def test_vqe_cost_is_sinusoidal_per_parameter():
    # three-point analytic minimization is exact when each section is
    # a + b cos(theta - c); verify on ideal, raw, and inverse-mitigated costs
    from mnlab.experiments import _CostEvaluator

    ham = h2_hamiltonian()
    rng = np.random.default_rng(55)
    thetas = rng.uniform(0, 2 * np.pi, (6, 4))
    grid = np.linspace(0, 2 * np.pi, 9, endpoint=False)
    pipelines = [
        (ideal_measurement(4), ANALYTIC),
        (ry_measurement(4, ANGLE), ANALYTIC),
        (ry_measurement(4, ANGLE), Pipeline(analytic=True, mitigator="inverse")),
    ]
    for povm, pipe in pipelines:
        ev = _CostEvaluator(povm, ham, pipe, SeededRng(0))
        layer, qubit = 2, 1
        values = []
        for t in grid:
            thetas[layer, qubit] = t
            values.append(ev.cost(thetas))
        design = np.column_stack([np.ones_like(grid), np.cos(grid), np.sin(grid)])
        coef, *_ = np.linalg.lstsq(design, np.array(values), rcond=None)
        resid = np.abs(design @ coef - values).max()
        assert resid < 1e-9


def test_vqe_ideal_converges():
    result = run_vqe(
        ideal_measurement(4),
        h2_hamiltonian(),
        ANALYTIC,
        OptimizerConfig(sweeps=100),
        seed=5,
    )
    assert result.final_energy == pytest.approx(-1.137, abs=2e-3)
    assert result.trace[0][0] == 0
    energies = [e for _, e in result.trace]
    assert all(b - a < 1e-9 for a, b in zip(energies, energies[1:]))  # descends


def test_vqe_deterministic():
    a = run_vqe(ideal_measurement(4), h2_hamiltonian(), ANALYTIC,
                OptimizerConfig(sweeps=3), seed=9)
    b = run_vqe(ideal_measurement(4), h2_hamiltonian(), ANALYTIC,
                OptimizerConfig(sweeps=3), seed=9)
    assert a.trace == b.trace
    c = run_vqe(ideal_measurement(4), h2_hamiltonian(), ANALYTIC,
                OptimizerConfig(sweeps=3), seed=9, restart=1)
    assert a.trace != c.trace


def test_vqe_general_path_matches_fast_path():
    # the per-term runner route and the precomputed analytic route agree
    from mnlab.experiments import _CostEvaluator

    ham = h2_hamiltonian()
    povm = ry_measurement(4, ANGLE)
    rng = np.random.default_rng(56)
    thetas = rng.uniform(0, 2 * np.pi, (6, 4))
    fast = _CostEvaluator(povm, ham, ANALYTIC, SeededRng(0))
    assert fast.fast
    state = ansatz_state(thetas)
    runner = PipelineRunner(povm, ANALYTIC)
    slow_total = sum(c for c, p in ham.terms if set(p) == {"I"})
    for coeff, pstr in ham.terms:
        if set(pstr) != {"I"}:
            slow_total += coeff * runner.expectation(state, pstr)
    assert fast.cost(thetas) == pytest.approx(slow_total, abs=1e-10)
