import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qising.lattice import build_lattice
from qising.operators import HamiltonianSpec, PauliTerm, build_hamiltonian_dense
from qising.states import (
    KernelError,
    RngStream,
    StateVector,
    draw_amplitudes,
    energy_from_moments,
    expectation_energy,
    expectation_pauli,
    magnetization,
    make_stream_id,
    probabilities,
    random_state,
    split_stream_id,
    x_expectations_batch,
    z_moments,
)
from qising import states as states_mod

BELL = StateVector.from_amplitudes([1, 0, 0, 1])


def plus_state(n):
    return StateVector.from_amplitudes(np.ones(1 << n))


def test_random_state_normalized_and_deterministic():
    s = RngStream(123, make_stream_id(3, 17))
    a, b = random_state(6, s), random_state(6, s)
    assert abs(np.vdot(a.amplitudes, a.amplitudes).real - 1) < 1e-12
    assert a.amplitudes.tobytes() == b.amplitudes.tobytes()
    c = random_state(6, RngStream(123, make_stream_id(3, 18)))
    assert not np.array_equal(a.amplitudes, c.amplitudes)


def test_stream_id_packing():
    sid = make_stream_id(16, 4999)
    assert split_stream_id(sid) == (16, 4999)
    with pytest.raises(ValueError):
        RngStream(-1, 0)


def test_product_random_mode_is_unentangled():
    from qising.entanglement import half_split_entropy

    psi = random_state(6, RngStream(9, 1), mode="product-random")
    assert half_split_entropy(psi) == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(ValueError):
        random_state(2, RngStream(9, 1), mode="thermal")


def test_haar_z_mean_is_zero():
    n, count = 4, 100_000
    z0 = np.empty(count)
    buf = np.empty((1, 1 << n), dtype=complex)
    for k in range(count):
        draw_amplitudes(n, RngStream(5, k), out=buf[0])
        z0[k] = magnetization(buf[0])[1][0]
    se = z0.std(ddof=1) / np.sqrt(count)
    assert abs(z0.mean()) < 4 * se


def test_expectation_examples():
    lat = build_lattice(2, 2)
    up = StateVector.basis(4, 0)
    assert expectation_energy(up, HamiltonianSpec(lat, 1.0, 0.0)) == -8.0
    assert expectation_energy(plus_state(4), HamiltonianSpec(lat, 0.37, 1.0)) == pytest.approx(-4.0, abs=1e-12)
    assert expectation_pauli(up, PauliTerm.z(0)) == 1.0
    assert expectation_pauli(BELL, PauliTerm.zz(0, 1)) == pytest.approx(1.0)
    assert expectation_pauli(BELL, PauliTerm.z(0)) == pytest.approx(0.0, abs=1e-15)


def test_magnetization_examples():
    assert magnetization(StateVector.basis(4, [0, 0, 0, 0]))[0] == 1.0
    assert magnetization(StateVector.basis(4, [1, 1, 1, 1]))[0] == -1.0
    m, z = magnetization(StateVector.basis(4, [0, 1, 0, 1]))
    assert m == 0.0
    np.testing.assert_array_equal(z, [1, -1, 1, -1])


@pytest.mark.parametrize("shape", [(1, 2), (2, 2), (2, 3)])
def test_energy_matches_dense_quadratic_form(shape):
    spec = HamiltonianSpec(build_lattice(*shape), 1.0, 1.3)
    H = build_hamiltonian_dense(spec)
    for k in range(10):
        psi = random_state(spec.n_sites, RngStream(1, k))
        expected = np.vdot(psi.amplitudes, H @ psi.amplitudes).real
        assert expectation_energy(psi, spec) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("n, shape", [(2, (1, 2)), (4, (2, 2)), (6, (2, 3)), (8, (2, 4))])
def test_batch_kernels_match_single_state_paths(n, shape):
    spec = HamiltonianSpec(build_lattice(*shape), 0.8, 1.9)
    amps = np.stack([draw_amplitudes(n, RngStream(2, k)) for k in range(7)])
    z, zz = z_moments(probabilities(amps), n)
    x = x_expectations_batch(amps, n)
    energy = energy_from_moments(spec, zz, x)
    for b in range(len(amps)):
        psi = amps[b]
        assert energy[b] == pytest.approx(expectation_energy(psi, spec), abs=1e-10)
        for i in range(n):
            assert z[b, i] == pytest.approx(expectation_pauli(psi, PauliTerm.z(i)), abs=1e-12)
            assert x[b, i] == pytest.approx(expectation_pauli(psi, PauliTerm.x(i)), abs=1e-12)
            for j in range(i + 1, n):
                assert zz[b, i, j] == pytest.approx(expectation_pauli(psi, PauliTerm.zz(i, j)), abs=1e-12)
                assert zz[b, j, i] == zz[b, i, j]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**32), st.floats(0, 2 * np.pi))
def test_bounds_and_phase_invariance(n, seed, phase):
    psi = random_state(n, RngStream(seed, 0))
    m, z = magnetization(psi)
    assert np.all(np.abs(z) <= 1 + 1e-12) and abs(m) <= 1 + 1e-12
    rotated = psi.amplitudes * np.exp(1j * phase)
    assert magnetization(rotated)[0] == pytest.approx(m, abs=1e-12)
    if n >= 2:
        spec = HamiltonianSpec(build_lattice(1, n), 1.0, 0.6)
        assert expectation_energy(rotated, spec) == pytest.approx(expectation_energy(psi, spec), abs=1e-12)


def test_haar_variance_formula_by_dense_monte_carlo():
    # Independent oracle: plain numpy Gaussians and the dense quadratic form.
    rng = np.random.default_rng(2024)
    spec = HamiltonianSpec(build_lattice(2, 2), 1.0, 1.0)
    H = build_hamiltonian_dense(spec)
    count = 40_000
    psi = rng.standard_normal((count, 16)) + 1j * rng.standard_normal((count, 16))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    energies = np.einsum("bi,ij,bj->b", psi.conj(), H, psi).real
    assert energies.var(ddof=1) == pytest.approx(20 / 17, rel=0.05)
    assert spec.haar_energy_variance() == pytest.approx(20 / 17)


def test_haar_energy_mean_within_bound():
    spec = HamiltonianSpec(build_lattice(2, 2), 1.0, 2.0)
    count = 20_000
    amps = np.stack([draw_amplitudes(4, RngStream(77, k)) for k in range(count)])
    z, zz = z_moments(probabilities(amps), 4)
    e = energy_from_moments(spec, zz, x_expectations_batch(amps, 4))
    assert abs(e.mean()) <= 4 * np.sqrt(spec.haar_energy_variance() / count)


def test_imaginary_residue_aborts(monkeypatch):
    monkeypatch.setattr(states_mod, "apply_pauli_string", lambda psi, term: 1j * np.asarray(psi))
    with pytest.raises(KernelError):
        expectation_pauli(BELL, PauliTerm.z(0))


def test_state_vector_validation():
    with pytest.raises(ValueError):
        StateVector(2, np.ones(4))
    with pytest.raises(ValueError):
        StateVector(2, np.ones(3) / np.sqrt(3))
    assert len(StateVector.product([[1, 0], [1, 1]])) == 4
