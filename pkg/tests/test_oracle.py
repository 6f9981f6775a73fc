from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from magic_mps.circuits import LOCAL_STATES, t_doped_circuit, run_circuit
from magic_mps.exceptions import GroupStructureError
from magic_mps.ground_states import SpinChainModel
from magic_mps.mps import ghz_state, random_mps
from magic_mps.oracle import (
    DenseState,
    PauliSpectrum,
    exact_bell_magic,
    exact_bell_magic_literal,
    exact_ground_energy,
    exact_magic_gap,
    exact_nullity,
    exact_pauli_spectrum,
    exact_sre,
    ising_free_fermion_energy,
)
from magic_mps.paulis import PauliString
from tests.support import cluster_state, spectrum_of, t_product

H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])


def t_spectrum() -> PauliSpectrum:
    return exact_pauli_spectrum(DenseState(LOCAL_STATES["t"]))


def test_single_qubit_spectra() -> None:
    zero = exact_pauli_spectrum(DenseState.from_labels("0"))
    t_state = t_spectrum()

    np.testing.assert_allclose(zero.xi, [0.5, 0.0, 0.5, 0.0], atol=1e-15)
    np.testing.assert_allclose(t_state.xi, [0.5, 0.25, 0.0, 0.25], atol=1e-15)
    assert t_state.expectation(PauliString.from_label("Y")) == pytest.approx(
        1 / math.sqrt(2)
    )


def test_bell_pair_spectrum() -> None:
    state = DenseState.from_labels("00").apply(H, (0,)).apply(CNOT, (0, 1))

    spectrum = exact_pauli_spectrum(state)

    support = {
        PauliString.from_code_index(int(code), 2).label
        for code in np.flatnonzero(spectrum.xi > 1e-12)
    }
    assert support == {"II", "XX", "ZZ", "YY"}
    assert spectrum.expectation(PauliString.from_label("YY")) == pytest.approx(-1.0)
    assert spectrum.purity == pytest.approx(1.0)


def test_spectrum_matches_direct_expectations() -> None:
    state = DenseState.from_mps(random_mps(3, 2, rng_seed=4))

    spectrum = exact_pauli_spectrum(state)

    for code in range(64):
        pauli = PauliString.from_code_index(code, 3)
        assert spectrum.expectation(pauli) == pytest.approx(
            state.expectation(pauli), abs=1e-12
        )


def test_exact_sre_of_t_state() -> None:
    spectrum = t_spectrum()

    assert exact_sre(spectrum, 2) == pytest.approx(math.log2(4.0 / 3.0))
    assert exact_sre(spectrum, 1) == pytest.approx(0.5)
    assert exact_sre(spectrum, 0) == pytest.approx(math.log2(3.0) - 1.0)


def test_exact_sre_vanishes_on_stabilizer_states() -> None:
    for state in (cluster_state(4), DenseState.from_mps(ghz_state(3))):
        spectrum = exact_pauli_spectrum(state)
        for index in (0, 1, 2, 3):
            assert exact_sre(spectrum, index) == pytest.approx(0.0, abs=1e-10)


def test_exact_sre_does_not_increase_with_index() -> None:
    spectrum = spectrum_of(random_mps(4, 4, rng_seed=1))

    values = [exact_sre(spectrum, index) for index in (0, 1, 2, 3, 4)]

    assert all(later <= earlier + 1e-12 for earlier, later in zip(values, values[1:]))


def test_replica_limit_approaches_nullity() -> None:
    spectrum = spectrum_of(t_product(2, zeros=1))

    assert 63 * exact_sre(spectrum, 64) == pytest.approx(2.0, abs=1e-6)


def test_exact_bell_magic_of_t_state() -> None:
    value, additive = exact_bell_magic(t_spectrum())

    assert value == pytest.approx(0.5)
    assert additive == pytest.approx(1.0)
    assert exact_bell_magic(spectrum_of(t_product(2, zeros=1)))[1] == pytest.approx(
        2.0
    )


@pytest.mark.parametrize("qubits", [2, 3])
def test_literal_bell_sum_matches_convolution(qubits: int) -> None:
    spectrum = spectrum_of(random_mps(qubits, 4, rng_seed=qubits))

    literal = exact_bell_magic_literal(spectrum)
    convolved = exact_bell_magic(spectrum)

    assert literal == pytest.approx(convolved, abs=1e-10)


def test_bell_magic_limits() -> None:
    large = spectrum_of(random_mps(7, 2, rng_seed=0))
    with pytest.raises(ValueError):
        exact_bell_magic(large)
    with pytest.raises(ValueError):
        exact_bell_magic_literal(spectrum_of(random_mps(4, 2, rng_seed=0)))


def test_exact_nullity_of_basis_state() -> None:
    nu, generators = exact_nullity(exact_pauli_spectrum(DenseState.from_labels("000")))

    assert nu == 0
    assert len(generators) == 3
    assert all(generator.sign == 1 for generator in generators)
    assert {generator.label.replace("I", "") for generator in generators} <= {
        "Z",
        "ZZ",
        "ZZZ",
    }


def test_exact_nullity_of_t_doped_clifford_state() -> None:
    state = run_circuit(t_doped_circuit(8, 2, 4, seed=3))

    nu, generators = exact_nullity(spectrum_of(state))

    assert nu == 2
    assert len(generators) == 6
    assert exact_nullity(spectrum_of(t_product(1, zeros=1)))[0] == 1


def test_exact_nullity_rejects_non_group_support() -> None:
    broken = PauliSpectrum(1, np.array([1.0, 1.0, 1.0, 0.0]))

    with pytest.raises(GroupStructureError):
        exact_nullity(broken)


def test_exact_magic_gap() -> None:
    gap, stabilizer_state = exact_magic_gap(t_spectrum())
    assert gap == pytest.approx(1 - 1 / math.sqrt(2))
    assert not stabilizer_state
    assert exact_magic_gap(exact_pauli_spectrum(cluster_state(3))) == (1.0, True)


def test_dense_state_validation() -> None:
    with pytest.raises(ValueError):
        DenseState(np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        DenseState(np.array([1.0, 0.0, 0.0]))
    too_large = np.zeros(2**15)
    too_large[0] = 1.0
    with pytest.raises(ValueError):
        DenseState(too_large)
    with pytest.raises(ValueError):
        DenseState.from_labels("0x")


def test_spectrum_csv_has_one_row_per_code(tmp_path: Path) -> None:
    target = t_spectrum().to_csv(tmp_path / "spectrum.csv")

    lines = target.read_text().splitlines()

    assert lines[0] == "code,pauli,expectation,xi"
    assert len(lines) == 5
    assert lines[2].startswith("1,X,")


def test_ising_free_fermion_energy() -> None:
    assert ising_free_fermion_energy(8, 0.0) == pytest.approx(-7.0)
    assert ising_free_fermion_energy(1, 0.3) == pytest.approx(-0.3)
    assert ising_free_fermion_energy(8, 1.0) == pytest.approx(
        exact_ground_energy(SpinChainModel.ising(8, 1.0)), abs=1e-9
    )
    assert ising_free_fermion_energy(4, 100.0) / -400.0 == pytest.approx(1.0, rel=1e-3)


def test_exact_ground_energy_small_chain() -> None:
    # two sites: lowest of -XX - YY - delta ZZ is delta - 2 with zero magnetization
    assert exact_ground_energy(SpinChainModel.xxz(2, 0.9)) == pytest.approx(-1.1)
