from __future__ import annotations

from collections.abc import Callable, Iterable

import numpy as np
import pytest

from magic_mps.ground_states import (
    DmrgConfig,
    SpinChainModel,
    SweepPoint,
    dmrg_ground_state,
    finite_difference,
    hamiltonian_mpo,
    parse_grid,
    sre_sweep,
)
from magic_mps.mps import mpo_expectation
from magic_mps.oracle import (
    DenseState,
    dense_hamiltonian,
    exact_ground_energy,
    exact_pauli_spectrum,
    exact_sre,
    ising_free_fermion_energy,
)


@pytest.mark.parametrize(
    "model",
    [SpinChainModel.ising(4, 0.7), SpinChainModel.xxz(4, -0.4)],
)
def test_hamiltonian_mpo_matches_dense_operator(model: SpinChainModel) -> None:
    np.testing.assert_allclose(
        hamiltonian_mpo(model).to_dense(),
        dense_hamiltonian(model).toarray(),
        atol=1e-12,
    )


def test_model_validation() -> None:
    with pytest.raises(ValueError):
        SpinChainModel("heisenberg", 4, 1.0)
    with pytest.raises(ValueError):
        SpinChainModel.ising(1, 1.0)
    with pytest.raises(ValueError):
        DmrgConfig(max_chi=0)


@pytest.mark.parametrize("h", [0.5, 1.0, 1.5])
def test_dmrg_reproduces_free_fermion_energy(h: float) -> None:
    result = dmrg_ground_state(SpinChainModel.ising(8, h), DmrgConfig(max_chi=16))

    assert result.converged
    assert result.energy == pytest.approx(ising_free_fermion_energy(8, h), abs=1e-8)
    assert result.max_bond <= 16


def test_dmrg_energy_matches_state_expectation() -> None:
    model = SpinChainModel.xxz(6, 0.5)

    result = dmrg_ground_state(model, DmrgConfig(max_chi=8))

    assert result.energy == pytest.approx(exact_ground_energy(model), abs=1e-8)
    measured = mpo_expectation(hamiltonian_mpo(model), result.state)
    assert measured.real == pytest.approx(result.energy, abs=1e-8)
    assert result.state.norm() == pytest.approx(1.0)


def test_bond_cap_is_reported() -> None:
    result = dmrg_ground_state(SpinChainModel.ising(8, 1.0), DmrgConfig(max_chi=2))

    assert result.max_bond == 2
    assert result.truncation_error > 0
    assert result.energy > ising_free_fermion_energy(8, 1.0)


def test_first_derivative_of_a_quadratic() -> None:
    x = np.linspace(0.0, 1.0, 11)

    table = finite_difference(x, x**2)

    np.testing.assert_allclose(table.derivative, 2 * x, atol=1e-12)
    assert table.spacing == pytest.approx(0.1)
    assert table.order == 1


def test_second_derivative_of_a_cubic() -> None:
    x = np.linspace(-1.0, 1.0, 9)

    table = finite_difference(x, x**3 + x**2, order=2)

    np.testing.assert_allclose(table.derivative, 6 * x + 2, atol=1e-9)


def test_finite_difference_rejects_bad_grids() -> None:
    with pytest.raises(ValueError, match="uniform"):
        finite_difference([0.0, 0.1, 0.3], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="at least 4"):
        finite_difference([0.0, 0.1, 0.2], [1.0, 2.0, 3.0], order=2)
    with pytest.raises(ValueError, match="order"):
        finite_difference([0.0, 0.1, 0.2], [1.0, 2.0, 3.0], order=3)
    with pytest.raises(ValueError, match="equal-length"):
        finite_difference([0.0, 0.1, 0.2], [1.0, 2.0])


def test_parse_grid() -> None:
    assert parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_grid("0.1:0.3:0.1") == [0.1, 0.2, 0.3]
    assert parse_grid("0.5, 1.0,1.5") == [0.5, 1.0, 1.5]
    with pytest.raises(ValueError):
        parse_grid("0:1:0")
    with pytest.raises(ValueError):
        parse_grid("a:b:c")


def test_sre_sweep_matches_exact_ground_states() -> None:
    calls: list[float] = []

    def recording_map(
        fn: Callable[[float], SweepPoint], items: Iterable[float]
    ) -> list[SweepPoint]:
        values = list(items)
        calls.extend(values)
        return [fn(value) for value in values]

    points = sre_sweep(
        "ising", 4, [0.5, 1.0], dmrg_config=DmrgConfig(max_chi=4), map_fn=recording_map
    )

    assert calls == [0.5, 1.0]
    assert [point.parameter for point in points] == [0.5, 1.0]
    for point in points:
        model = SpinChainModel.ising(4, point.parameter)
        ground = dmrg_ground_state(model, DmrgConfig(max_chi=4))
        spectrum = exact_pauli_spectrum(DenseState.from_mps(ground.state))
        assert point.m_n * 4 == pytest.approx(exact_sre(spectrum, 2), abs=1e-6)
        assert point.energy == pytest.approx(exact_ground_energy(model), abs=1e-8)
        assert point.chi_used <= 4


def test_sre_sweep_requires_sorted_grid() -> None:
    with pytest.raises(ValueError, match="sorted"):
        sre_sweep("xxz", 4, [1.0, 0.5])
