from __future__ import annotations

from typing import Any

import numpy as np

from magic_mps.circuits import CircuitSpec, GateOp, LOCAL_STATES
from magic_mps.mps import MatrixProductState, product_state
from magic_mps.oracle import DenseState, PauliSpectrum, exact_pauli_spectrum
from magic_mps.registry import CircuitFactory, default_circuit_registry

CZ = np.diag([1, 1, 1, -1]).astype(np.complex128)


def bell_pair_circuit(n: int = 2, seed: int | None = None) -> CircuitSpec:
    layers = ((GateOp("H", (0,)),), (GateOp("CNOT", (0, 1)),))
    return CircuitSpec(n=n, layers=layers, family="bell-pair", seed=seed)


def get_circuit_registry() -> dict[str, CircuitFactory]:
    registry = default_circuit_registry()
    registry["bell-pair"] = bell_pair_circuit
    return registry


def get_broken_registry() -> Any:
    return ["not", "a", "dict"]


def t_product(count: int, zeros: int = 0) -> MatrixProductState:
    """|T>^count followed by |0>^zeros."""
    vectors = [LOCAL_STATES["t"]] * count + [LOCAL_STATES["zero"]] * zeros
    return product_state(vectors)


def cluster_state(n: int) -> DenseState:
    state = DenseState.from_labels("+" * n)
    for site in range(n - 1):
        state = state.apply(CZ, (site, site + 1))
    return state


def cluster_mps(n: int) -> MatrixProductState:
    return MatrixProductState.from_dense(cluster_state(n).amplitudes, [2] * n)


def spectrum_of(psi: MatrixProductState) -> PauliSpectrum:
    return exact_pauli_spectrum(DenseState.from_mps(psi))
