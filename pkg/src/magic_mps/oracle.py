"""Brute-force references for small systems.

Dense amplitudes use site 0 as the most significant bit, matching
``MatrixProductState.to_dense`` and ``PauliString.to_matrix``. Pauli spectra are
indexed by ``PauliString.code_index``.
"""

from __future__ import annotations

import csv
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from functools import reduce
from pathlib import Path

import numpy as np
import numpy.typing as npt
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from magic_mps.circuits import CircuitSpec
from magic_mps.exceptions import GroupStructureError
from magic_mps.ground_states import SpinChainModel
from magic_mps.mps import MatrixProductState
from magic_mps.paulis import (
    PAULI_MATRICES,
    Gf2Basis,
    PauliString,
    bits_from_code_index,
)

logger = logging.getLogger(__name__)

MAX_DENSE_QUBITS = 14
MAX_SPECTRUM_QUBITS = 10
MAX_BELL_QUBITS = 6
MAX_LITERAL_BELL_QUBITS = 3
DENSE_NORM_TOLERANCE = 1e-12
SUPPORT_TOLERANCE = 1e-9
DENSE_EIGEN_LIMIT = 64


@dataclass(frozen=True, eq=False)
class DenseState:
    amplitudes: npt.NDArray[np.complex128]

    def __post_init__(self) -> None:
        values = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        n = values.size.bit_length() - 1
        if values.size < 2 or values.size != 1 << n:
            raise ValueError("a dense state needs 2**N amplitudes with N >= 1")
        if n > MAX_DENSE_QUBITS:
            raise ValueError(f"dense states are limited to {MAX_DENSE_QUBITS} qubits")
        norm = float(np.linalg.norm(values))
        if abs(norm - 1.0) > DENSE_NORM_TOLERANCE:
            raise ValueError(f"dense state norm {norm:.15g} is not 1")
        values.setflags(write=False)
        object.__setattr__(self, "amplitudes", values)

    @property
    def n(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    @classmethod
    def from_mps(cls, psi: MatrixProductState) -> DenseState:
        if set(psi.physical_dims) != {2}:
            raise ValueError("dense oracle states are qubit chains")
        return cls(psi.normalized().to_dense())

    @classmethod
    def from_labels(cls, labels: str) -> DenseState:
        """Product state from characters of '01+-' (e.g. '0+1')."""
        half = 1.0 / math.sqrt(2.0)
        local = {
            "0": np.array([1.0, 0.0]),
            "1": np.array([0.0, 1.0]),
            "+": np.array([half, half]),
            "-": np.array([half, -half]),
        }
        try:
            vectors = [local[char] for char in labels]
        except KeyError:
            raise ValueError(f"Invalid product-state label: {labels!r}") from None
        return cls(reduce(np.kron, vectors).astype(np.complex128))

    def apply(self, matrix: npt.ArrayLike, targets: Sequence[int]) -> DenseState:
        gate = np.asarray(matrix, dtype=np.complex128)
        k = len(targets)
        if gate.shape != (1 << k, 1 << k):
            raise ValueError(f"gate shape {gate.shape} does not act on {k} qubits")
        if len(set(targets)) != k or any(not 0 <= t < self.n for t in targets):
            raise ValueError(f"invalid targets {tuple(targets)} for {self.n} qubits")
        tensor = self.amplitudes.reshape((2,) * self.n)
        block = gate.reshape((2,) * (2 * k))
        result = np.tensordot(block, tensor, axes=(list(range(k, 2 * k)), targets))
        result = np.moveaxis(result, list(range(k)), list(targets))
        return DenseState(result.reshape(-1))

    def expectation(self, pauli: PauliString) -> float:
        if pauli.n != self.n:
            raise ValueError("Pauli string length must match the number of qubits")
        value = np.vdot(self.amplitudes, pauli.to_matrix() @ self.amplitudes)
        return float(value.real)


@dataclass(frozen=True, eq=False)
class PauliSpectrum:
    """Signed expectations <P> for every code; Xi = <P>^2 / 2**N."""

    n: int
    expectations: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        values = np.asarray(self.expectations, dtype=np.float64).reshape(-1)
        if values.size != 4**self.n:
            raise ValueError(f"expected {4**self.n} expectations, got {values.size}")
        values.setflags(write=False)
        object.__setattr__(self, "expectations", values)

    @property
    def xi(self) -> npt.NDArray[np.float64]:
        return self.expectations**2 / 2.0**self.n

    @property
    def purity(self) -> float:
        return float(self.xi.sum())

    def expectation(self, pauli: PauliString) -> float:
        return pauli.sign * float(self.expectations[pauli.code_index])

    def to_csv(self, path: str | Path) -> Path:
        target = Path(path)
        with target.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["code", "pauli", "expectation", "xi"])
            for code, (value, weight) in enumerate(zip(self.expectations, self.xi)):
                label = PauliString.from_code_index(code, self.n).label
                writer.writerow([code, label, repr(float(value)), repr(float(weight))])
        return target


def _spread_bits(n: int) -> npt.NDArray[np.int64]:
    """Moves bit j of every n-bit integer to bit 2j."""
    values = np.arange(1 << n, dtype=np.int64)
    spread = np.zeros_like(values)
    for bit in range(n):
        spread |= ((values >> bit) & 1) << (2 * bit)
    return spread


def exact_pauli_spectrum(state: DenseState) -> PauliSpectrum:
    n = state.n
    if n > MAX_SPECTRUM_QUBITS:
        raise ValueError(
            f"full Pauli spectra are limited to {MAX_SPECTRUM_QUBITS} qubits"
        )
    size = 1 << n
    psi = state.amplitudes
    basis = np.arange(size)
    # rows: x pattern, columns: conj(psi[b ^ x]) * psi[b]
    shifted = psi.conj()[basis[None, :] ^ basis[:, None]] * psi[None, :]
    walsh = scipy.linalg.hadamard(size).astype(np.float64)
    transformed = shifted @ walsh
    overlap = np.bitwise_count(basis[:, None] & basis[None, :]) % 4
    phases = np.array([1.0, 1j, -1.0, -1j])[overlap]
    values = (phases * transformed).real
    spread = _spread_bits(n)
    codes = (spread[None, :] << 1) | spread[:, None]
    expectations = np.empty(4**n, dtype=np.float64)
    expectations[codes.reshape(-1)] = values.reshape(-1)
    spectrum = PauliSpectrum(n, expectations)
    logger.debug(
        "Enumerated Pauli spectrum", extra={"qubits": n, "purity": spectrum.purity}
    )
    return spectrum


def exact_sre(spectrum: PauliSpectrum, n: float) -> float:
    if n < 0:
        raise ValueError("Renyi index must be >= 0")
    squares = spectrum.expectations**2
    if n == 0:
        support = int(np.count_nonzero(squares > SUPPORT_TOLERANCE**2))
        return math.log2(support) - spectrum.n
    if n == 1:
        nonzero = squares[squares > 0.0]
        return float(-(nonzero * np.log2(nonzero)).sum() / 2.0**spectrum.n)
    total = float((squares**n).sum()) / 2.0**spectrum.n
    return math.log2(total) / (1.0 - n)


def _walsh_hadamard(values: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    data = np.asarray(values, dtype=np.float64).reshape(-1)
    half = 1
    while half < data.size:
        blocks = data.reshape(-1, 2, half)
        data = np.concatenate(
            (blocks[:, 0] + blocks[:, 1], blocks[:, 0] - blocks[:, 1]), axis=1
        ).reshape(-1)
        half *= 2
    return data


def _swap_xz(codes: npt.NDArray[np.int64], n: int) -> npt.NDArray[np.int64]:
    mask = int("01" * n, 2)
    return ((codes & mask) << 1) | ((codes >> 1) & mask)


def _bell_from_contraction(value: float) -> tuple[float, float]:
    if value >= 1.0:
        raise ValueError(f"Bell magic {value:.6g} >= 1; spectrum is not a pure state's")
    value = max(value, 0.0)
    return value, -math.log2(1.0 - value)


def exact_bell_magic(spectrum: PauliSpectrum) -> tuple[float, float]:
    """Returns (B, B_additive) through the XOR self-convolution of Xi."""
    if spectrum.n > MAX_BELL_QUBITS:
        raise ValueError(f"exact Bell magic is limited to {MAX_BELL_QUBITS} qubits")
    size = 4**spectrum.n
    eta = _walsh_hadamard(_walsh_hadamard(spectrum.xi) ** 2) / size
    total = float(eta.sum())
    # sum_{a,b} eta(a) eta(b) (-1)^<a,b> with the symplectic form as a Walsh sum
    swapped = eta[_swap_xz(np.arange(size, dtype=np.int64), spectrum.n)]
    signed = float(eta @ _walsh_hadamard(swapped))
    return _bell_from_contraction(total**2 - signed)


def _anticommutes(
    a: npt.NDArray[np.int64], b: npt.NDArray[np.int64], n: int
) -> npt.NDArray[np.int64]:
    mask = int("01" * n, 2)
    overlap = ((a & mask) & ((b >> 1) & mask)) ^ (((a >> 1) & mask) & (b & mask))
    return np.bitwise_count(overlap) & 1


def exact_bell_magic_literal(spectrum: PauliSpectrum) -> tuple[float, float]:
    """Quadruple sum over (alpha, alpha', beta, beta') with commutator norms."""
    n = spectrum.n
    if n > MAX_LITERAL_BELL_QUBITS:
        raise ValueError(
            f"literal Bell magic is limited to {MAX_LITERAL_BELL_QUBITS} qubits"
        )
    xi = spectrum.xi
    codes = np.arange(4**n, dtype=np.int64)
    pair_codes = (codes[:, None] ^ codes[None, :]).reshape(-1)
    pair_weights = np.outer(xi, xi).reshape(-1)
    value = 0.0
    for alpha in codes:
        rows = codes[alpha] ^ codes
        norms = 2.0 * _anticommutes(rows[:, None], pair_codes[None, :], n)
        value += float((xi[alpha] * xi) @ norms @ pair_weights)
    return _bell_from_contraction(value)


def exact_nullity(
    spectrum: PauliSpectrum, tol: float = SUPPORT_TOLERANCE
) -> tuple[int, tuple[PauliString, ...]]:
    n = spectrum.n
    members = np.flatnonzero(np.abs(spectrum.expectations) >= 1.0 - tol)
    basis = Gf2Basis()
    generators: list[PauliString] = []
    for code in members:
        if code == 0:
            continue
        bits = bits_from_code_index(int(code), n)
        if basis.add(bits):
            sign = 1 if spectrum.expectations[code] > 0 else -1
            generators.append(PauliString(n, bits, sign))
    if members.size != 1 << basis.rank:
        raise GroupStructureError(
            f"{members.size} stabilizers do not form a group of size 2**{basis.rank}",
            members=int(members.size),
            rank=basis.rank,
        )
    return n - basis.rank, tuple(generators)


def exact_magic_gap(
    spectrum: PauliSpectrum, tol: float = SUPPORT_TOLERANCE
) -> tuple[float, bool]:
    """Returns (gap, stabilizer_state); stabilizer states report a gap of 1."""
    magnitudes = np.abs(spectrum.expectations)
    inside = magnitudes[(magnitudes < 1.0 - tol) & (magnitudes > tol)]
    if inside.size == 0:
        return 1.0, True
    return 1.0 - float(inside.max()), False


def dense_circuit_state(circuit: CircuitSpec) -> DenseState:
    state = DenseState.from_mps(circuit.initial_state())
    for gate in circuit.gates:
        state = state.apply(gate.unitary, gate.targets)
    return state


def ising_free_fermion_energy(n: int, h: float) -> float:
    """Open-chain ground energy of -sum XX - h sum Z from Majorana modes."""
    if n < 1:
        raise ValueError("n must be >= 1")
    coupling = h * np.eye(n) + np.eye(n, k=-1)
    return -float(scipy.linalg.svdvals(coupling).sum())


def _site_operator(
    matrix: npt.NDArray[np.complex128], site: int, n: int
) -> scipy.sparse.csr_matrix:
    factors = [scipy.sparse.identity(1 << site, format="csr")]
    factors.append(scipy.sparse.csr_matrix(matrix))
    factors.append(scipy.sparse.identity(1 << (n - site - 1), format="csr"))
    return reduce(lambda a, b: scipy.sparse.kron(a, b, format="csr"), factors)


def dense_hamiltonian(model: SpinChainModel) -> scipy.sparse.csr_matrix:
    if model.n > MAX_DENSE_QUBITS:
        raise ValueError(f"dense Hamiltonians are limited to {MAX_DENSE_QUBITS} qubits")
    _, x, z, y = PAULI_MATRICES
    n = model.n
    singles = {
        name: [_site_operator(matrix, site, n) for site in range(n)]
        for name, matrix in (("x", x), ("y", y), ("z", z))
    }
    dim = 1 << n
    hamiltonian = scipy.sparse.csr_matrix((dim, dim), dtype=np.complex128)
    for site in range(n - 1):
        hamiltonian = hamiltonian - singles["x"][site] @ singles["x"][site + 1]
        if model.kind == "xxz":
            hamiltonian = hamiltonian - singles["y"][site] @ singles["y"][site + 1]
            hamiltonian = hamiltonian - model.parameter * (
                singles["z"][site] @ singles["z"][site + 1]
            )
    if model.kind == "ising":
        for site in range(n):
            hamiltonian = hamiltonian - model.parameter * singles["z"][site]
    return hamiltonian.tocsr()


def exact_ground_energy(model: SpinChainModel) -> float:
    hamiltonian = dense_hamiltonian(model)
    if hamiltonian.shape[0] <= DENSE_EIGEN_LIMIT:
        return float(scipy.linalg.eigvalsh(hamiltonian.toarray())[0])
    values = scipy.sparse.linalg.eigsh(
        hamiltonian, k=1, which="SA", return_eigenvectors=False
    )
    return float(values[0])
