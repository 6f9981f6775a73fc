from __future__ import annotations

import json
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt

from magic_mps.exceptions import ConfigurationError
from magic_mps.mps import MatrixProductState, canonicalize, product_state
from magic_mps.tensors import TruncationPolicy, svd_truncated

logger = logging.getLogger(__name__)

UNITARY_TOLERANCE = 1e-12

_SQRT_HALF = 1.0 / math.sqrt(2.0)

GATE_MATRICES: dict[str, npt.NDArray[np.complex128]] = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.diag([1, -1]).astype(np.complex128),
    "H": _SQRT_HALF * np.array([[1, 1], [1, -1]], dtype=np.complex128),
    "S": np.diag([1, 1j]).astype(np.complex128),
    "T": np.diag([1, np.exp(1j * math.pi / 4)]).astype(np.complex128),
    # control is the first target
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
        dtype=np.complex128,
    ),
    "CZ": np.diag([1, 1, 1, -1]).astype(np.complex128),
    "SWAP": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]],
        dtype=np.complex128,
    ),
    "CCZ": np.diag([1, 1, 1, 1, 1, 1, 1, -1]).astype(np.complex128),
}
for _matrix in GATE_MATRICES.values():
    _matrix.setflags(write=False)

CLIFFORD_GATES = frozenset({"I", "X", "Y", "Z", "H", "S", "CNOT", "CZ", "SWAP"})

LOCAL_STATES: dict[str, npt.NDArray[np.complex128]] = {
    "zero": np.array([1, 0], dtype=np.complex128),
    "plus": np.array([_SQRT_HALF, _SQRT_HALF], dtype=np.complex128),
    "y": np.array([_SQRT_HALF, 1j * _SQRT_HALF], dtype=np.complex128),
    "t": np.array(
        [_SQRT_HALF, _SQRT_HALF * np.exp(1j * math.pi / 4)], dtype=np.complex128
    ),
}


@dataclass(frozen=True, eq=False)
class GateOp:
    kind: str
    targets: tuple[int, ...]
    matrix: npt.NDArray[np.complex128] | None = None

    def __post_init__(self) -> None:
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"{kind} targets must be distinct: {self.targets}")
        if kind == "CUSTOM":
            if self.matrix is None:
                raise ValueError("custom gates need a matrix")
            matrix = np.asarray(self.matrix, dtype=np.complex128)
            dim = 2 ** len(self.targets)
            if matrix.shape != (dim, dim):
                raise ValueError(
                    f"custom gate on {len(self.targets)} sites needs a {dim}x{dim} "
                    "matrix"
                )
            deviation = np.abs(matrix.conj().T @ matrix - np.eye(dim)).max()
            if deviation > UNITARY_TOLERANCE:
                raise ValueError(
                    f"custom gate is not unitary (deviation {deviation:.3g})"
                )
            matrix.setflags(write=False)
            object.__setattr__(self, "matrix", matrix)
            return
        if self.matrix is not None:
            raise ValueError(f"{kind} is a named gate; only CUSTOM takes a matrix")
        if kind not in GATE_MATRICES:
            raise ValueError(f"Unknown gate: {self.kind}")
        expected = int(math.log2(GATE_MATRICES[kind].shape[0]))
        if len(self.targets) != expected:
            raise ValueError(f"{kind} acts on {expected} sites, got {self.targets}")

    @property
    def unitary(self) -> npt.NDArray[np.complex128]:
        if self.matrix is not None:
            return self.matrix
        return GATE_MATRICES[self.kind]

    @property
    def is_clifford(self) -> bool:
        return self.kind in CLIFFORD_GATES

    def describe(self) -> str:
        return " ".join([self.kind, *(str(target) for target in self.targets)])


@dataclass(frozen=True, eq=False)
class CircuitSpec:
    n: int
    layers: tuple[tuple[GateOp, ...], ...] = ()
    family: str = "explicit"
    seed: int | None = None
    initial: str = "zero"
    n_t: int = 0
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("a circuit needs at least one qubit")
        if self.initial not in LOCAL_STATES and self.initial != "t-doped":
            raise ValueError(f"Unknown initial state: {self.initial}")
        for layer in self.layers:
            for gate in layer:
                if any(not 0 <= target < self.n for target in gate.targets):
                    raise ValueError(
                        f"{gate.describe()} is out of range for N={self.n}"
                    )

    @property
    def gates(self) -> list[GateOp]:
        return [gate for layer in self.layers for gate in layer]

    @property
    def depth(self) -> int:
        return len(self.layers)

    def count(self, kind: str) -> int:
        return sum(1 for gate in self.gates if gate.kind == kind.upper())

    def initial_state(self) -> MatrixProductState:
        if self.initial == "t-doped":
            return build_t_doped_state(self.n, self.n_t)
        return product_state([LOCAL_STATES[self.initial]] * self.n)

    def describe(self) -> dict[str, Any]:
        return {
            "family": self.family,
            "n": self.n,
            "seed": self.seed,
            "initial": self.initial,
            "n_t": self.n_t,
            "depth": self.depth,
            "gates": len(self.gates),
            **self.params,
        }


def apply_gate(
    psi: MatrixProductState,
    gate: GateOp,
    policy: TruncationPolicy | None = None,
    route: bool = True,
) -> MatrixProductState:
    policy = policy or TruncationPolicy.exact()
    order = sorted(range(len(gate.targets)), key=lambda index: gate.targets[index])
    targets = [gate.targets[index] for index in order]
    unitary = _permute_gate(gate.unitary, order)
    start = targets[0]
    contiguous = targets == list(range(start, start + len(targets)))
    if contiguous:
        return _apply_block(psi, start, unitary, policy)
    if not route:
        raise ValueError(f"{gate.describe()} acts on non-adjacent sites")
    swaps = []
    for offset, target in enumerate(targets[1:], start=1):
        for site in range(target, start + offset, -1):
            swaps.append(site - 1)
    swap = GATE_MATRICES["SWAP"]
    for site in swaps:
        psi = _apply_block(psi, site, swap, policy)
    psi = _apply_block(psi, start, unitary, policy)
    for site in reversed(swaps):
        psi = _apply_block(psi, site, swap, policy)
    return psi


def _permute_gate(
    unitary: npt.NDArray[np.complex128],
    order: Sequence[int],
) -> npt.NDArray[np.complex128]:
    k = len(order)
    if list(order) == list(range(k)):
        return unitary
    tensor = unitary.reshape((2,) * (2 * k))
    axes = [*order, *(k + index for index in order)]
    return tensor.transpose(axes).reshape(2**k, 2**k)


def _apply_block(
    psi: MatrixProductState,
    start: int,
    unitary: npt.NDArray[np.complex128],
    policy: TruncationPolicy,
) -> MatrixProductState:
    k = int(round(math.log2(unitary.shape[0])))
    if start + k > psi.n:
        raise ValueError(f"gate block at {start} runs past site {psi.n - 1}")
    psi = canonicalize(psi, start)
    theta = psi.sites[start]
    for site in psi.sites[start + 1 : start + k]:
        theta = np.tensordot(theta, site, axes=(theta.ndim - 1, 0))
    left, right = theta.shape[0], theta.shape[-1]
    dims = theta.shape[1:-1]
    theta = theta.reshape(left, -1, right)
    theta = np.einsum("ps,lsr->lpr", unitary, theta).reshape(left, *dims, right)

    sites = list(psi.sites)
    error = 0.0
    remainder = theta
    for offset in range(k - 1):
        current_left = remainder.shape[0]
        result = svd_truncated(remainder, (0, 1), policy)
        values = result.singular_values / np.linalg.norm(result.singular_values)
        sites[start + offset] = result.u
        remainder = values.reshape(-1, *([1] * (result.vdag.ndim - 1))) * result.vdag
        error += result.truncation_error
        logger.debug(
            "Gate split",
            extra={"site": start + offset, "left": current_left, "rank": result.rank},
        )
    sites[start + k - 1] = remainder
    return replace(
        psi,
        sites=tuple(sites),
        ortho_center=start + k - 1,
        truncation_error=psi.truncation_error + error,
    )


def apply_circuit(
    psi: MatrixProductState,
    circuit: CircuitSpec,
    policy: TruncationPolicy | None = None,
) -> MatrixProductState:
    if psi.n != circuit.n:
        raise ValueError(f"circuit has {circuit.n} qubits, state has {psi.n}")
    for layer in circuit.layers:
        for gate in layer:
            psi = apply_gate(psi, gate, policy)
    return psi


def run_circuit(
    circuit: CircuitSpec,
    policy: TruncationPolicy | None = None,
) -> MatrixProductState:
    return apply_circuit(circuit.initial_state(), circuit, policy)


def build_t_doped_state(n: int, n_t: int) -> MatrixProductState:
    """|+>^(n - n_t) |T>^n_t as a product MPS."""
    if not 0 <= n_t <= n:
        raise ValueError(f"n_t must lie between 0 and {n}, got {n_t}")
    vectors = [LOCAL_STATES["plus"]] * (n - n_t) + [LOCAL_STATES["t"]] * n_t
    return product_state(vectors)


def _clifford_layer(n: int, rng: np.random.Generator) -> tuple[GateOp, ...]:
    if rng.random() < 0.5:
        kinds = rng.choice(["S", "H"], size=n)
        return tuple(GateOp(str(kind), (site,)) for site, kind in enumerate(kinds))
    offset = int(rng.integers(2))
    layer = []
    for site in range(offset, n - 1, 2):
        layer.append(GateOp(str(rng.choice(["CNOT", "CZ"])), (site, site + 1)))
    return tuple(layer)


def random_clifford_circuit(
    n: int,
    depth: int,
    seed: int | None = None,
    initial: str = "zero",
    n_t: int = 0,
) -> CircuitSpec:
    if n < 2:
        raise ValueError("random Clifford circuits need n >= 2")
    if depth < 0:
        raise ValueError("depth must be >= 0")
    rng = np.random.default_rng(seed)
    layers = tuple(_clifford_layer(n, rng) for _ in range(depth))
    return CircuitSpec(
        n=n,
        layers=layers,
        family="random-clifford",
        seed=seed,
        initial=initial,
        n_t=n_t,
        params={"depth": depth},
    )


def t_doped_circuit(
    n: int, n_t: int, depth: int, seed: int | None = None
) -> CircuitSpec:
    """T-doped product state followed by a random nearest-neighbour Clifford circuit."""
    if not 0 <= n_t <= n:
        raise ValueError(f"n_t must lie between 0 and {n}, got {n_t}")
    circuit = random_clifford_circuit(n, depth, seed, initial="t-doped", n_t=n_t)
    return replace(circuit, family="t-doped", params={"depth": depth})


def t_doped_random_circuit(n: int, steps: int, seed: int | None = None) -> CircuitSpec:
    """y-polarized start; per step a brick layer from {I, CNOT^L, CNOT^R} then one T."""
    if n < 2:
        raise ValueError("t-doped random circuits need n >= 2")
    rng = np.random.default_rng(seed)
    layers = []
    for step in range(steps):
        bricks = []
        for site in range(step % 2, n - 1, 2):
            choice = int(rng.integers(3))
            if choice == 1:
                bricks.append(GateOp("CNOT", (site, site + 1)))
            elif choice == 2:
                bricks.append(GateOp("CNOT", (site + 1, site)))
        layers.append(tuple(bricks))
        layers.append((GateOp("T", (int(rng.integers(n)),)),))
    return CircuitSpec(
        n=n,
        layers=tuple(layers),
        family="t-doped-random",
        seed=seed,
        initial="y",
        params={"steps": steps},
    )


def scrambling_circuit(
    n: int,
    n_ccz: int,
    seed: int | None = None,
    scramble_depth: int | None = None,
) -> CircuitSpec:
    """Stand-in scrambling family: CCZ gates between diagonal Clifford layers on |+>.

    A final random Clifford block scrambles the result. Use ``load_circuit`` for an
    explicit experimental layout.
    """
    if n < 3:
        raise ValueError("scrambling circuits need n >= 3")
    if n_ccz < 0:
        raise ValueError("n_ccz must be >= 0")
    rng = np.random.default_rng(seed)
    layers = []
    for index in range(n_ccz):
        layers.append(_diagonal_clifford_layer(n, rng))
        first = (3 * index) % (n - 2)
        layers.append((GateOp("CCZ", (first, first + 1, first + 2)),))
    depth = n if scramble_depth is None else scramble_depth
    layers.extend(_clifford_layer(n, rng) for _ in range(depth))
    return CircuitSpec(
        n=n,
        layers=tuple(layers),
        family="scrambling",
        seed=seed,
        initial="plus",
        params={"n_ccz": n_ccz, "scramble_depth": depth, "layout": "stand-in"},
    )


def _diagonal_clifford_layer(n: int, rng: np.random.Generator) -> tuple[GateOp, ...]:
    offset = int(rng.integers(2))
    layer = [GateOp("CZ", (site, site + 1)) for site in range(offset, n - 1, 2)]
    layer.extend(GateOp("S", (site,)) for site in range(n) if rng.random() < 0.5)
    return tuple(layer)


def parse_circuit_text(text: str) -> CircuitSpec:
    n: int | None = None
    layers: list[tuple[GateOp, ...]] = []
    current: list[GateOp] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            if current:
                layers.append(tuple(current))
                current = []
            continue
        if n is None:
            key, _, value = line.partition("=")
            if key.strip().upper() != "N" or not value.strip().isdigit():
                raise ConfigurationError(
                    f"line {number}: circuit text must start with 'N=<n>'", line=number
                )
            n = int(value)
            continue
        kind, *targets = line.split()
        try:
            current.append(GateOp(kind, tuple(int(target) for target in targets)))
        except ValueError as exc:
            raise ConfigurationError(f"line {number}: {exc}", line=number) from exc
    if current:
        layers.append(tuple(current))
    if n is None:
        raise ConfigurationError("circuit text has no 'N=<n>' header")
    return _explicit(n, layers)


def parse_circuit_json(payload: dict[str, Any]) -> CircuitSpec:
    try:
        n = int(payload["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError("circuit JSON needs an integer 'n'") from exc
    if "layers" in payload:
        raw_layers = payload["layers"]
    else:
        raw_layers = [[gate] for gate in payload.get("gates", [])]
    layers = []
    try:
        for raw_layer in raw_layers:
            layers.append(tuple(_gate_from_json(item) for item in raw_layer))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid gate in circuit JSON: {exc}") from exc
    return _explicit(n, layers, initial=str(payload.get("initial", "zero")))


def _gate_from_json(item: dict[str, Any]) -> GateOp:
    matrix = item.get("matrix")
    if matrix is not None:
        matrix = _complex_matrix(matrix)
    return GateOp(str(item["gate"]), tuple(item["targets"]), matrix)


def _complex_matrix(rows: Iterable[Iterable[Any]]) -> npt.NDArray[np.complex128]:
    """Entries are numbers, complex strings like "0+1j", or [re, im] pairs."""
    converted = []
    for row in rows:
        values = []
        for entry in row:
            if isinstance(entry, (list, tuple)):
                values.append(complex(entry[0], entry[1]))
            else:
                values.append(complex(entry))
        converted.append(values)
    return np.asarray(converted, dtype=np.complex128)


def _explicit(
    n: int,
    layers: Sequence[tuple[GateOp, ...]],
    initial: str = "zero",
) -> CircuitSpec:
    try:
        return CircuitSpec(n=n, layers=tuple(layers), initial=initial)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc


def load_circuit(path: str | Path) -> CircuitSpec:
    source = Path(path)
    try:
        text = source.read_text()
    except OSError as exc:
        raise ConfigurationError(f"Cannot read circuit file {source}: {exc}") from exc
    if source.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{source}: invalid JSON: {exc}") from exc
        return parse_circuit_json(payload)
    return parse_circuit_text(text)


def format_circuit(circuit: CircuitSpec) -> str:
    lines = [f"N={circuit.n}"]
    for index, layer in enumerate(circuit.layers):
        if index:
            lines.append("")
        lines.extend(gate.describe() for gate in layer if gate.kind != "CUSTOM")
    return "\n".join(lines) + "\n"
