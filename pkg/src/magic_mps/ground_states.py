from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
import numpy.typing as npt
import scipy.linalg
import scipy.sparse.linalg

from magic_mps.mps import (
    MatrixProductOperator,
    MatrixProductState,
    canonicalize,
    computational_state,
)
from magic_mps.pauli_mps import replica_sre
from magic_mps.paulis import PAULI_MATRICES
from magic_mps.tensors import TruncationPolicy, svd_truncated

logger = logging.getLogger(__name__)

ModelKind = Literal["ising", "xxz"]
DENSE_SOLVER_LIMIT = 200
UNIFORM_GRID_TOLERANCE = 1e-6

SweepMapper = Callable[
    [Callable[[float], "SweepPoint"], Iterable[float]], Iterable["SweepPoint"]
]

_I, _X, _Z, _Y = PAULI_MATRICES


@dataclass(frozen=True)
class SpinChainModel:
    """Open chain: ising is -sum XX - h sum Z, xxz is -sum (XX + YY + delta ZZ)."""

    kind: ModelKind
    n: int
    parameter: float

    def __post_init__(self) -> None:
        if self.kind not in ("ising", "xxz"):
            raise ValueError(f"Unknown model: {self.kind}")
        if self.n < 2:
            raise ValueError("spin chains need n >= 2")

    @classmethod
    def ising(cls, n: int, h: float) -> SpinChainModel:
        return cls("ising", n, h)

    @classmethod
    def xxz(cls, n: int, delta: float) -> SpinChainModel:
        return cls("xxz", n, delta)

    def initial_state(self) -> MatrixProductState:
        if self.kind == "ising":
            return computational_state([0] * self.n)
        return computational_state([site % 2 for site in range(self.n)])


@dataclass(frozen=True)
class DmrgConfig:
    max_chi: int = 40
    sweeps: int = 20
    tolerance: float = 1e-10
    truncation: float = 1e-12

    def __post_init__(self) -> None:
        if self.max_chi < 1:
            raise ValueError("max_chi must be >= 1")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")

    @property
    def policy(self) -> TruncationPolicy:
        return TruncationPolicy(self.max_chi, self.truncation)


@dataclass(frozen=True, eq=False)
class DmrgResult:
    state: MatrixProductState
    energy: float
    sweep_energies: tuple[float, ...]
    converged: bool
    truncation_error: float
    max_bond: int


@dataclass(frozen=True)
class SweepPoint:
    parameter: float
    m_n: float
    truncation_error: float
    chi_used: int
    energy: float


@dataclass(frozen=True, eq=False)
class DerivativeTable:
    parameters: npt.NDArray[np.float64]
    values: npt.NDArray[np.float64]
    derivative: npt.NDArray[np.float64]
    order: int
    spacing: float


def hamiltonian_mpo(model: SpinChainModel) -> MatrixProductOperator:
    if model.kind == "ising":
        bulk = np.zeros((3, 3, 2, 2), dtype=np.complex128)
        bulk[0, 0] = _I
        bulk[1, 0] = _X
        bulk[2, 0] = -model.parameter * _Z
        bulk[2, 1] = -_X
        bulk[2, 2] = _I
    else:
        bulk = np.zeros((5, 5, 2, 2), dtype=np.complex128)
        bulk[0, 0] = _I
        bulk[1, 0] = _X
        bulk[2, 0] = _Y
        bulk[3, 0] = _Z
        bulk[4, 1] = -_X
        bulk[4, 2] = -_Y
        bulk[4, 3] = -model.parameter * _Z
        bulk[4, 4] = _I
    # (left, right, out, in) -> (left, out, in, right)
    site = bulk.transpose(0, 2, 3, 1)
    last_row = site.shape[0] - 1
    sites = [site[last_row : last_row + 1]]
    sites.extend([site] * (model.n - 2))
    sites.append(site[:, :, :, :1])
    return MatrixProductOperator(tuple(sites))


def _extend_left(
    env: npt.NDArray[np.complex128],
    site: npt.NDArray[np.complex128],
    op: npt.NDArray[np.complex128],
) -> npt.NDArray[np.complex128]:
    return np.einsum("xwa,xpy,wpqv,aqb->yvb", env, site.conj(), op, site, optimize=True)


def _extend_right(
    env: npt.NDArray[np.complex128],
    site: npt.NDArray[np.complex128],
    op: npt.NDArray[np.complex128],
) -> npt.NDArray[np.complex128]:
    return np.einsum("xpy,wpqv,aqb,yvb->xwa", site.conj(), op, site, env, optimize=True)


def _lowest_eigenpair(
    left: npt.NDArray[np.complex128],
    w1: npt.NDArray[np.complex128],
    w2: npt.NDArray[np.complex128],
    right: npt.NDArray[np.complex128],
    guess: npt.NDArray[np.complex128],
) -> tuple[float, npt.NDArray[np.complex128]]:
    shape = guess.shape
    size = guess.size
    if size <= DENSE_SOLVER_LIMIT:
        matrix = np.einsum("xwa,wpsv,vqtu,yub->xpqyastb", left, w1, w2, right)
        matrix = matrix.reshape(size, size)
        values, vectors = scipy.linalg.eigh(0.5 * (matrix + matrix.conj().T))
        return float(values[0]), vectors[:, 0].reshape(shape)

    def matvec(vector: npt.NDArray[np.complex128]) -> npt.NDArray[np.complex128]:
        theta = vector.reshape(shape)
        result = np.einsum(
            "xwa,astb,wpsv,vqtu,yub->xpqy", left, theta, w1, w2, right, optimize=True
        )
        return result.reshape(-1)

    operator = scipy.sparse.linalg.LinearOperator(
        (size, size), matvec=matvec, dtype=np.complex128
    )
    values, vectors = scipy.sparse.linalg.eigsh(
        operator, k=1, which="SA", v0=guess.reshape(-1)
    )
    return float(values[0]), vectors[:, 0].reshape(shape)


def dmrg_ground_state(
    model: SpinChainModel,
    config: DmrgConfig | None = None,
    initial: MatrixProductState | None = None,
) -> DmrgResult:
    config = config or DmrgConfig()
    policy = config.policy
    hamiltonian = hamiltonian_mpo(model).sites
    n = model.n
    psi = canonicalize(initial or model.initial_state(), 0)
    sites = list(psi.sites)

    boundary = np.ones((1, 1, 1), dtype=np.complex128)
    left_envs: list[npt.NDArray[np.complex128]] = [boundary] * n
    right_envs: list[npt.NDArray[np.complex128]] = [boundary] * n
    for index in range(n - 1, 0, -1):
        right_envs[index - 1] = _extend_right(
            right_envs[index], sites[index], hamiltonian[index]
        )

    energies: list[float] = []
    converged = False
    sweep_error = 0.0
    energy = float("nan")
    for sweep in range(config.sweeps):
        sweep_error = 0.0
        for index in range(n - 1):
            theta = np.tensordot(sites[index], sites[index + 1], axes=(2, 0))
            energy, theta = _lowest_eigenpair(
                left_envs[index],
                hamiltonian[index],
                hamiltonian[index + 1],
                right_envs[index + 1],
                theta,
            )
            result = svd_truncated(theta, (0, 1), policy)
            values = result.singular_values / np.linalg.norm(result.singular_values)
            sites[index] = result.u
            sites[index + 1] = values[:, None, None] * result.vdag
            sweep_error = max(sweep_error, result.truncation_error)
            left_envs[index + 1] = _extend_left(
                left_envs[index], sites[index], hamiltonian[index]
            )
        energies.append(energy)
        for index in range(n - 2, -1, -1):
            theta = np.tensordot(sites[index], sites[index + 1], axes=(2, 0))
            energy, theta = _lowest_eigenpair(
                left_envs[index],
                hamiltonian[index],
                hamiltonian[index + 1],
                right_envs[index + 1],
                theta,
            )
            result = svd_truncated(theta, (0, 1), policy)
            values = result.singular_values / np.linalg.norm(result.singular_values)
            sites[index] = result.u * values
            sites[index + 1] = result.vdag
            sweep_error = max(sweep_error, result.truncation_error)
            right_envs[index] = _extend_right(
                right_envs[index + 1], sites[index + 1], hamiltonian[index + 1]
            )
        energies.append(energy)
        logger.debug(
            "DMRG sweep",
            extra={
                "sweep": sweep,
                "energy": energy,
                "truncation_error": sweep_error,
            },
        )
        if sweep > 0 and abs(energies[-1] - energies[-3]) < config.tolerance:
            converged = True
            break

    state = MatrixProductState(
        tuple(sites), ortho_center=0, truncation_error=sweep_error
    )
    if not converged:
        logger.warning(
            "DMRG did not converge",
            extra={"model": model.kind, "n": n, "sweeps": config.sweeps},
        )
    return DmrgResult(
        state=state,
        energy=energy,
        sweep_energies=tuple(energies),
        converged=converged,
        truncation_error=sweep_error,
        max_bond=state.max_bond,
    )


def sre_point(
    model: SpinChainModel,
    renyi_n: int,
    dmrg_config: DmrgConfig,
    policy: TruncationPolicy,
    pauli_policy: TruncationPolicy | None = None,
) -> SweepPoint:
    ground = dmrg_ground_state(model, dmrg_config)
    sre = replica_sre(ground.state, renyi_n, policy, pauli_policy)
    return SweepPoint(
        parameter=model.parameter,
        m_n=sre.density,
        truncation_error=ground.truncation_error + sum(sre.step_errors),
        chi_used=ground.max_bond,
        energy=ground.energy,
    )


def sre_sweep(
    kind: ModelKind,
    n: int,
    grid: Sequence[float],
    renyi_n: int = 2,
    dmrg_config: DmrgConfig | None = None,
    policy: TruncationPolicy | None = None,
    pauli_policy: TruncationPolicy | None = None,
    map_fn: SweepMapper | None = None,
) -> list[SweepPoint]:
    values = list(grid)
    if any(later < earlier for earlier, later in zip(values, values[1:])):
        raise ValueError("parameter grid must be sorted")
    dmrg_config = dmrg_config or DmrgConfig()
    policy = policy or TruncationPolicy(error_threshold=1e-9)

    def compute(parameter: float) -> SweepPoint:
        model = SpinChainModel(kind, n, parameter)
        return sre_point(model, renyi_n, dmrg_config, policy, pauli_policy)

    mapper = map_fn or map
    return list(mapper(compute, values))


def finite_difference(
    parameters: Sequence[float] | npt.ArrayLike,
    values: Sequence[float] | npt.ArrayLike,
    order: int = 1,
) -> DerivativeTable:
    x = np.asarray(parameters, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("parameters and values must be equal-length 1-d sequences")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    minimum = 3 if order == 1 else 4
    if x.size < minimum:
        raise ValueError(f"order {order} needs at least {minimum} points")
    steps = np.diff(x)
    spacing = float(steps.mean())
    if not np.allclose(steps, spacing, rtol=UNIFORM_GRID_TOLERANCE, atol=0.0):
        raise ValueError("finite differences need a uniform grid")
    if order == 1:
        derivative = np.gradient(y, spacing, edge_order=2)
    else:
        derivative = np.empty_like(y)
        derivative[1:-1] = (y[2:] - 2.0 * y[1:-1] + y[:-2]) / spacing**2
        derivative[0] = (2 * y[0] - 5 * y[1] + 4 * y[2] - y[3]) / spacing**2
        derivative[-1] = (2 * y[-1] - 5 * y[-2] + 4 * y[-3] - y[-4]) / spacing**2
    return DerivativeTable(
        parameters=x, values=y, derivative=derivative, order=order, spacing=spacing
    )


def parse_grid(text: str) -> list[float]:
    """'start:stop:step' (inclusive stop) or a comma-separated list."""
    if ":" in text:
        try:
            start, stop, step = (float(part) for part in text.split(":"))
        except ValueError as exc:
            raise ValueError(f"Invalid grid: {text!r}") from exc
        if step <= 0:
            raise ValueError("grid step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [float(value) for value in np.round(start + step * np.arange(count), 12)]
    return [float(part) for part in text.split(",") if part.strip()]
