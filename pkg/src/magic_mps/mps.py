from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Literal

import numpy as np
import numpy.typing as npt
import scipy.linalg

from magic_mps.exceptions import NotNormalizedError
from magic_mps.tensors import (
    DenseTensor,
    TruncationPolicy,
    as_tensor,
    qr_positive,
    rq_positive,
    svd_truncated,
    truncation_rank,
)

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-8
SAMPLE_CHUNK = 8192
EIGENVALUE_FLOOR = 1e-13

CompressionMethod = Literal["svd", "density_matrix"]


def _check_chain(sites: Sequence[DenseTensor], rank: int) -> None:
    if not sites:
        raise ValueError("a matrix product chain needs at least one site")
    for index, site in enumerate(sites):
        if site.ndim != rank:
            raise ValueError(f"site {index} must have rank {rank}, got {site.ndim}")
    if sites[0].shape[0] != 1 or sites[-1].shape[-1] != 1:
        raise ValueError("boundary bonds must have dimension 1")
    for index in range(len(sites) - 1):
        if sites[index].shape[-1] != sites[index + 1].shape[0]:
            raise ValueError(
                f"bond mismatch between sites {index} and {index + 1}: "
                f"{sites[index].shape[-1]} != {sites[index + 1].shape[0]}"
            )


def _rescale(tensor: npt.NDArray[np.complex128]) -> tuple[DenseTensor, float]:
    magnitude = float(np.linalg.norm(tensor))
    if magnitude == 0.0 or not math.isfinite(magnitude):
        return tensor, 0.0
    return tensor / magnitude, math.log2(magnitude)


@dataclass(frozen=True, eq=False)
class MatrixProductState:
    """Open-boundary MPS; the represented vector is 2**log2_scale times the chain."""

    sites: tuple[DenseTensor, ...]
    ortho_center: int | None = None
    log2_scale: float = 0.0
    truncation_error: float = 0.0

    def __post_init__(self) -> None:
        sites = tuple(as_tensor(site) for site in self.sites)
        _check_chain(sites, 3)
        if self.ortho_center is not None and not 0 <= self.ortho_center < len(sites):
            raise ValueError(f"ortho_center {self.ortho_center} out of range")
        object.__setattr__(self, "sites", sites)

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def physical_dims(self) -> tuple[int, ...]:
        return tuple(site.shape[1] for site in self.sites)

    @property
    def bond_dims(self) -> tuple[int, ...]:
        return tuple(site.shape[2] for site in self.sites[:-1])

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def log2_norm(self) -> float:
        if self.ortho_center is not None:
            raw = float(np.linalg.norm(self.sites[self.ortho_center]))
            if raw == 0.0:
                return -math.inf
            return self.log2_scale + math.log2(raw)
        mantissa, exponent = overlap_log2(self, self)
        if mantissa.real <= 0.0:
            return -math.inf
        return 0.5 * (exponent + math.log2(mantissa.real))

    def norm(self) -> float:
        return float(2.0 ** self.log2_norm())

    def normalized(self) -> MatrixProductState:
        log2_norm = self.log2_norm()
        if not math.isfinite(log2_norm):
            raise ValueError("cannot normalize a zero vector")
        return replace(self, log2_scale=self.log2_scale - log2_norm)

    def scaled(
        self, log2_factor: float = 0.0, sign: complex = 1.0
    ) -> MatrixProductState:
        sites = list(self.sites)
        if sign != 1.0:
            sites[0] = sites[0] * sign
        scale = self.log2_scale + log2_factor
        return replace(self, sites=tuple(sites), log2_scale=scale)

    def to_dense(self) -> npt.NDArray[np.complex128]:
        vector = np.ones((1, 1), dtype=np.complex128)
        for site in self.sites:
            left, dim, right = site.shape
            vector = (vector @ site.reshape(left, dim * right)).reshape(-1, right)
        return vector.reshape(-1) * 2.0**self.log2_scale

    @classmethod
    def from_dense(
        cls,
        amplitudes: npt.ArrayLike,
        physical_dims: Sequence[int],
        policy: TruncationPolicy | None = None,
    ) -> MatrixProductState:
        policy = policy or TruncationPolicy.exact()
        remainder = np.asarray(amplitudes, dtype=np.complex128).reshape(1, -1)
        if remainder.size != math.prod(physical_dims):
            raise ValueError("amplitude count does not match the physical dimensions")
        sites: list[DenseTensor] = []
        error = 0.0
        for dim in physical_dims[:-1]:
            left = remainder.shape[0]
            result = svd_truncated(remainder.reshape(left, dim, -1), (0, 1), policy)
            sites.append(result.u)
            remainder = result.singular_values[:, None] * result.vdag
            error += result.truncation_error
        sites.append(remainder.reshape(remainder.shape[0], physical_dims[-1], 1))
        state = cls(tuple(sites), ortho_center=len(sites) - 1, truncation_error=error)
        return canonicalize(state, len(sites) - 1)


@dataclass(frozen=True, eq=False)
class MatrixProductOperator:
    """MPO with sites (left, out, in, right); a diagonal operator keeps only its MPS."""

    tensors: tuple[DenseTensor, ...] = ()
    diagonal: MatrixProductState | None = None
    log2_scale: float = 0.0

    def __post_init__(self) -> None:
        if self.diagonal is not None:
            if self.tensors:
                raise ValueError("give either dense tensors or a diagonal, not both")
            # the diagonal chain carries no scale of its own
            scale = self.log2_scale + self.diagonal.log2_scale
            object.__setattr__(self, "diagonal", replace(self.diagonal, log2_scale=0.0))
            object.__setattr__(self, "log2_scale", scale)
            return
        tensors = tuple(as_tensor(tensor) for tensor in self.tensors)
        _check_chain(tensors, 4)
        object.__setattr__(self, "tensors", tensors)

    @classmethod
    def from_diagonal(cls, state: MatrixProductState) -> MatrixProductOperator:
        return cls(diagonal=state)

    @cached_property
    def sites(self) -> tuple[DenseTensor, ...]:
        if self.diagonal is None:
            return self.tensors
        sites = []
        for site in self.diagonal.sites:
            identity = np.eye(site.shape[1])
            sites.append(as_tensor(np.einsum("lor,op->lopr", site, identity)))
        return tuple(sites)

    @property
    def n(self) -> int:
        if self.diagonal is not None:
            return self.diagonal.n
        return len(self.tensors)

    @property
    def input_dims(self) -> tuple[int, ...]:
        if self.diagonal is not None:
            return self.diagonal.physical_dims
        return tuple(site.shape[2] for site in self.tensors)

    @property
    def bond_dims(self) -> tuple[int, ...]:
        if self.diagonal is not None:
            return self.diagonal.bond_dims
        return tuple(site.shape[3] for site in self.tensors[:-1])

    def to_dense(self) -> npt.NDArray[np.complex128]:
        matrix = np.ones((1, 1, 1), dtype=np.complex128)
        for site in self.sites:
            matrix = np.einsum("abw,wcdv->acbdv", matrix, site)
            rows = matrix.shape[0] * matrix.shape[1]
            cols = matrix.shape[2] * matrix.shape[3]
            matrix = matrix.reshape(rows, cols, matrix.shape[4])
        return matrix[:, :, 0] * 2.0**self.log2_scale


@dataclass(frozen=True, eq=False)
class EntanglementSpectrum:
    cut: int
    values: npt.NDArray[np.float64]

    def entropy(self, base: float = 2.0) -> float:
        weights = self.values**2
        weights = weights[weights > 0]
        return float(-(weights * np.log(weights)).sum() / math.log(base))


@dataclass(frozen=True)
class Sample:
    configuration: tuple[int, ...]
    probability: float
    log2_probability: float


@dataclass(frozen=True, eq=False)
class SampleBatch:
    configurations: npt.NDArray[np.int64]
    log2_probabilities: npt.NDArray[np.float64]

    @property
    def probabilities(self) -> npt.NDArray[np.float64]:
        return np.exp2(self.log2_probabilities)

    def __len__(self) -> int:
        return int(self.configurations.shape[0])


def canonicalize(psi: MatrixProductState, center: int) -> MatrixProductState:
    n = psi.n
    if not 0 <= center < n:
        raise ValueError(f"center {center} out of range for {n} sites")
    sites = list(psi.sites)
    scale = psi.log2_scale
    if psi.ortho_center is None:
        left_span = range(0, center)
        right_span = range(n - 1, center, -1)
    else:
        left_span = range(psi.ortho_center, center)
        right_span = range(psi.ortho_center, center, -1)

    for index in left_span:
        left, dim, right = sites[index].shape
        q, r = qr_positive(sites[index].reshape(left * dim, right))
        r, exponent = _rescale(r)
        scale += exponent
        sites[index] = q.reshape(left, dim, q.shape[1])
        sites[index + 1] = np.tensordot(r, sites[index + 1], axes=(1, 0))

    for index in right_span:
        left, dim, right = sites[index].shape
        r, q = rq_positive(sites[index].reshape(left, dim * right))
        r, exponent = _rescale(r)
        scale += exponent
        sites[index] = q.reshape(q.shape[0], dim, right)
        sites[index - 1] = np.tensordot(sites[index - 1], r, axes=(2, 0))

    sites[center], exponent = _rescale(sites[center])
    return replace(
        psi,
        sites=tuple(sites),
        ortho_center=center,
        log2_scale=scale + exponent,
    )


def overlap_log2(
    a: MatrixProductState,
    b: MatrixProductState,
) -> tuple[complex, float]:
    """<a|b> as mantissa * 2**exponent, safe against underflow on long chains."""
    if a.n != b.n or a.physical_dims != b.physical_dims:
        raise ValueError("states must have equal lengths and physical dimensions")
    env = np.ones((1, 1), dtype=np.complex128)
    exponent = a.log2_scale + b.log2_scale
    for bra, ket in zip(a.sites, b.sites):
        env = np.einsum("ab,asc,bsd->cd", env, bra.conj(), ket, optimize=True)
        env, shift = _rescale(env)
        exponent += shift
    return complex(env[0, 0]), exponent


def inner_product(a: MatrixProductState, b: MatrixProductState) -> complex:
    mantissa, exponent = overlap_log2(a, b)
    return mantissa * 2.0**exponent


def mpo_expectation_log2(
    w: MatrixProductOperator,
    psi: MatrixProductState,
) -> tuple[complex, float]:
    _check_operator(w, psi)
    env = np.ones((1, 1, 1), dtype=np.complex128)
    exponent = 2 * psi.log2_scale + w.log2_scale
    for site, op in zip(psi.sites, w.sites):
        env = np.einsum(
            "xwa,xpy,wpqv,aqb->yvb", env, site.conj(), op, site, optimize=True
        )
        env, shift = _rescale(env)
        exponent += shift
    return complex(env[0, 0, 0]), exponent


def mpo_expectation(w: MatrixProductOperator, psi: MatrixProductState) -> complex:
    mantissa, exponent = mpo_expectation_log2(w, psi)
    return mantissa * 2.0**exponent


def compress_svd(
    psi: MatrixProductState,
    policy: TruncationPolicy,
) -> tuple[MatrixProductState, float]:
    n = psi.n
    if n == 1:
        return canonicalize(psi, 0), 0.0
    forward = psi.ortho_center is None or psi.ortho_center <= (n - 1) / 2
    psi = canonicalize(psi, 0 if forward else n - 1)
    sites = list(psi.sites)
    total = 0.0
    if forward:
        for index in range(n - 1):
            result = svd_truncated(sites[index], (0, 1), policy)
            sites[index] = result.u
            carry = result.singular_values[:, None] * result.vdag
            sites[index + 1] = np.tensordot(carry, sites[index + 1], axes=(1, 0))
            total += result.truncation_error
        center = n - 1
    else:
        for index in range(n - 1, 0, -1):
            result = svd_truncated(sites[index], (0,), policy)
            sites[index] = result.vdag
            carry = result.u * result.singular_values
            sites[index - 1] = np.tensordot(sites[index - 1], carry, axes=(2, 0))
            total += result.truncation_error
        center = 0
    compressed = MatrixProductState(
        tuple(sites),
        ortho_center=center,
        log2_scale=psi.log2_scale,
        truncation_error=psi.truncation_error + total,
    )
    return compressed, total


def compress_density_matrix(
    psi: MatrixProductState,
    policy: TruncationPolicy,
) -> tuple[MatrixProductState, float]:
    return _density_matrix_product(identity_mpo(psi.physical_dims), psi, policy)


def apply_mpo(
    w: MatrixProductOperator,
    psi: MatrixProductState,
    policy: TruncationPolicy,
    method: CompressionMethod = "svd",
) -> MatrixProductState:
    _check_operator(w, psi)
    if method == "density_matrix":
        result, error = _density_matrix_product(w, psi, policy)
    elif method == "svd":
        zipped, error = _zip_up(w, canonicalize(psi, 0), policy.relaxed())
        result, sweep_error = compress_svd(zipped, policy)
        error += sweep_error
    else:
        raise ValueError(f"Unknown compression method: {method}")
    logger.debug(
        "Applied MPO",
        extra={"method": method, "bond": result.max_bond, "truncation_error": error},
    )
    return replace(result, truncation_error=psi.truncation_error + error)


def _check_operator(w: MatrixProductOperator, psi: MatrixProductState) -> None:
    if w.n != psi.n or w.input_dims != psi.physical_dims:
        raise ValueError("operator and state must have matching lengths and dims")


def _zip_up(
    w: MatrixProductOperator,
    psi: MatrixProductState,
    policy: TruncationPolicy,
) -> tuple[MatrixProductState, float]:
    carry = np.ones((1, 1, 1), dtype=np.complex128)
    exponent = w.log2_scale + psi.log2_scale
    error = 0.0
    sites: list[DenseTensor] = []
    operators = w.sites if w.diagonal is None else w.diagonal.sites
    for index, (op, site) in enumerate(zip(operators, psi.sites)):
        if w.diagonal is not None:
            block = np.einsum("kwa,wov,aod->kovd", carry, op, site, optimize=True)
        else:
            block = np.einsum("kwa,woiv,aid->kovd", carry, op, site, optimize=True)
        if index == psi.n - 1:
            sites.append(block.reshape(block.shape[0], block.shape[1], 1))
            break
        result = svd_truncated(block, (0, 1), policy)
        sites.append(result.u)
        carry = result.singular_values[:, None, None] * result.vdag
        carry, shift = _rescale(carry)
        exponent += shift
        error += result.truncation_error
    zipped = MatrixProductState(
        tuple(sites),
        ortho_center=psi.n - 1,
        log2_scale=exponent,
        truncation_error=psi.truncation_error + error,
    )
    return zipped, error


def _density_matrix_product(
    w: MatrixProductOperator,
    psi: MatrixProductState,
    policy: TruncationPolicy,
) -> tuple[MatrixProductState, float]:
    """Compress W|psi> from the reduced density matrices of the exact product."""
    n = psi.n
    operators = w.sites
    envs = [np.ones((1, 1, 1, 1), dtype=np.complex128)]
    for index in range(n - 1):
        op, site = operators[index], psi.sites[index]
        env = np.einsum(
            "xyab,xoqu,yqc,aoiv,bid->ucvd",
            envs[-1],
            op.conj(),
            site.conj(),
            op,
            site,
            optimize=True,
        )
        envs.append(_rescale(env)[0])

    carry = np.ones((1, 1, 1), dtype=np.complex128)
    exponent = w.log2_scale + psi.log2_scale
    error = 0.0
    sites: list[DenseTensor] = [np.empty(0)] * n
    for index in range(n - 1, 0, -1):
        block = np.einsum(
            "aoiv,bid,vdm->abom",
            operators[index],
            psi.sites[index],
            carry,
            optimize=True,
        )
        wl, al, dim, kept = block.shape
        rho = np.einsum("xyab,abom,xypn->ompn", envs[index], block, block.conj())
        rho = rho.reshape(dim * kept, dim * kept)
        eigenvalues, eigenvectors = scipy.linalg.eigh(0.5 * (rho + rho.conj().T))
        eigenvalues = eigenvalues[::-1].copy()
        eigenvectors = eigenvectors[:, ::-1]
        eigenvalues[eigenvalues < EIGENVALUE_FLOOR * max(eigenvalues[0], 0.0)] = 0.0
        # rho has rank at most wl * al
        capped = replace(policy, max_rank=min(policy.max_rank, wl * al))
        rank, discarded = truncation_rank(np.sqrt(eigenvalues), capped)
        isometry = eigenvectors[:, :rank]
        # rows of the site span the kept eigenvectors; the carry holds the overlaps
        sites[index] = isometry.T.reshape(rank, dim, kept)
        carry = block.reshape(wl * al, dim * kept) @ isometry.conj()
        carry = carry.reshape(wl, al, rank)
        carry, shift = _rescale(carry)
        exponent += shift
        error += discarded

    first = np.einsum(
        "aoiv,bid,vdm->abom", operators[0], psi.sites[0], carry, optimize=True
    )
    first, shift = _rescale(first)
    exponent += shift
    sites[0] = first.reshape(1, first.shape[2], first.shape[3])
    result = MatrixProductState(
        tuple(sites),
        ortho_center=0,
        log2_scale=exponent,
        truncation_error=psi.truncation_error + error,
    )
    return result, error


def entanglement_spectrum(psi: MatrixProductState, cut: int) -> EntanglementSpectrum:
    if not 1 <= cut <= psi.n - 1:
        raise ValueError(f"cut must lie between 1 and {psi.n - 1}, got {cut}")
    center = canonicalize(psi, cut - 1).sites[cut - 1]
    left, dim, right = center.shape
    values = scipy.linalg.svdvals(center.reshape(left * dim, right))
    return EntanglementSpectrum(cut=cut, values=values / np.linalg.norm(values))


def amplitude_log2(
    psi: MatrixProductState,
    configuration: Sequence[int],
) -> tuple[complex, float]:
    """Phase and log2 magnitude of one basis amplitude; (0, -inf) for zero."""
    if len(configuration) != psi.n:
        raise ValueError("configuration length must match the number of sites")
    vector = np.ones(1, dtype=np.complex128)
    exponent = psi.log2_scale
    for site, index in zip(psi.sites, configuration):
        vector = vector @ site[:, index, :]
        vector, shift = _rescale(vector)
        exponent += shift
    value = complex(vector[0])
    if value == 0:
        return 0j, -math.inf
    return value / abs(value), exponent + math.log2(abs(value))


def amplitude(psi: MatrixProductState, configuration: Sequence[int]) -> complex:
    phase, log2_magnitude = amplitude_log2(psi, configuration)
    if phase == 0:
        return 0j
    return phase * 2.0**log2_magnitude


def check_normalized(
    psi: MatrixProductState,
    tolerance: float = NORMALIZATION_TOLERANCE,
) -> None:
    norm = psi.norm()
    if abs(norm - 1.0) > tolerance:
        raise NotNormalizedError(
            f"state norm {norm:.12g} deviates from 1 by more than {tolerance:g}",
            norm=norm,
        )


def sample_batch(
    psi: MatrixProductState,
    n_samples: int,
    rng_seed: int | np.random.Generator | None = None,
) -> SampleBatch:
    check_normalized(psi)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(rng_seed)
    sites = canonicalize(psi, 0).sites
    configurations = []
    log2_probabilities = []
    for start in range(0, n_samples, SAMPLE_CHUNK):
        count = min(SAMPLE_CHUNK, n_samples - start)
        chunk, log2_chunk = _sample_chunk(sites, count, rng)
        configurations.append(chunk)
        log2_probabilities.append(log2_chunk)
    return SampleBatch(
        configurations=np.concatenate(configurations),
        log2_probabilities=np.concatenate(log2_probabilities),
    )


def _sample_chunk(
    sites: Sequence[DenseTensor],
    count: int,
    rng: np.random.Generator,
) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.float64]]:
    rows = np.arange(count)
    vectors = np.ones((count, 1), dtype=np.complex128)
    configurations = np.empty((count, len(sites)), dtype=np.int64)
    log2_probabilities = np.zeros(count)
    for position, site in enumerate(sites):
        candidates = np.einsum("sl,ldr->sdr", vectors, site)
        weights = np.sum(np.abs(candidates) ** 2, axis=2)
        totals = weights.sum(axis=1)
        cumulative = np.cumsum(weights, axis=1) / totals[:, None]
        draws = rng.random(count)
        choice = (cumulative <= draws[:, None]).sum(axis=1)
        choice = np.minimum(choice, site.shape[1] - 1)
        chosen = weights[rows, choice]
        empty = chosen <= 0.0
        if empty.any():
            choice[empty] = weights[empty].argmax(axis=1)
            chosen = weights[rows, choice]
        log2_probabilities += np.log2(chosen / totals)
        vectors = candidates[rows, choice] / np.sqrt(chosen)[:, None]
        configurations[:, position] = choice
    return configurations, log2_probabilities


def perfect_sample(
    psi: MatrixProductState,
    rng_seed: int | np.random.Generator | None = None,
) -> Sample:
    batch = sample_batch(psi, 1, rng_seed)
    log2_probability = float(batch.log2_probabilities[0])
    return Sample(
        configuration=tuple(int(index) for index in batch.configurations[0]),
        probability=float(2.0**log2_probability),
        log2_probability=log2_probability,
    )


def add_states(a: MatrixProductState, b: MatrixProductState) -> MatrixProductState:
    if a.n != b.n or a.physical_dims != b.physical_dims:
        raise ValueError("states must have equal lengths and physical dimensions")
    scale = max(a.log2_scale, b.log2_scale)
    weight_a = 2.0 ** (a.log2_scale - scale)
    weight_b = 2.0 ** (b.log2_scale - scale)
    n = a.n
    if n == 1:
        sites = [weight_a * a.sites[0] + weight_b * b.sites[0]]
    else:
        sites = [np.concatenate([weight_a * a.sites[0], weight_b * b.sites[0]], axis=2)]
        for left, right in zip(a.sites[1:-1], b.sites[1:-1]):
            la, dim, ra = left.shape
            lb, _, rb = right.shape
            block = np.zeros((la + lb, dim, ra + rb), dtype=np.complex128)
            block[:la, :, :ra] = left
            block[la:, :, ra:] = right
            sites.append(block)
        sites.append(np.concatenate([a.sites[-1], b.sites[-1]], axis=0))
    return MatrixProductState(
        tuple(sites),
        log2_scale=scale,
        truncation_error=a.truncation_error + b.truncation_error,
    )


def identity_mpo(physical_dims: Sequence[int]) -> MatrixProductOperator:
    return MatrixProductOperator(
        tuple(np.eye(dim).reshape(1, dim, dim, 1) for dim in physical_dims)
    )


def product_mpo(operators: Sequence[npt.ArrayLike]) -> MatrixProductOperator:
    sites = []
    for operator in operators:
        matrix = np.asarray(operator, dtype=np.complex128)
        sites.append(matrix.reshape(1, matrix.shape[0], matrix.shape[1], 1))
    return MatrixProductOperator(tuple(sites))


def product_state(vectors: Sequence[npt.ArrayLike]) -> MatrixProductState:
    sites = []
    scale = 0.0
    for vector in vectors:
        local = np.asarray(vector, dtype=np.complex128)
        norm = float(np.linalg.norm(local))
        if norm == 0.0:
            raise ValueError("product state factors must be nonzero")
        sites.append((local / norm).reshape(1, -1, 1))
        scale += math.log2(norm)
    return MatrixProductState(tuple(sites), ortho_center=0, log2_scale=scale)


def computational_state(
    bits: Sequence[int], physical_dim: int = 2
) -> MatrixProductState:
    vectors = []
    for bit in bits:
        vector = np.zeros(physical_dim)
        vector[bit] = 1.0
        vectors.append(vector)
    return product_state(vectors)


def ghz_state(n: int) -> MatrixProductState:
    if n < 2:
        raise ValueError("a GHZ state needs at least two qubits")
    first = np.zeros((1, 2, 2))
    middle = np.zeros((2, 2, 2))
    last = np.zeros((2, 2, 1))
    for bit in (0, 1):
        first[0, bit, bit] = 1.0
        middle[bit, bit, bit] = 1.0
        last[bit, bit, 0] = 1.0
    sites = (first, *([middle] * (n - 2)), last)
    return canonicalize(MatrixProductState(sites, log2_scale=-0.5), 0)


def random_mps(
    n: int,
    chi: int,
    rng_seed: int | np.random.Generator | None = None,
    physical_dim: int = 2,
) -> MatrixProductState:
    """Gaussian random site tensors, canonicalized and normalized."""
    rng = np.random.default_rng(rng_seed)
    bonds = [1]
    for cut in range(1, n):
        bonds.append(min(chi, physical_dim**cut, physical_dim ** (n - cut)))
    bonds.append(1)
    sites = []
    for index in range(n):
        shape = (bonds[index], physical_dim, bonds[index + 1])
        real = rng.standard_normal(shape)
        imag = rng.standard_normal(shape)
        sites.append((real + 1j * imag) / math.sqrt(2.0))
    state = canonicalize(MatrixProductState(tuple(sites)), 0)
    return replace(state, log2_scale=0.0)
