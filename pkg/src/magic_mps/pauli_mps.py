from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from magic_mps.exceptions import (
    NonPositiveContraction,
    NotNormalizedError,
    TruncationAbort,
)
from magic_mps.mps import (
    CompressionMethod,
    MatrixProductOperator,
    MatrixProductState,
    amplitude_log2,
    apply_mpo,
    canonicalize,
    check_normalized,
    compress_density_matrix,
    compress_svd,
    mpo_expectation,
    mpo_expectation_log2,
    product_mpo,
    sample_batch,
)
from magic_mps.paulis import COMMUTATION_SIGNS, PAULI_MATRICES, PauliString
from magic_mps.tensors import TruncationPolicy

logger = logging.getLogger(__name__)

_XOR_PARTNERS = np.arange(4)[None, :] ^ np.arange(4)[:, None]


@dataclass(frozen=True, eq=False)
class PauliVector:
    """Pauli-basis MPS with amplitude <psi|P_a|psi> / sqrt(2**N) at code a."""

    mps: MatrixProductState
    source_n: int

    @property
    def truncation_error(self) -> float:
        return self.mps.truncation_error

    def amplitude(self, pauli: PauliString) -> float:
        phase, log2_magnitude = amplitude_log2(self.mps, pauli.symbols)
        if phase == 0:
            return 0.0
        return float(phase.real * 2.0**log2_magnitude)

    def expectation(self, pauli: PauliString) -> float:
        """Signed <psi|P|psi>, read back from the vector."""
        phase, log2_magnitude = amplitude_log2(self.mps, pauli.symbols)
        if phase == 0:
            return 0.0
        value = phase.real * 2.0 ** (log2_magnitude + 0.5 * self.source_n)
        return float(pauli.sign * value)


@dataclass(frozen=True, eq=False)
class ReplicaVector:
    mps: MatrixProductState
    order_n: int
    step_errors: tuple[float, ...] = ()


@dataclass(frozen=True)
class SreResult:
    value: float
    n: int
    qubits: int
    log2_norm_squared: float
    step_errors: tuple[float, ...]
    max_bond: int

    @property
    def density(self) -> float:
        return self.value / self.qubits


@dataclass(frozen=True)
class BellMagicResult:
    additive: float
    value: float
    contraction: float
    truncation_error: float
    max_bond: int


@dataclass(frozen=True)
class SampledM1:
    mean: float
    standard_error: float
    n_samples: int
    values: np.ndarray = field(repr=False, compare=False)


def build_pauli_vector(
    psi: MatrixProductState,
    policy: TruncationPolicy | None = None,
) -> PauliVector:
    check_normalized(psi)
    right = canonicalize(psi, 0)
    sites = []
    for site in right.sites:
        left, _, bond = site.shape
        block = np.einsum("ksu,lsr,mun->lmkrn", PAULI_MATRICES, site.conj(), site)
        sites.append(block.reshape(left * left, 4, bond * bond) / math.sqrt(2.0))
    pauli = MatrixProductState(
        tuple(sites),
        ortho_center=0,
        log2_scale=2 * right.log2_scale,
    )
    if policy is not None and policy != TruncationPolicy.exact():
        pauli, error = compress_svd(pauli, policy)
        logger.debug(
            "Compressed Pauli vector",
            extra={"bond": pauli.max_bond, "truncation_error": error},
        )
    return PauliVector(mps=pauli, source_n=psi.n)


def build_diagonal_w(p: PauliVector | MatrixProductState) -> MatrixProductOperator:
    mps = p.mps if isinstance(p, PauliVector) else p
    return MatrixProductOperator.from_diagonal(mps)


def compress(
    psi: MatrixProductState,
    policy: TruncationPolicy,
    method: CompressionMethod = "svd",
) -> tuple[MatrixProductState, float]:
    if method == "density_matrix":
        return compress_density_matrix(psi, policy)
    if method == "svd":
        return compress_svd(psi, policy)
    raise ValueError(f"Unknown compression method: {method}")


def replica_vector(
    p: PauliVector,
    n: int,
    policy: TruncationPolicy,
    method: CompressionMethod = "svd",
    abort_threshold: float | None = None,
) -> ReplicaVector:
    if n < 1:
        raise ValueError("replica order must be >= 1")
    w = build_diagonal_w(p)
    current = p.mps
    errors = []
    for step in range(1, n):
        result = apply_mpo(w, current, policy, method)
        error = result.truncation_error - current.truncation_error
        errors.append(error)
        if abort_threshold is not None and error > abort_threshold:
            raise TruncationAbort(
                f"replica step {step} discarded weight {error:.3g} "
                f"above the abort threshold {abort_threshold:.3g}",
                step=step,
                truncation_error=error,
                step_errors=errors,
            )
        current = result
        logger.debug(
            "Replica step",
            extra={"step": step, "bond": current.max_bond, "truncation_error": error},
        )
    return ReplicaVector(mps=current, order_n=n, step_errors=tuple(errors))


def replica_sre(
    psi: MatrixProductState,
    n: int,
    policy: TruncationPolicy,
    pauli_policy: TruncationPolicy | None = None,
    abort_threshold: float | None = None,
    method: CompressionMethod = "svd",
) -> SreResult:
    if n < 2:
        raise ValueError("replica_sre needs a Renyi index n >= 2")
    p = build_pauli_vector(psi, pauli_policy)
    replica = replica_vector(p, n, policy, method, abort_threshold)
    log2_norm_squared = 2.0 * replica.mps.log2_norm()
    value = log2_norm_squared / (1 - n) - psi.n
    logger.info(
        "Computed stabilizer Renyi entropy",
        extra={"n": n, "qubits": psi.n, "value": value},
    )
    return SreResult(
        value=value,
        n=n,
        qubits=psi.n,
        log2_norm_squared=log2_norm_squared,
        step_errors=replica.step_errors,
        max_bond=replica.mps.max_bond,
    )


def xor_convolution_sites(
    psi: MatrixProductState,
) -> MatrixProductState:
    """Site-local XOR self-convolution: code a collects every (b, c) with b ^ c = a."""
    sites = []
    for site in psi.sites:
        left, _, right = site.shape
        outer = np.einsum("lbr,mcn->lmbcrn", site, site)
        block = outer[:, :, np.arange(4)[:, None], _XOR_PARTNERS, :, :].sum(axis=2)
        sites.append(block.reshape(left * left, 4, right * right))
    return MatrixProductState(tuple(sites), log2_scale=2 * psi.log2_scale)


def bell_magic(
    psi: MatrixProductState,
    policy: TruncationPolicy,
    method: CompressionMethod = "svd",
    pauli_policy: TruncationPolicy | None = None,
) -> BellMagicResult:
    p = build_pauli_vector(psi, pauli_policy)
    squared = apply_mpo(build_diagonal_w(p), p.mps, policy)
    convolved, error = compress(xor_convolution_sites(squared), policy, method)
    signs = product_mpo([COMMUTATION_SIGNS] * psi.n)
    mantissa, exponent = mpo_expectation_log2(signs, convolved)
    total_error = squared.truncation_error + error
    if mantissa.real <= 0.0:
        raise NonPositiveContraction(
            "commutator contraction is not positive; truncation is too aggressive",
            mantissa=mantissa.real,
            truncation_error=total_error,
        )
    additive = -(exponent + math.log2(mantissa.real))
    contraction = mantissa.real * 2.0**exponent
    logger.info(
        "Computed Bell magic",
        extra={"qubits": psi.n, "additive": additive, "bond": convolved.max_bond},
    )
    return BellMagicResult(
        additive=additive,
        value=1.0 - 2.0 ** (-additive),
        contraction=contraction,
        truncation_error=total_error,
        max_bond=convolved.max_bond,
    )


def sampled_m1(
    p: PauliVector,
    n_samples: int,
    rng_seed: int | np.random.Generator | None = None,
) -> SampledM1:
    tolerance = 1e-8 + p.truncation_error
    norm = p.mps.norm()
    if abs(norm - 1.0) > tolerance:
        raise NotNormalizedError(
            f"Pauli vector norm {norm:.12g} deviates from 1 by more than {tolerance:g}",
            norm=norm,
        )
    batch = sample_batch(p.mps.normalized(), n_samples, rng_seed)
    # -log2 <P>^2 with <P>^2 = 2**N * Xi
    values = -(batch.log2_probabilities + p.source_n)
    if n_samples > 1:
        standard_error = float(np.std(values, ddof=1) / math.sqrt(n_samples))
    else:
        standard_error = 0.0
    return SampledM1(
        mean=float(values.mean()),
        standard_error=standard_error,
        n_samples=n_samples,
        values=values,
    )


def pauli_expectation(psi: MatrixProductState, pauli: PauliString) -> float:
    if pauli.n != psi.n:
        raise ValueError("Pauli string length must match the number of sites")
    operators = [PAULI_MATRICES[symbol] for symbol in pauli.symbols]
    value = mpo_expectation(product_mpo(operators), psi) / psi.norm() ** 2
    return float(pauli.sign * value.real)

