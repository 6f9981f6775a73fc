from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from magic_mps.exceptions import (
    ConvergenceError,
    GroupStructureError,
    NonPositiveContraction,
)
from magic_mps.mps import (
    CompressionMethod,
    MatrixProductState,
    add_states,
    apply_mpo,
    overlap_log2,
    sample_batch,
)
from magic_mps.pauli_mps import (
    PauliVector,
    build_diagonal_w,
    build_pauli_vector,
    compress,
)
from magic_mps.paulis import Gf2Basis, PauliString, bits_from_configuration
from magic_mps.tensors import TruncationPolicy

logger = logging.getLogger(__name__)

# a sampled code may deviate from the uniform fixed-point weight by this many bits
SAMPLE_LOG2_TOLERANCE = 1.0
SIGN_MAGNITUDE_FLOOR = 0.5
EXTRACTION_ROUNDS = 20
GAP_SAMPLES = 16
# settled steps with a growing residual before the iteration gives up
DIVERGENCE_STEPS = 2

IterationCallback = Callable[["NullityRecord"], None]


@dataclass(frozen=True)
class NullityRecord:
    k: int
    log2_norm: float
    nu: float
    bond: int
    truncation_error: float
    ratio_change: float
    residual: float

    @property
    def norm(self) -> float:
        return float(2.0**self.log2_norm)


@dataclass(frozen=True, eq=False)
class NullityTrace:
    qubits: int
    log2_initial_norm: float
    records: tuple[NullityRecord, ...]
    converged: bool
    fixed_point: MatrixProductState

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def estimates(self) -> list[float]:
        return [record.nu for record in self.records]

    @property
    def final(self) -> NullityRecord:
        return self.records[-1]


@dataclass(frozen=True, eq=False)
class NullityResult:
    nu: float
    trace: NullityTrace
    pauli: PauliVector

    @property
    def nu_rounded(self) -> int:
        return int(round(self.nu))

    @property
    def rounding_gap(self) -> float:
        return abs(self.nu - self.nu_rounded)

    @property
    def converged(self) -> bool:
        return self.trace.converged

    @property
    def fixed_point(self) -> PauliVector:
        return PauliVector(mps=self.trace.fixed_point, source_n=self.trace.qubits)


@dataclass(frozen=True)
class StabilizerGroup:
    qubits: int
    generators: tuple[PauliString, ...]

    @property
    def nullity(self) -> int:
        return self.qubits - len(self.generators)

    @property
    def labels(self) -> list[str]:
        return [str(generator) for generator in self.generators]

    def basis(self) -> Gf2Basis:
        return Gf2Basis(generator.bits for generator in self.generators)

    def contains(self, pauli: PauliString) -> bool:
        """Unsigned membership."""
        return self.basis().contains(pauli.bits)

    def equivalent(self, other: StabilizerGroup | Gf2Basis) -> bool:
        basis = other.basis() if isinstance(other, StabilizerGroup) else other
        return self.basis().span_equals(basis)


@dataclass(frozen=True, eq=False)
class SpectrumStratum:
    level: int
    magnitude: float
    support_size: float
    fixed_point: PauliVector
    representatives: tuple[PauliString, ...]


@dataclass(frozen=True, eq=False)
class MagicGap:
    value: float
    stabilizer_state: bool
    representative: PauliString | None
    nullity: NullityResult
    residual_weight: float


def iterate_fixed_point(
    start: MatrixProductState,
    qubits: int,
    policy: TruncationPolicy,
    epsilon: float,
    max_iter: int,
    method: CompressionMethod = "density_matrix",
    stop_early: bool = True,
    on_iteration: IterationCallback | None = None,
) -> NullityTrace:
    """Normalized squaring P_k = W(u) u, u = P_{k-1} / T_{k-1}, until T_k settles."""
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    current = start
    log2_initial = start.log2_norm()
    previous = log2_initial
    records: list[NullityRecord] = []
    converged = False
    unverified = 0
    for k in range(1, max_iter + 1):
        unit = current.normalized()
        following = apply_mpo(build_diagonal_w(unit), unit, policy, method)
        step_error = following.truncation_error - unit.truncation_error
        log2_t = following.log2_norm()
        if not math.isfinite(log2_t):
            if not records:
                raise NonPositiveContraction(
                    "squared Pauli vector has no finite norm", iteration=k
                )
            logger.warning(
                "Norm collapsed; stopping before convergence",
                extra={"iteration": k, "log2_norm": log2_t},
            )
            break
        ratio_change = abs(1.0 - 2.0 ** (log2_t - previous))
        mantissa, exponent = overlap_log2(unit, following)
        alignment = mantissa.real * 2.0 ** (exponent - log2_t)
        residual = math.sqrt(max(0.0, 2.0 - 2.0 * alignment))
        record = NullityRecord(
            k=k,
            log2_norm=log2_t,
            nu=qubits + 2.0 * log2_t,
            bond=following.max_bond,
            truncation_error=step_error,
            ratio_change=ratio_change,
            residual=residual,
        )
        records.append(record)
        logger.debug(
            "Nullity iteration",
            extra={
                "iteration": k,
                "norm": record.norm,
                "nu": record.nu,
                "bond": record.bond,
                "residual": residual,
            },
        )
        if on_iteration is not None:
            on_iteration(record)
        current = following
        previous = log2_t
        allowed = 10.0 * max(epsilon, math.sqrt(max(step_error, 0.0)))
        if ratio_change <= epsilon and residual <= allowed:
            converged = True
            if stop_early:
                break
        elif ratio_change <= epsilon:
            logger.warning(
                "Norm ratio settled but fixed point is not verified",
                extra={"iteration": k, "residual": residual, "allowed": allowed},
            )
            growing = len(records) > 1 and residual > records[-2].residual
            unverified = unverified + 1 if growing else 0
            if unverified >= DIVERGENCE_STEPS:
                logger.warning(
                    "Residual keeps growing; stopping before convergence",
                    extra={"iteration": k, "residual": residual},
                )
                break
        else:
            unverified = 0
    return NullityTrace(
        qubits=qubits,
        log2_initial_norm=log2_initial,
        records=tuple(records),
        converged=converged,
        fixed_point=current.normalized(),
    )


def nullity(
    psi: MatrixProductState,
    policy: TruncationPolicy,
    epsilon: float = 1e-5,
    max_iter: int = 30,
    method: CompressionMethod = "density_matrix",
    pauli_policy: TruncationPolicy | None = None,
    on_iteration: IterationCallback | None = None,
) -> NullityResult:
    if policy.error_threshold > epsilon / 10:
        logger.warning(
            "Truncation threshold is above epsilon / 10",
            extra={"threshold": policy.error_threshold, "epsilon": epsilon},
        )
    p = build_pauli_vector(psi, pauli_policy)
    trace = iterate_fixed_point(
        p.mps,
        psi.n,
        policy,
        epsilon,
        max_iter,
        method=method,
        on_iteration=on_iteration,
    )
    nu = trace.final.nu
    logger.info(
        "Computed stabilizer nullity",
        extra={
            "qubits": psi.n,
            "nu": nu,
            "iterations": trace.iterations,
            "converged": trace.converged,
        },
    )
    return NullityResult(nu=nu, trace=trace, pauli=p)


def nk_lower_bounds(
    psi: MatrixProductState,
    policy: TruncationPolicy,
    k_max: int,
    method: CompressionMethod = "density_matrix",
) -> list[float]:
    p = build_pauli_vector(psi)
    trace = iterate_fixed_point(
        p.mps, psi.n, policy, 0.0, k_max, method=method, stop_early=False
    )
    return trace.estimates


def replica_limit_sequence(trace: NullityTrace) -> list[tuple[int, float]]:
    """(n, (n - 1) * M_n) for n = 2**k, read off the recorded norms."""
    n_qubits = trace.qubits
    # log2 of sum_a <P_a>**(2**(k+1)), starting from the purity sum 2**N
    log2_sum = n_qubits + 2.0 * trace.log2_initial_norm
    sequence = []
    for record in trace.records:
        log2_sum = 2.0 * record.log2_norm + 2.0 * log2_sum
        sequence.append((2**record.k, n_qubits - log2_sum))
    return sequence


def nullity_error_bound(k: int, magic_gap: float, nu: float) -> float:
    exponent = 2 ** (k + 1) - 2
    return 3.0 * math.log2(1.0 + (1.0 - magic_gap) ** exponent * 2.0**nu)


def extract_stabilizer_group(
    g: PauliVector,
    p: PauliVector,
    nu: float,
    rng_seed: int | np.random.Generator | None = None,
) -> StabilizerGroup:
    n = p.source_n
    target = n - int(round(nu))
    if not 0 <= target <= n:
        raise GroupStructureError(f"nullity {nu} is outside [0, {n}]", nu=nu)
    if target == 0:
        return StabilizerGroup(qubits=n, generators=())
    rng = np.random.default_rng(rng_seed)
    expected = nu - n
    basis = Gf2Basis()
    unit = g.mps.normalized()
    for _ in range(EXTRACTION_ROUNDS):
        batch = sample_batch(unit, target + 16, rng)
        off_weight = np.abs(batch.log2_probabilities - expected)
        if np.any(off_weight > SAMPLE_LOG2_TOLERANCE):
            raise GroupStructureError(
                "sampled codes are not uniform on a coset; fixed point unconverged",
                expected_log2_probability=expected,
                worst_deviation=float(off_weight.max()),
            )
        for configuration in batch.configurations:
            basis.add(bits_from_configuration(configuration))
        if basis.rank > target:
            raise GroupStructureError(
                f"sampled codes span rank {basis.rank}, expected {target}",
                rank=basis.rank,
                expected=target,
            )
        if basis.rank == target:
            break
    else:
        raise GroupStructureError(
            f"only {basis.rank} of {target} generators found",
            rank=basis.rank,
            expected=target,
        )

    generators = []
    for bits in basis.vectors:
        unsigned = PauliString(n, bits)
        value = p.expectation(unsigned)
        if abs(value) < SIGN_MAGNITUDE_FLOOR:
            raise GroupStructureError(
                f"{unsigned.label} has expectation {value:.3g}, too small for a sign",
                generator=unsigned.label,
                expectation=value,
            )
        generators.append(unsigned if value > 0 else -unsigned)
    for index, first in enumerate(generators):
        for second in generators[index + 1 :]:
            if not first.commutes(second):
                raise GroupStructureError(
                    f"generators {first} and {second} anticommute",
                    generators=[str(item) for item in generators],
                )
    group = StabilizerGroup(qubits=n, generators=tuple(generators))
    logger.info(
        "Extracted stabilizer group",
        extra={"qubits": n, "generators": len(generators)},
    )
    return group


def project_out(
    residual: MatrixProductState,
    fixed_point: MatrixProductState,
    log2_support: float,
    policy: TruncationPolicy,
    method: CompressionMethod = "svd",
) -> MatrixProductState:
    """residual - sqrt(support) * (fixed_point o residual), recompressed."""
    component = apply_mpo(build_diagonal_w(fixed_point), residual, policy, method)
    removed = component.scaled(log2_factor=0.5 * log2_support, sign=-1.0)
    projected, _ = compress(add_states(residual, removed), policy)
    return projected


def _sampled_codes(
    fixed_point: MatrixProductState,
    count: int,
    rng: np.random.Generator,
) -> list[int]:
    batch = sample_batch(fixed_point.normalized(), count, rng)
    return sorted({bits_from_configuration(row) for row in batch.configurations})


def _residual_weight(residual: MatrixProductState) -> float:
    log2_norm = residual.log2_norm()
    if not math.isfinite(log2_norm):
        return 0.0
    return float(2.0 ** (2.0 * log2_norm))


def magic_gap(
    psi: MatrixProductState,
    policy: TruncationPolicy,
    epsilon: float = 1e-5,
    max_iter: int = 30,
    method: CompressionMethod = "density_matrix",
    rng_seed: int | np.random.Generator | None = None,
) -> MagicGap:
    result = nullity(psi, policy, epsilon, max_iter, method)
    if not result.converged:
        raise ConvergenceError(
            "nullity iteration did not converge",
            partial=result,
            iterations=result.trace.iterations,
        )
    n = psi.n
    p = result.pauli
    residual = project_out(
        p.mps, result.trace.fixed_point, n - result.nu_rounded, policy
    )
    weight = _residual_weight(residual)
    if weight < epsilon:
        logger.info("State is a stabilizer state; magic gap set to 1")
        return MagicGap(
            value=1.0,
            stabilizer_state=True,
            representative=None,
            nullity=result,
            residual_weight=weight,
        )
    trace = iterate_fixed_point(residual, n, policy, epsilon, max_iter, method=method)
    if not trace.converged:
        logger.warning(
            "Residual iteration did not converge; gap taken from samples",
            extra={"iterations": trace.iterations},
        )
    rng = np.random.default_rng(rng_seed)
    best: PauliString | None = None
    best_value = 0.0
    for bits in _sampled_codes(trace.fixed_point, GAP_SAMPLES, rng):
        value = p.expectation(PauliString(n, bits))
        if abs(value) > abs(best_value):
            best_value = value
            best = PauliString(n, bits, 1 if value > 0 else -1)
    return MagicGap(
        value=1.0 - abs(best_value),
        stabilizer_state=False,
        representative=best,
        nullity=result,
        residual_weight=weight,
    )


def learn_spectrum_strata(
    psi: MatrixProductState,
    policy: TruncationPolicy,
    epsilon: float = 1e-5,
    max_strata: int = 8,
    max_iter: int = 30,
    method: CompressionMethod = "density_matrix",
    rng_seed: int | np.random.Generator | None = None,
) -> list[SpectrumStratum]:
    rng = np.random.default_rng(rng_seed)
    result = nullity(psi, policy, epsilon, max_iter, method)
    if not result.converged:
        raise ConvergenceError("nullity iteration did not converge", partial=[])
    n = psi.n
    p = result.pauli
    group = extract_stabilizer_group(result.fixed_point, p, result.nu, rng)
    stabilizers = group.basis()
    strata = [
        SpectrumStratum(
            level=0,
            magnitude=1.0,
            support_size=float(2 ** (n - result.nu_rounded)),
            fixed_point=result.fixed_point,
            representatives=(PauliString.identity(n),),
        )
    ]
    residual = project_out(
        p.mps, result.trace.fixed_point, n - result.nu_rounded, policy
    )
    while _residual_weight(residual) >= epsilon:
        if len(strata) >= max_strata:
            raise ConvergenceError(
                f"residual weight still above {epsilon:g} after {max_strata} strata",
                partial=strata,
                residual_weight=_residual_weight(residual),
            )
        trace = iterate_fixed_point(
            residual, n, policy, epsilon, max_iter, method=method
        )
        # the fixed point is uniform over K codes with T = K**-0.5
        log2_support = -2.0 * trace.final.log2_norm
        leaders: dict[int, PauliString] = {}
        magnitude = 0.0
        count = max(GAP_SAMPLES, 4 * int(round(2.0 ** min(log2_support, 10.0))))
        for bits in _sampled_codes(trace.fixed_point, count, rng):
            value = p.expectation(PauliString(n, bits))
            magnitude = max(magnitude, abs(value))
            leader = stabilizers.reduce(bits)
            if leader not in leaders:
                sign = 1 if p.expectation(PauliString(n, leader)) >= 0 else -1
                leaders[leader] = PauliString(n, leader, sign)
        if magnitude >= strata[-1].magnitude - epsilon:
            raise ConvergenceError(
                "stratum magnitudes stopped decreasing",
                partial=strata,
                magnitude=magnitude,
            )
        strata.append(
            SpectrumStratum(
                level=len(strata),
                magnitude=magnitude,
                support_size=float(2.0**log2_support),
                fixed_point=PauliVector(mps=trace.fixed_point, source_n=n),
                representatives=tuple(sorted(leaders.values())),
            )
        )
        logger.info(
            "Learned spectrum stratum",
            extra={"level": len(strata) - 1, "magnitude": magnitude},
        )
        residual = project_out(residual, trace.fixed_point, log2_support, policy)
    return strata
