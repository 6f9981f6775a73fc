from __future__ import annotations

import logging
import math
import sys
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import scipy.linalg

logger = logging.getLogger(__name__)

DenseTensor = npt.NDArray[np.complex128]

TIE_TOLERANCE = 1e-12
NUMERICAL_FLOOR = 1e-14
UNBOUNDED_RANK = sys.maxsize


@dataclass(frozen=True)
class TruncationPolicy:
    max_rank: int = UNBOUNDED_RANK
    error_threshold: float = 0.0

    def __post_init__(self) -> None:
        if self.max_rank < 1:
            raise ValueError("max_rank must be >= 1")
        if self.error_threshold < 0:
            raise ValueError("error_threshold must be >= 0")

    @classmethod
    def exact(cls) -> TruncationPolicy:
        return cls()

    def relaxed(
        self, rank_factor: int = 2, error_factor: float = 0.1
    ) -> TruncationPolicy:
        if self.max_rank >= UNBOUNDED_RANK // rank_factor:
            max_rank = UNBOUNDED_RANK
        else:
            max_rank = self.max_rank * rank_factor
        return TruncationPolicy(max_rank, self.error_threshold * error_factor)

    def describe(self) -> dict[str, float | int | None]:
        return {
            "max_rank": None if self.max_rank == UNBOUNDED_RANK else self.max_rank,
            "error_threshold": self.error_threshold,
        }


@dataclass(frozen=True, eq=False)
class SvdResult:
    u: DenseTensor
    singular_values: npt.NDArray[np.float64]
    vdag: DenseTensor
    truncation_error: float

    @property
    def rank(self) -> int:
        return int(self.singular_values.shape[0])

    def reconstruct(self) -> DenseTensor:
        row_shape = self.u.shape[:-1]
        col_shape = self.vdag.shape[1:]
        u = self.u.reshape(-1, self.rank)
        vdag = self.vdag.reshape(self.rank, -1)
        return ((u * self.singular_values) @ vdag).reshape(row_shape + col_shape)


def as_tensor(values: npt.ArrayLike) -> DenseTensor:
    tensor = np.asarray(values, dtype=np.complex128)
    if tensor.ndim and min(tensor.shape) < 1:
        raise ValueError(f"tensor dimensions must be >= 1, got {tensor.shape}")
    tensor.setflags(write=False)
    return tensor


def contract(
    a: npt.ArrayLike,
    b: npt.ArrayLike,
    pairs: Sequence[tuple[int, int]],
) -> DenseTensor:
    left = np.asarray(a, dtype=np.complex128)
    right = np.asarray(b, dtype=np.complex128)
    for axis_a, axis_b in pairs:
        if left.shape[axis_a] != right.shape[axis_b]:
            raise ValueError(
                f"cannot pair index {axis_a} (dim {left.shape[axis_a]}) "
                f"with index {axis_b} (dim {right.shape[axis_b]})"
            )
    axes_a = [axis for axis, _ in pairs]
    axes_b = [axis for _, axis in pairs]
    return np.tensordot(left, right, axes=(axes_a, axes_b))


def truncation_rank(
    singular_values: npt.NDArray[np.float64],
    policy: TruncationPolicy,
) -> tuple[int, float]:
    """Kept rank and relative discarded weight for a nonincreasing spectrum.

    The threshold bounds the discarded squared weight relative to the total,
    so [1, 1e-8] at 1e-12 keeps one value.
    """
    size = int(singular_values.shape[0])
    if size == 0:
        return 0, 0.0
    weights = singular_values**2
    total = float(weights.sum())
    if total <= 0.0:
        return 1, 0.0
    # discarded[r] is the weight dropped when keeping r values
    discarded = np.concatenate([np.cumsum(weights[::-1])[::-1], [0.0]])
    floor = NUMERICAL_FLOOR * singular_values[0]
    nonzero = int(np.count_nonzero(singular_values > floor))
    limit = min(policy.max_rank, size, max(1, nonzero))
    allowed = policy.error_threshold * total
    rank = int(np.argmax(discarded <= allowed))
    rank = max(1, min(rank, limit))
    cutoff = singular_values[rank - 1]
    while rank < limit:
        if abs(singular_values[rank] - cutoff) > TIE_TOLERANCE * singular_values[0]:
            break
        rank += 1
    return rank, float(discarded[rank] / total)


def svd_truncated(
    t: npt.ArrayLike,
    row_axes: Sequence[int],
    policy: TruncationPolicy,
) -> SvdResult:
    tensor = np.asarray(t, dtype=np.complex128)
    rows = [axis % tensor.ndim for axis in row_axes]
    cols = [axis for axis in range(tensor.ndim) if axis not in rows]
    if not rows or not cols:
        raise ValueError("both index groups of an SVD split must be nonempty")
    row_shape = tuple(tensor.shape[axis] for axis in rows)
    col_shape = tuple(tensor.shape[axis] for axis in cols)
    matrix = np.transpose(tensor, rows + cols).reshape(
        math.prod(row_shape), math.prod(col_shape)
    )
    u, s, vdag = matrix_svd(matrix)
    rank, error = truncation_rank(s, policy)
    return SvdResult(
        u=u[:, :rank].reshape(row_shape + (rank,)),
        singular_values=s[:rank],
        vdag=vdag[:rank].reshape((rank,) + col_shape),
        truncation_error=error,
    )


def matrix_svd(
    matrix: npt.NDArray[np.complex128],
) -> tuple[DenseTensor, npt.NDArray[np.float64], DenseTensor]:
    try:
        return scipy.linalg.svd(
            matrix, full_matrices=False, lapack_driver="gesdd", check_finite=False
        )
    except np.linalg.LinAlgError:
        logger.warning(
            "gesdd did not converge; retrying with gesvd",
            extra={"shape": matrix.shape},
        )
        return scipy.linalg.svd(
            matrix, full_matrices=False, lapack_driver="gesvd", check_finite=False
        )


def qr_positive(
    matrix: npt.NDArray[np.complex128],
) -> tuple[DenseTensor, DenseTensor]:
    q, r = scipy.linalg.qr(matrix, mode="economic", check_finite=False)
    # fix the gauge so R has a nonnegative diagonal
    diagonal = np.diagonal(r)
    phases = np.exp(1j * np.angle(diagonal))
    return q * phases, (r.T * phases.conj()).T


def rq_positive(
    matrix: npt.NDArray[np.complex128],
) -> tuple[DenseTensor, DenseTensor]:
    q, r = qr_positive(matrix.conj().T)
    return r.conj().T, q.conj().T
