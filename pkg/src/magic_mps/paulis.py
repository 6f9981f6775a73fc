from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import reduce

import numpy as np
import numpy.typing as npt

# symbol = 2 * z + x
PAULI_LABELS = "IXZY"
PAULI_MATRICES = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[1, 0], [0, -1]],
        [[0, -1j], [1j, 0]],
    ],
    dtype=np.complex128,
)
PAULI_MATRICES.setflags(write=False)


def symbol_commutes(a: int, b: int) -> bool:
    return ((a & 1) * (b >> 1) + (a >> 1) * (b & 1)) % 2 == 0


COMMUTATION_SIGNS = np.array(
    [[1.0 if symbol_commutes(a, b) else -1.0 for b in range(4)] for a in range(4)]
)
COMMUTATION_SIGNS.setflags(write=False)


def _x_mask(n: int) -> int:
    return int("01" * n, 2) if n else 0


def x_part(bits: int, n: int) -> int:
    return bits & _x_mask(n)


def z_part(bits: int, n: int) -> int:
    return (bits >> 1) & _x_mask(n)


def symplectic_product(a: int, b: int, n: int) -> int:
    """0 when the two encoded strings commute, 1 when they anticommute."""
    overlap = (x_part(a, n) & z_part(b, n)) ^ (z_part(a, n) & x_part(b, n))
    return overlap.bit_count() & 1


@dataclass(frozen=True, order=True)
class PauliString:
    """Signed Pauli string; bits 2j and 2j+1 hold x_j and z_j of site j."""

    n: int
    bits: int
    sign: int = 1

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("a Pauli string needs at least one site")
        if self.bits < 0 or self.bits >> (2 * self.n):
            raise ValueError(f"code {self.bits} does not fit {self.n} sites")
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")

    @classmethod
    def from_symbols(cls, symbols: Sequence[int], sign: int = 1) -> PauliString:
        bits = 0
        for site, symbol in enumerate(symbols):
            if not 0 <= symbol < 4:
                raise ValueError(f"Pauli symbol {symbol} out of range")
            bits |= int(symbol) << (2 * site)
        return cls(len(symbols), bits, sign)

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        text = label.strip()
        sign = 1
        if text and text[0] in "+-":
            sign = -1 if text[0] == "-" else 1
            text = text[1:]
        try:
            symbols = [PAULI_LABELS.index(char) for char in text.upper()]
        except ValueError:
            raise ValueError(f"Invalid Pauli label: {label!r}") from None
        return cls.from_symbols(symbols, sign)

    @classmethod
    def from_code_index(cls, index: int, n: int, sign: int = 1) -> PauliString:
        symbols = [(index >> (2 * (n - 1 - site))) & 3 for site in range(n)]
        return cls.from_symbols(symbols, sign)

    @classmethod
    def identity(cls, n: int) -> PauliString:
        return cls(n, 0)

    @classmethod
    def single(cls, n: int, site: int, label: str) -> PauliString:
        symbols = [0] * n
        symbols[site] = PAULI_LABELS.index(label)
        return cls.from_symbols(symbols)

    @property
    def symbols(self) -> tuple[int, ...]:
        return tuple((self.bits >> (2 * site)) & 3 for site in range(self.n))

    @property
    def label(self) -> str:
        return "".join(PAULI_LABELS[symbol] for symbol in self.symbols)

    @property
    def weight(self) -> int:
        return sum(1 for symbol in self.symbols if symbol)

    @property
    def code_index(self) -> int:
        """Row-major index into a Pauli-basis vector with site 0 most significant."""
        index = 0
        for symbol in self.symbols:
            index = 4 * index + symbol
        return index

    def unsigned(self) -> PauliString:
        return PauliString(self.n, self.bits)

    def __str__(self) -> str:
        return ("+" if self.sign > 0 else "-") + self.label

    def __neg__(self) -> PauliString:
        return PauliString(self.n, self.bits, -self.sign)

    def commutes(self, other: PauliString) -> bool:
        self._check_length(other)
        return symplectic_product(self.bits, other.bits, self.n) == 0

    def multiply(self, other: PauliString) -> tuple[PauliString, complex]:
        """self * other = phase * result, result carrying a +1 sign."""
        self._check_length(other)
        n = self.n
        x1, z1 = x_part(self.bits, n), z_part(self.bits, n)
        x2, z2 = x_part(other.bits, n), z_part(other.bits, n)
        x3, z3 = x1 ^ x2, z1 ^ z2
        power = (
            (x1 & z1).bit_count()
            + (x2 & z2).bit_count()
            - (x3 & z3).bit_count()
            + 2 * (z1 & x2).bit_count()
        ) % 4
        phase = (1, 1j, -1, -1j)[power] * self.sign * other.sign
        return PauliString(n, self.bits ^ other.bits), phase

    def __mul__(self, other: PauliString) -> PauliString:
        result, phase = self.multiply(other)
        if phase not in (1, -1):
            raise ValueError(
                f"{self} and {other} anticommute; product is not Hermitian"
            )
        return PauliString(result.n, result.bits, int(phase.real))

    def to_matrix(self) -> npt.NDArray[np.complex128]:
        factors = [PAULI_MATRICES[symbol] for symbol in self.symbols]
        return self.sign * reduce(np.kron, factors)

    def _check_length(self, other: PauliString) -> None:
        if other.n != self.n:
            raise ValueError(f"length mismatch: {self.n} vs {other.n}")


def bits_from_configuration(configuration: Iterable[int]) -> int:
    bits = 0
    for site, symbol in enumerate(configuration):
        bits |= int(symbol) << (2 * site)
    return bits


def bits_from_code_index(index: int, n: int) -> int:
    bits = 0
    for site in range(n):
        bits |= ((index >> (2 * (n - 1 - site))) & 3) << (2 * site)
    return bits


class Gf2Basis:
    """Row-echelon basis of binary vectors stored as ints, one pivot per leading bit."""

    def __init__(self, vectors: Iterable[int] = ()) -> None:
        self._pivots: dict[int, int] = {}
        for vector in vectors:
            self.add(vector)

    @property
    def rank(self) -> int:
        return len(self._pivots)

    @property
    def vectors(self) -> list[int]:
        return [self._pivots[bit] for bit in sorted(self._pivots, reverse=True)]

    def reduce(self, vector: int) -> int:
        """Unique remainder of vector modulo the span (its coset leader)."""
        for bit in sorted(self._pivots, reverse=True):
            if vector >> bit & 1:
                vector ^= self._pivots[bit]
        return vector

    def contains(self, vector: int) -> bool:
        return self.reduce(vector) == 0

    def add(self, vector: int) -> bool:
        remainder = self.reduce(vector)
        if remainder == 0:
            return False
        self._pivots[remainder.bit_length() - 1] = remainder
        return True

    def span_equals(self, other: Gf2Basis) -> bool:
        if self.rank != other.rank:
            return False
        return all(self.contains(vector) for vector in other.vectors)


def generators_commute(generators: Sequence[PauliString]) -> bool:
    for index, first in enumerate(generators):
        for second in generators[index + 1 :]:
            if not first.commutes(second):
                return False
    return True
