"""
Arithmetic in GF(2^m) and exact Vandermonde solving for the shuffle codec.

Scalar operations work on plain integers in [0, 2^m); ``FieldElement`` wraps a
value with its field for the typed API. Word-vector operations (``scale``) are
vectorised with numpy through log/antilog tables for m <= 16 and fall back to
shift-and-reduce multiplication for larger fields.
"""

from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.exceptions import FieldError
from src.utils.logger import get_logger

logger = get_logger(__name__)

MAX_BITS = 32
TABLE_MAX_BITS = 16

# Irreducible polynomials per bit width; all but m=8 are primitive.
DEFAULT_POLYNOMIALS: Dict[int, int] = {
    1: 0b11,
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10001001,
    8: 0x11B,
    9: 0x211,
    10: 0x409,
    11: 0x805,
    12: 0x1053,
    13: 0x201B,
    14: 0x4443,
    15: 0x8003,
    16: 0x1100B,
    32: 0x100400007,
}


def reference_mul(a: int, b: int, poly: int, m: int) -> int:
    """Shift-and-reduce product of two field elements."""
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if (a >> m) & 1:
            a ^= poly
    return result


def _poly_mod(a: int, b: int) -> int:
    """Remainder of a modulo b as polynomials over GF(2)."""
    deg_b = b.bit_length() - 1
    while a and a.bit_length() - 1 >= deg_b:
        a ^= b << (a.bit_length() - 1 - deg_b)
    return a


@lru_cache(maxsize=None)
def is_irreducible(poly: int) -> bool:
    """Trial division by every polynomial of degree 1..deg/2."""
    degree = poly.bit_length() - 1
    if degree < 1:
        return False
    for d in range(1, degree // 2 + 1):
        for divisor in range(1 << d, 1 << (d + 1)):
            if _poly_mod(poly, divisor) == 0:
                return False
    return True


def _prime_factors(n: int) -> List[int]:
    factors = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            factors.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        factors.append(n)
    return factors


def _reference_pow(a: int, e: int, poly: int, m: int) -> int:
    result = 1
    while e:
        if e & 1:
            result = reference_mul(result, a, poly, m)
        a = reference_mul(a, a, poly, m)
        e >>= 1
    return result


@lru_cache(maxsize=None)
def _tables(m: int, poly: int) -> Tuple[np.ndarray, np.ndarray]:
    """Build (exp, log) tables from the smallest multiplicative generator."""
    order = (1 << m) - 1
    factors = _prime_factors(order) if order > 1 else []
    candidates = range(2, 1 << m) if m > 1 else range(1, 2)
    generator = next(
        g for g in candidates
        if all(_reference_pow(g, order // p, poly, m) != 1 for p in factors)
    )

    exp = np.zeros(2 * order, dtype=np.int64)
    log = np.zeros(1 << m, dtype=np.int64)
    x = 1
    for i in range(order):
        exp[i] = x
        log[x] = i
        x = reference_mul(x, generator, poly, m)
    exp[order:] = exp[:order]
    logger.debug(f"Built GF(2^{m}) tables, poly=0x{poly:x}, generator={generator}")
    return exp, log


@dataclass(frozen=True)
class FieldSpec:
    """GF(2^m) defined by an irreducible reduction polynomial."""
    m: int
    reduction_poly: int

    def __post_init__(self):
        if not 1 <= self.m <= MAX_BITS:
            raise FieldError(f"field width m={self.m} outside [1, {MAX_BITS}]")
        if self.reduction_poly.bit_length() - 1 != self.m:
            raise FieldError(
                f"reduction polynomial 0x{self.reduction_poly:x} does not have degree {self.m}"
            )
        if self.m <= TABLE_MAX_BITS and not is_irreducible(self.reduction_poly):
            raise FieldError(f"reduction polynomial 0x{self.reduction_poly:x} is reducible")

    @classmethod
    def default(cls, m: int) -> "FieldSpec":
        if m not in DEFAULT_POLYNOMIALS:
            raise FieldError(f"no default reduction polynomial for m={m}")
        return cls(m, DEFAULT_POLYNOMIALS[m])

    @property
    def size(self) -> int:
        return 1 << self.m

    @property
    def uses_tables(self) -> bool:
        return self.m <= TABLE_MAX_BITS

    def element(self, value: int) -> "FieldElement":
        return FieldElement(self, value)

    def _check(self, *values: int) -> None:
        for value in values:
            if not 0 <= value < self.size:
                raise FieldError(f"{value} is not an element of GF(2^{self.m})")

    def add(self, a: int, b: int) -> int:
        self._check(a, b)
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        self._check(a, b)
        if a == 0 or b == 0:
            return 0
        if not self.uses_tables:
            return reference_mul(a, b, self.reduction_poly, self.m)
        exp, log = _tables(self.m, self.reduction_poly)
        return int(exp[log[a] + log[b]])

    def inv(self, a: int) -> int:
        self._check(a)
        if a == 0:
            raise FieldError("zero has no inverse")
        if not self.uses_tables:
            return _reference_pow(a, self.size - 2, self.reduction_poly, self.m)
        exp, log = _tables(self.m, self.reduction_poly)
        order = self.size - 1
        return int(exp[(order - log[a]) % order])

    def pow(self, a: int, e: int) -> int:
        self._check(a)
        if e == 0:
            return 1
        if a == 0:
            return 0
        if not self.uses_tables:
            return _reference_pow(a, e, self.reduction_poly, self.m)
        exp, log = _tables(self.m, self.reduction_poly)
        return int(exp[(int(log[a]) * e) % (self.size - 1)])

    def scale(self, words: np.ndarray, c: int) -> np.ndarray:
        """Multiply every word of a vector by the scalar c."""
        self._check(c)
        if c == 0:
            return np.zeros_like(words)
        if c == 1:
            return words.copy()
        if not self.uses_tables:
            return np.array(
                [reference_mul(int(w), c, self.reduction_poly, self.m) for w in words],
                dtype=np.int64,
            )
        exp, log = _tables(self.m, self.reduction_poly)
        scaled = exp[log[words] + log[c]]
        return np.where(words == 0, 0, scaled)


@dataclass(frozen=True)
class FieldElement:
    field: FieldSpec
    value: int

    def __post_init__(self):
        if not 0 <= self.value < self.field.size:
            raise FieldError(f"{self.value} is not an element of GF(2^{self.field.m})")

    def __add__(self, other: "FieldElement") -> "FieldElement":
        return gf_add(self, other)

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        return gf_mul(self, other)

    def __int__(self) -> int:
        return self.value


def _same_field(a: FieldElement, b: FieldElement) -> FieldSpec:
    if a.field != b.field:
        raise FieldError(
            f"mismatched fields GF(2^{a.field.m}) and GF(2^{b.field.m})"
        )
    return a.field


def gf_add(a: FieldElement, b: FieldElement) -> FieldElement:
    field = _same_field(a, b)
    return FieldElement(field, a.value ^ b.value)


def gf_mul(a: FieldElement, b: FieldElement) -> FieldElement:
    field = _same_field(a, b)
    return FieldElement(field, field.mul(a.value, b.value))


def gf_inv(a: FieldElement) -> FieldElement:
    return FieldElement(a.field, a.field.inv(a.value))


def coefficient_alphas(field: FieldSpec, count: int) -> List[int]:
    """The first ``count`` nonzero field elements, alpha_i = i."""
    if count > field.size - 1:
        raise FieldError(
            f"GF(2^{field.m}) has only {field.size - 1} nonzero elements, "
            f"{count} distinct coefficients are required"
        )
    return list(range(1, count + 1))


def invert_matrix(field: FieldSpec, matrix: Sequence[Sequence[int]]) -> List[List[int]]:
    """Gauss-Jordan inverse of a square matrix over the field."""
    n = len(matrix)
    work = [list(row) + [int(i == j) for j in range(n)] for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = next((row for row in range(col, n) if work[row][col]), None)
        if pivot is None:
            raise FieldError("singular matrix")
        work[col], work[pivot] = work[pivot], work[col]
        inv_pivot = field.inv(work[col][col])
        work[col] = [field.mul(v, inv_pivot) for v in work[col]]
        for row in range(n):
            factor = work[row][col]
            if row != col and factor:
                work[row] = [
                    v ^ field.mul(factor, p) for v, p in zip(work[row], work[col])
                ]
    return [row[n:] for row in work]


def vandermonde_matrix(field: FieldSpec, alphas: Sequence[int], rows: int) -> List[List[int]]:
    """rows x len(alphas) matrix with entry (i, j) = alphas[j] ** i."""
    return [[field.pow(a, i) for a in alphas] for i in range(rows)]


@lru_cache(maxsize=4096)
def _vandermonde_inverse(field: FieldSpec, alphas: Tuple[int, ...]) -> List[List[int]]:
    return invert_matrix(field, vandermonde_matrix(field, alphas, len(alphas)))


def vandermonde_solve(
    field: FieldSpec,
    alphas: Sequence[Union[int, FieldElement]],
    rhs: Sequence[np.ndarray],
    n: Optional[int] = None,
) -> List[np.ndarray]:
    """
    Solve sum_j alphas[j]**i * u_j = rhs[i] for i = 0..n-1.

    Args:
        field: Coefficient field
        alphas: Generators; the first n are used and must be pairwise distinct
        rhs: n word vectors of equal length
        n: Number of rows and unknowns (defaults to len(rhs))

    Returns:
        List[np.ndarray]: the n solution word vectors u_0..u_{n-1}
    """
    n = len(rhs) if n is None else n
    if n > len(alphas):
        raise FieldError(f"{n} unknowns but only {len(alphas)} alphas")
    if n != len(rhs):
        raise FieldError(f"expected {n} right-hand sides, got {len(rhs)}")
    used = [int(a) for a in alphas[:n]]
    if len(set(used)) != n:
        raise FieldError("singular Vandermonde: coefficients are not distinct")
    lengths = {len(v) for v in rhs}
    if len(lengths) > 1:
        raise FieldError("right-hand side vectors differ in length")

    inverse = _vandermonde_inverse(field, tuple(used))
    zero = np.zeros(lengths.pop() if lengths else 0, dtype=np.int64)
    return [
        reduce(np.bitwise_xor, (field.scale(rhs[i], inverse[j][i]) for i in range(n)), zero)
        for j in range(n)
    ]
