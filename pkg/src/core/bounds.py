"""
Closed-form communication loads and the converse bounds, in exact rationals.
"""

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, NamedTuple, Sequence, Tuple, Union

from src.core.exceptions import JobValidationError
from src.core.placement import FileAssignment, JobSpec, split_noninteger_r

Rational = Union[int, Fraction]


def binom(n: int, k: int) -> int:
    """C(n, k), zero outside 0 <= k <= n."""
    if n < 0 or k < 0 or k > n:
        return 0
    return math.comb(n, k)


def _check_r(r: Rational, K: int) -> Fraction:
    r = Fraction(r)
    if not 1 <= r <= K:
        raise JobValidationError(f"computation load r={r} outside [1, K={K}]")
    return r


def l_uncoded(r: Rational, K: int) -> Fraction:
    """1 - r/K."""
    r = _check_r(r, K)
    return 1 - r / K


def l_coded(r: int, s: int, K: int) -> Fraction:
    """Load of the coded scheme at integer computation load r and reduce replication s."""
    if _check_r(r, K).denominator != 1:
        raise JobValidationError(f"l_coded needs an integer computation load, got r={r}")
    r = int(r)
    if not 1 <= s <= K:
        raise JobValidationError(f"reduce replication s={s} outside [1, K={K}]")
    numerator = sum(
        size * binom(K, size) * binom(size - 2, r - 1) * binom(r, size - s)
        for size in range(max(r + 1, s), min(r + s, K) + 1)
    )
    return Fraction(numerator, r * binom(K, r) * binom(K, s))


def l_coded_envelope(r: Rational, s: int, K: int) -> Fraction:
    """Linear interpolation of l_coded between floor(r) and ceil(r)."""
    r = _check_r(r, K)
    low, high = math.floor(r), math.ceil(r)
    if low == high:
        return l_coded(low, s, K)
    weight = r - low
    return (1 - weight) * l_coded(low, s, K) + weight * l_coded(high, s, K)


@dataclass(frozen=True)
class AProfile:
    """a[j-1] files are mapped at exactly j nodes, j = 1..K."""
    a: Tuple[int, ...]
    N: int
    K: int

    def __post_init__(self):
        if len(self.a) != self.K:
            raise JobValidationError(f"profile has {len(self.a)} entries, expected K={self.K}")
        if any(count < 0 for count in self.a):
            raise JobValidationError(f"profile {self.a} has negative counts")
        if sum(self.a) != self.N:
            raise JobValidationError(f"profile {self.a} does not sum to N={self.N}")

    def at(self, j: int) -> int:
        return self.a[j - 1]

    @property
    def computation_load(self) -> Fraction:
        return Fraction(sum(j * count for j, count in enumerate(self.a, start=1)), self.N)


def count_a_profile(fa: FileAssignment) -> AProfile:
    """Count the files by the size of their holder set."""
    fa.check_coverage()
    counts = [0] * fa.K
    for holders in fa.holders:
        counts[len(holders) - 1] += 1
    return AProfile(tuple(counts), fa.n_files, fa.K)


def canonical_profile(K: int, r: int, N: int) -> AProfile:
    counts = [0] * K
    counts[r - 1] = N
    return AProfile(tuple(counts), N, K)


def lower_bound_lemma1(profile: AProfile) -> Fraction:
    """sum_j (a_j / N) (K - j) / (K j); valid for s = 1."""
    K = profile.K
    return sum(
        (Fraction(count, profile.N) * Fraction(K - j, K * j)
         for j, count in enumerate(profile.a, start=1)),
        Fraction(0),
    )


def lower_bound_lemma2(profile: AProfile, s: int) -> Fraction:
    """
    Converse bound for reduce replication s.

    sum_j (a_j/N) sum_l C(K-j, l-j) C(j, l-s) / C(K, s) * (l-j)/(l-1), with l
    from max(j, s) to min(j+s, K); the l = j term is zero.
    """
    K = profile.K
    if not 1 <= s <= K:
        raise JobValidationError(f"reduce replication s={s} outside [1, K={K}]")
    total = Fraction(0)
    for j, count in enumerate(profile.a, start=1):
        if not count:
            continue
        inner = Fraction(0)
        for size in range(max(j, s), min(j + s, K) + 1):
            if size == j:
                continue
            inner += Fraction(
                binom(K - j, size - j) * binom(j, size - s) * (size - j),
                binom(K, s) * (size - 1),
            )
        total += Fraction(count, profile.N) * inner
    return total


class IdentityCheck(NamedTuple):
    lhs: int
    rhs: int
    equal: bool


def counting_identity(K: int, r: int, s: int) -> IdentityCheck:
    """Decoded values per function, summed over round sizes, against C(K-1, r)."""
    lhs = sum(
        binom(s - 1, size - r - 1) * binom(K - s, size - s)
        for size in range(max(r + 1, s), min(r + s, K) + 1)
    )
    rhs = binom(K - 1, r)
    return IdentityCheck(lhs, rhs, lhs == rhs)


class BoundsRow(NamedTuple):
    r: Fraction
    l_uncoded: Fraction
    l_coded: Fraction
    lemma_bound: Fraction


def split_profile(K: int, r: Rational, N: int) -> AProfile:
    """Profile of the (padded) placement realising computation load r."""
    split = split_noninteger_r(JobSpec(K, binom(K, 1), N, Fraction(r), 1, 1))
    counts = [0] * K
    for part in split.parts:
        counts[part.r - 1] += part.size
    return AProfile(tuple(counts), split.n_files, K)


def bounds_table(
    K: int, s: int, r_values: Iterable[Rational], N: int = 2520
) -> List[BoundsRow]:
    """Rows of (r, L_uncoded, L_coded envelope, converse bound at the placement's profile)."""
    rows = []
    for r in r_values:
        r = _check_r(r, K)
        rows.append(BoundsRow(
            r,
            l_uncoded(r, K),
            l_coded_envelope(r, s, K),
            lower_bound_lemma2(split_profile(K, r, N), s),
        ))
    return rows


def format_rational(value: Fraction) -> str:
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """CSV text with exact rationals rendered as p/q."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([
            format_rational(cell) if isinstance(cell, Fraction) else cell for cell in row
        ])
    return buffer.getvalue()
