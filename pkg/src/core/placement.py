"""
Map-task and Reduce-task placement.

Canonical Map placement deals the (padded) files to the size-r node subsets in
lexicographic order, eta1 consecutive files per subset; canonical Reduce
placement deals functions to the size-s subsets the same way. Non-integer
computation loads are realised as a split into two canonical sub-jobs.
"""

import json
import math
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from math import comb
from typing import Dict, FrozenSet, Iterable, List, Mapping, Tuple, Union

import numpy as np

from src.core.combinatorics import NodeSubset, enumerate_subsets, node_subset
from src.core.exceptions import JobValidationError
from src.utils.logger import get_logger

logger = get_logger(__name__)

Rational = Union[int, Fraction]


@dataclass(frozen=True)
class JobSpec:
    """Job parameters (K, Q, N, r, s, T) plus the divisibility bookkeeping."""
    K: int
    Q: int
    N: int
    r: Fraction
    s: int
    T: int

    def __post_init__(self):
        object.__setattr__(self, "r", Fraction(self.r))
        if self.K < 1:
            raise JobValidationError(f"K={self.K} must be positive")
        if not 1 <= self.r <= self.K:
            raise JobValidationError(f"computation load r={self.r} outside [1, K={self.K}]")
        if not 1 <= self.s <= self.K:
            raise JobValidationError(f"reduce replication s={self.s} outside [1, K={self.K}]")
        if self.Q < 1 or self.N < 1 or self.T < 1:
            raise JobValidationError("Q, N and T must be positive")

    @property
    def integer_r(self) -> bool:
        return self.r.denominator == 1

    def r_int(self) -> int:
        if not self.integer_r:
            raise JobValidationError(f"r={self.r} is not an integer")
        return int(self.r)

    @property
    def n_padded(self) -> int:
        """N-bar: the file count after padding to a multiple of C(K, r)."""
        return pad_files(self.N, self.K, self.r_int())[0]

    @property
    def eta1(self) -> int:
        return pad_files(self.N, self.K, self.r_int())[1]

    @property
    def eta2(self) -> int:
        batches = comb(self.K, self.s)
        if self.Q % batches:
            raise JobValidationError(
                f"Q={self.Q} is not a multiple of C(K={self.K}, s={self.s})={batches}; "
                f"nearest valid Q values are {nearest_multiples(self.Q, batches)}"
            )
        return self.Q // batches

    def describe(self) -> str:
        return f"K={self.K} Q={self.Q} N={self.N} r={self.r} s={self.s} T={self.T}"


def nearest_multiples(value: int, quantum: int) -> Tuple[int, ...]:
    """The multiples of ``quantum`` bracketing ``value`` (one entry if exact)."""
    below = (value // quantum) * quantum
    above = below if below == value else below + quantum
    return tuple(sorted({v for v in (below, above) if v > 0}))


def pad_files(N: int, K: int, r: int) -> Tuple[int, int]:
    """
    Number of files after injecting empty ones, and the batch size eta1.

    Returns:
        Tuple[int, int]: (N-bar, eta1) with N-bar = C(K, r) * ceil(N / C(K, r))
    """
    if N < 1 or not 1 <= r <= K:
        raise JobValidationError(f"cannot pad N={N} files for K={K}, r={r}")
    batches = comb(K, r)
    eta1 = -(-N // batches)
    return batches * eta1, eta1


@dataclass(frozen=True)
class FileAssignment:
    """
    Which nodes map which files.

    ``holders[n-1]`` is the subset of nodes that map file n. Files above
    ``n_real`` are injected padding files.
    """
    K: int
    holders: Tuple[NodeSubset, ...]
    n_real: int

    @property
    def n_files(self) -> int:
        return len(self.holders)

    @cached_property
    def batches(self) -> Dict[NodeSubset, Tuple[int, ...]]:
        grouped: Dict[NodeSubset, List[int]] = {}
        for n, subset in enumerate(self.holders, start=1):
            grouped.setdefault(subset, []).append(n)
        return {subset: tuple(files) for subset, files in sorted(grouped.items())}

    @cached_property
    def per_node(self) -> Dict[int, FrozenSet[int]]:
        mapped: Dict[int, set] = {k: set() for k in range(1, self.K + 1)}
        for n, subset in enumerate(self.holders, start=1):
            for k in subset:
                mapped[k].add(n)
        return {k: frozenset(files) for k, files in mapped.items()}

    def holders_of(self, n: int) -> NodeSubset:
        return self.holders[n - 1]

    def is_padding(self, n: int) -> bool:
        return n > self.n_real

    def levels(self) -> List[int]:
        """Distinct replication levels |holders(n)| present in the assignment."""
        return sorted({len(subset) for subset in self.holders})

    def computation_load(self) -> Fraction:
        """sum_k |M_k| / N-bar."""
        return Fraction(sum(len(subset) for subset in self.holders), self.n_files)

    def check_coverage(self) -> None:
        uncovered = [n for n, subset in enumerate(self.holders, start=1) if not subset]
        if uncovered:
            raise JobValidationError(f"files {uncovered[:5]} are mapped by no node")

    def to_json(self) -> str:
        """Canonical text form with sorted keys."""
        return json.dumps(
            {
                "K": self.K,
                "n_real": self.n_real,
                "batches": {",".join(map(str, s)): list(f) for s, f in self.batches.items()},
                "per_node": {str(k): sorted(f) for k, f in self.per_node.items()},
            },
            sort_keys=True,
        )

    @classmethod
    def from_per_node(
        cls, K: int, per_node: Mapping[int, Iterable[int]], n_files: int = None
    ) -> "FileAssignment":
        """Build an assignment from explicit M_k sets."""
        files = {n for mapped in per_node.values() for n in mapped}
        n_files = n_files if n_files is not None else max(files, default=0)
        holders: List[set] = [set() for _ in range(n_files)]
        for k, mapped in per_node.items():
            if not 1 <= k <= K:
                raise JobValidationError(f"node {k} outside [1, {K}]")
            for n in mapped:
                holders[n - 1].add(k)
        return cls(K, tuple(node_subset(h) for h in holders), n_files)


@dataclass(frozen=True)
class ReduceAssignment:
    """Which nodes reduce which functions; ``reducers[q-1]`` computes h_q."""
    K: int
    reducers: Tuple[NodeSubset, ...]

    @property
    def Q(self) -> int:
        return len(self.reducers)

    @cached_property
    def batches(self) -> Dict[NodeSubset, Tuple[int, ...]]:
        grouped: Dict[NodeSubset, List[int]] = {}
        for q, subset in enumerate(self.reducers, start=1):
            grouped.setdefault(subset, []).append(q)
        return {subset: tuple(funcs) for subset, funcs in sorted(grouped.items())}

    @cached_property
    def per_node(self) -> Dict[int, FrozenSet[int]]:
        assigned: Dict[int, set] = {k: set() for k in range(1, self.K + 1)}
        for q, subset in enumerate(self.reducers, start=1):
            for k in subset:
                assigned[k].add(q)
        return {k: frozenset(funcs) for k, funcs in assigned.items()}

    def reducers_of(self, q: int) -> NodeSubset:
        return self.reducers[q - 1]

    def to_json(self) -> str:
        return json.dumps(
            {
                "K": self.K,
                "batches": {",".join(map(str, s)): list(f) for s, f in self.batches.items()},
                "per_node": {str(k): sorted(f) for k, f in self.per_node.items()},
            },
            sort_keys=True,
        )


def _deal(K: int, size: int, count: int) -> Tuple[NodeSubset, ...]:
    subsets = enumerate_subsets(K, size)
    per_batch = count // len(subsets)
    return tuple(subset for subset in subsets for _ in range(per_batch))


def assign_map_tasks(spec: JobSpec) -> FileAssignment:
    """
    Canonical placement: files 1..N-bar dealt to size-r subsets, eta1 per subset.

    N is padded up to N-bar first; padding files are tagged through n_real.
    """
    r = spec.r_int()
    n_padded, eta1 = pad_files(spec.N, spec.K, r)
    if n_padded != spec.N:
        logger.warning(
            f"Injecting {n_padded - spec.N} empty files: N={spec.N} -> N-bar={n_padded}"
        )
    assignment = FileAssignment(spec.K, _deal(spec.K, r, n_padded), spec.N)
    logger.debug(f"Map placement for {spec.describe()}: eta1={eta1}")
    return assignment


def assign_reduce_tasks(spec: JobSpec) -> ReduceAssignment:
    """Canonical Reduce placement: eta2 functions per size-s subset."""
    eta2 = spec.eta2
    logger.debug(f"Reduce placement for {spec.describe()}: eta2={eta2}")
    return ReduceAssignment(spec.K, _deal(spec.K, spec.s, spec.Q))


def random_placement(spec: JobSpec, seed: int) -> FileAssignment:
    """Each file placed on an independent, uniformly random size-r subset."""
    r = spec.r_int()
    rng = np.random.default_rng(seed)
    holders = tuple(
        node_subset(int(k) + 1 for k in rng.choice(spec.K, size=r, replace=False))
        for _ in range(spec.N)
    )
    return FileAssignment(spec.K, holders, spec.N)


@dataclass(frozen=True)
class SubJob:
    """One side of a non-integer-r split: files dealt canonically at load r."""
    r: int
    files: Tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.files)


@dataclass(frozen=True)
class NonIntegerSplit:
    alpha: Fraction
    parts: Tuple[SubJob, ...]
    n_real: int

    @property
    def n_files(self) -> int:
        return sum(part.size for part in self.parts)


def split_noninteger_r(spec: JobSpec) -> NonIntegerSplit:
    """
    Split a job with fractional r into sub-jobs at floor(r) and ceil(r).

    alpha = ceil(r) - r of the files go to the floor side, rounded down to a
    multiple of C(K, floor(r)); the rest goes to the ceil side, padded up to a
    multiple of C(K, ceil(r)).
    """
    if spec.integer_r:
        r = spec.r_int()
        n_padded, _ = pad_files(spec.N, spec.K, r)
        return NonIntegerSplit(Fraction(1), (SubJob(r, tuple(range(1, n_padded + 1))),), spec.N)

    r_low, r_high = math.floor(spec.r), math.ceil(spec.r)
    alpha = r_high - spec.r
    low_quantum, high_quantum = comb(spec.K, r_low), comb(spec.K, r_high)
    low_size = math.floor(alpha * spec.N / low_quantum) * low_quantum
    remainder = spec.N - low_size
    high_size = -(-remainder // high_quantum) * high_quantum
    if low_size + high_size != spec.N:
        logger.warning(
            f"Non-integer r={spec.r}: injecting {low_size + high_size - spec.N} empty files"
        )
    low = SubJob(r_low, tuple(range(1, low_size + 1)))
    high = SubJob(r_high, tuple(range(low_size + 1, low_size + high_size + 1)))
    return NonIntegerSplit(alpha, (low, high), spec.N)


def assign_split_map_tasks(split: NonIntegerSplit, K: int) -> FileAssignment:
    """Deal each sub-job's files canonically and merge into one assignment."""
    holders: List[NodeSubset] = []
    for part in split.parts:
        if part.size:
            holders.extend(_deal(K, part.r, part.size))
    return FileAssignment(K, tuple(holders), split.n_real)
