"""
CodedTeraSort on the simulator.

Records are fixed-width (key, value) pairs. The key domain is split into Q
contiguous ranges; each Map task hashes its file's records into the Q ranges,
each range is serialised into a length-prefixed payload padded to a job-wide
T, and node k sorts range k after the shuffle.
"""

import bisect
from dataclasses import dataclass, field
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config.settings import settings
from src.core.engine import (
    JobFunctions,
    LoadReport,
    MappedValue,
    ShuffleOutcome,
    ShuffleStrategy,
    run_map_phase,
    run_reduce_phase,
    run_shuffle,
)
from src.core.exceptions import JobValidationError
from src.core.placement import JobSpec, assign_map_tasks, assign_reduce_tasks
from src.utils.logger import get_logger

logger = get_logger(__name__)

LENGTH_PREFIX = 4


@dataclass(frozen=True)
class RecordFormat:
    key_bytes: int = 10
    value_bytes: int = 90

    @property
    def record_bytes(self) -> int:
        return self.key_bytes + self.value_bytes

    @property
    def domain_max(self) -> int:
        return (1 << (8 * self.key_bytes)) - 1


@dataclass(frozen=True)
class KVPair:
    key: int
    value: bytes

    def to_bytes(self, fmt: RecordFormat) -> bytes:
        return self.key.to_bytes(fmt.key_bytes, "big") + self.value

    @classmethod
    def from_bytes(cls, record: bytes, fmt: RecordFormat) -> "KVPair":
        return cls(int.from_bytes(record[:fmt.key_bytes], "big"), bytes(record[fmt.key_bytes:]))


@dataclass(frozen=True)
class KeyPartition:
    """Q contiguous key ranges; range q is [bounds[q-1], bounds[q])."""
    boundaries: Tuple[int, ...]
    domain_max: int

    @property
    def Q(self) -> int:
        return len(self.boundaries) + 1

    def ranges(self) -> List[Tuple[int, int]]:
        edges = (0,) + self.boundaries + (self.domain_max + 1,)
        return list(zip(edges[:-1], edges[1:]))

    def partition_of(self, key: int) -> int:
        """1-based index of the range holding ``key``."""
        return bisect.bisect_right(self.boundaries, key) + 1


def partition_key_domain(domain_max: int, Q: int) -> KeyPartition:
    """Split [0, domain_max] into Q near-equal contiguous ranges."""
    if Q < 1:
        raise JobValidationError(f"Q={Q} must be positive")
    if Q > domain_max + 1:
        raise JobValidationError(f"cannot split {domain_max + 1} keys into Q={Q} ranges")
    size = domain_max + 1
    return KeyPartition(tuple(i * size // Q for i in range(1, Q)), domain_max)


def generate_records(count: int, fmt: RecordFormat, seed: int) -> bytes:
    """Seeded uniform random records, concatenated."""
    rng = np.random.default_rng(seed)
    return rng.bytes(count * fmt.record_bytes)


def split_into_files(data: bytes, n_files: int, fmt: RecordFormat) -> List[bytes]:
    """Cut the record stream into n_files contiguous files of near-equal record counts."""
    count = len(data) // fmt.record_bytes
    bounds = np.linspace(0, count, n_files + 1).astype(int)
    return [
        data[bounds[i] * fmt.record_bytes:bounds[i + 1] * fmt.record_bytes]
        for i in range(n_files)
    ]


def hash_map_fn(data: bytes, partition: KeyPartition, fmt: RecordFormat) -> List[bytes]:
    """
    Hash every record of a file into its key range.

    Returns:
        List[bytes]: Q groups, each the concatenation of its records in input order
    """
    width = fmt.record_bytes
    if len(data) % width:
        raise JobValidationError(
            f"file of {len(data)} bytes holds a torn record (record width {width})"
        )
    groups: List[List[bytes]] = [[] for _ in range(partition.Q)]
    for offset in range(0, len(data), width):
        record = data[offset:offset + width]
        key = int.from_bytes(record[:fmt.key_bytes], "big")
        groups[partition.partition_of(key) - 1].append(record)
    return [b"".join(group) for group in groups]


def payload_size(max_group_bytes: int, r: int) -> int:
    """Bytes per padded group: length prefix plus the largest group, rounded up to a multiple of r."""
    size = LENGTH_PREFIX + max_group_bytes
    return -(-size // r) * r


def encode_group(group: bytes, size: int) -> bytes:
    return len(group).to_bytes(LENGTH_PREFIX, "big") + group + bytes(size - LENGTH_PREFIX - len(group))


def decode_group(payload: bytes) -> bytes:
    length = int.from_bytes(payload[:LENGTH_PREFIX], "big")
    return payload[LENGTH_PREFIX:LENGTH_PREFIX + length]


def useful_bits(payload: bytes) -> int:
    """Length prefix plus the group itself; the rest is padding."""
    return 8 * (LENGTH_PREFIX + int.from_bytes(payload[:LENGTH_PREFIX], "big"))


def sort_reduce_fn(q: int, values: Sequence[MappedValue], fmt: RecordFormat) -> bytes:
    """Stable sort of the partition's records by unsigned key."""
    width = fmt.record_bytes
    records = []
    for value in values:
        if value.padding:
            continue
        group = decode_group(value.payload)
        records.extend(group[i:i + width] for i in range(0, len(group), width))
    records.sort(key=lambda record: record[:fmt.key_bytes])
    return b"".join(records)


def reference_sort(data: bytes, fmt: RecordFormat) -> bytes:
    """Single-machine stable sort of the whole record stream."""
    width = fmt.record_bytes
    records = [data[i:i + width] for i in range(0, len(data), width)]
    records.sort(key=lambda record: record[:fmt.key_bytes])
    return b"".join(records)


@dataclass
class SortJobConfig:
    K: int
    r: int
    records: int = field(default_factory=lambda: settings.sort.RECORDS)
    key_bytes: int = field(default_factory=lambda: settings.sort.KEY_BYTES)
    value_bytes: int = field(default_factory=lambda: settings.sort.VALUE_BYTES)
    seed: int = field(default_factory=lambda: settings.sort.SEED)
    strategy: ShuffleStrategy = ShuffleStrategy.CODED
    workers: Optional[int] = None

    @property
    def fmt(self) -> RecordFormat:
        return RecordFormat(self.key_bytes, self.value_bytes)


@dataclass
class SortResult:
    output: bytes
    coded: LoadReport
    uncoded: LoadReport
    verified: bool
    T: int

    @property
    def report(self) -> LoadReport:
        return self.coded


def sort_job(partition: KeyPartition, fmt: RecordFormat, size: int) -> JobFunctions:
    def map_fn(n: int, data: bytes) -> List[bytes]:
        return [encode_group(group, size) for group in hash_map_fn(data, partition, fmt)]

    def reduce_fn(q: int, values: Sequence[MappedValue]) -> bytes:
        return sort_reduce_fn(q, values, fmt)

    return JobFunctions("coded-terasort", map_fn, reduce_fn, useful_bits)


SORT_STRATEGIES = (ShuffleStrategy.CODED, ShuffleStrategy.UNCODED)


def run_coded_sort(config: SortJobConfig) -> SortResult:
    """
    Sort ``config.records`` seeded records on K nodes at computation load r.

    Map runs once; the coded and the uncoded shuffle both start from the same
    post-Map store so their loads are directly comparable. The output is taken
    from the shuffle named by ``config.strategy`` and checked against a
    single-machine sort.

    Args:
        config: Cluster size, computation load, record shape and seed

    Returns:
        SortResult: sorted output, both load reports and the oracle verdict
    """
    strategy = ShuffleStrategy(config.strategy)
    if strategy not in SORT_STRATEGIES:
        raise JobValidationError(
            f"sort supports the coded or uncoded shuffle, got {strategy.value}"
        )
    K, r, fmt = config.K, config.r, config.fmt
    N = comb(K, r)
    data = generate_records(config.records, fmt, config.seed)
    files = split_into_files(data, N, fmt)
    partition = partition_key_domain(fmt.domain_max, K)

    largest = max(
        (len(group) for f in files for group in hash_map_fn(f, partition, fmt)), default=0
    )
    size = payload_size(largest, r)
    spec = JobSpec(K, K, N, r, 1, 8 * size)
    logger.info(
        f"Sorting {config.records} records: K={K} r={r} N={N}, "
        f"largest group {largest} bytes, T={spec.T}"
    )

    jf = sort_job(partition, fmt, size)
    fa = assign_map_tasks(spec)
    ra = assign_reduce_tasks(spec)
    store = run_map_phase(spec, fa, jf, files, config.workers)
    outcomes: Dict[ShuffleStrategy, ShuffleOutcome] = {
        each: run_shuffle(spec, fa, ra, store, each, useful_bits)
        for each in SORT_STRATEGIES
    }
    chosen = outcomes[strategy]
    outputs = run_reduce_phase(spec, ra, chosen.store, jf, fa.n_files, config.workers)

    output = b"".join(
        outputs[ra.reducers_of(q)[0]][q] for q in range(1, spec.Q + 1)
    )
    verified = output == reference_sort(data, fmt)
    coded, uncoded = outcomes[ShuffleStrategy.CODED].report, outcomes[ShuffleStrategy.UNCODED].report
    if verified:
        logger.info(
            f"Sort verified: coded load {coded.load} vs uncoded {uncoded.load} "
            f"(useful {coded.useful_load} vs {uncoded.useful_load})"
        )
    else:
        logger.error("Sorted output differs from the single-machine sort")
    return SortResult(output, coded, uncoded, verified, spec.T)
