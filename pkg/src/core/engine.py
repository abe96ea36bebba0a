"""
Deterministic Map / Shuffle / Reduce executor over a simulated multicast network.

The shuffle materialises a message log in canonical order (shuffle-subset size
ascending, subsets lexicographic, senders ascending, message index ascending)
and charges every multicast once, by its bit length, to its sender.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import comb
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config.settings import settings
from src.core.codec import (
    MulticastMessage,
    SegmentGroup,
    ValueKey,
    build_exclusive_sets,
    decode_messages,
    encode_node_messages,
    exclusive_keys,
    round_range,
    segment,
    select_field,
)
from src.core.combinatorics import NodeSubset, enumerate_subsets, subsets_containing
from src.core.exceptions import FieldError, InvariantViolation, JobValidationError, ShuffleError
from src.core.gf2m import FieldSpec
from src.core.placement import FileAssignment, JobSpec, ReduceAssignment
from src.utils.bits import check_payload, from_bits, zero_payload
from src.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class MappedValue:
    """One intermediate value handed to a reduce function."""
    file: int
    payload: bytes
    padding: bool = False


@dataclass(frozen=True)
class JobFunctions:
    """
    A MapReduce job.

    ``map_fn(n, file_bytes)`` returns the Q payloads of file n, one per
    function; ``reduce_fn(q, values)`` receives the N-bar values of function q
    ordered by file index.
    """
    name: str
    map_fn: Callable[[int, bytes], Sequence[bytes]]
    reduce_fn: Callable[[int, Sequence[MappedValue]], bytes]
    useful_bits: Optional[Callable[[bytes], int]] = None


class Provenance(Enum):
    COMPUTED = "computed"
    DECODED = "decoded"


class IntermediateStore:
    """Per-node (q, n) -> T-bit payload mapping with a provenance flag."""

    def __init__(self, K: int, T: int):
        self.K = K
        self.T = T
        self._values: Dict[int, Dict[ValueKey, Tuple[bytes, Provenance]]] = {
            k: {} for k in range(1, K + 1)
        }

    def put(
        self, node: int, q: int, n: int, payload: bytes,
        provenance: Provenance = Provenance.COMPUTED,
    ) -> None:
        check_payload(payload, self.T)
        self._values[node][(q, n)] = (payload, provenance)

    def get(self, node: int, q: int, n: int) -> bytes:
        try:
            return self._values[node][(q, n)][0]
        except KeyError:
            raise ShuffleError(f"node {node} does not hold v_({q},{n})") from None

    def has(self, node: int, q: int, n: int) -> bool:
        return (q, n) in self._values[node]

    def provenance(self, node: int, q: int, n: int) -> Provenance:
        return self._values[node][(q, n)][1]

    def file_count(self) -> int:
        """Highest file index held anywhere in the store."""
        return max((n for values in self._values.values() for _, n in values), default=0)

    def count(self, node: int, provenance: Optional[Provenance] = None) -> int:
        if provenance is None:
            return len(self._values[node])
        return sum(1 for _, p in self._values[node].values() if p is provenance)

    def copy(self) -> "IntermediateStore":
        clone = IntermediateStore(self.K, self.T)
        clone._values = {k: dict(values) for k, values in self._values.items()}
        return clone


class ShuffleStrategy(str, Enum):
    CODED = "coded"
    UNCODED = "uncoded"
    RANDOM_PLACEMENT_CODED = "random_placement_coded"


@dataclass
class LoadReport:
    """Bits put on the wire by one shuffle, with the exact normalised load."""
    strategy: str
    K: int
    Q: int
    N: int
    N_padded: int
    T: int
    r: Fraction
    s: int
    total_bits: int = 0
    useful_bits: int = 0
    message_count: int = 0
    per_round: Dict[int, int] = field(default_factory=dict)
    per_sender: Dict[int, int] = field(default_factory=dict)

    CSV_COLUMNS = ("strategy", "K", "r", "s", "Q", "N", "T", "total_bits", "load_num", "load_den")

    def record(self, message: MulticastMessage, round_key: int) -> None:
        self.total_bits += message.bit_length
        self.useful_bits += (
            message.bit_length if message.useful_bits is None else message.useful_bits
        )
        self.message_count += 1
        self.per_round[round_key] = self.per_round.get(round_key, 0) + message.bit_length
        self.per_sender[message.sender] = (
            self.per_sender.get(message.sender, 0) + message.bit_length
        )

    @property
    def load(self) -> Fraction:
        """total_bits / (Q N T) with the unpadded N."""
        return Fraction(self.total_bits, self.Q * self.N * self.T)

    @property
    def load_padded(self) -> Fraction:
        return Fraction(self.total_bits, self.Q * self.N_padded * self.T)

    @property
    def useful_load(self) -> Fraction:
        return Fraction(self.useful_bits, self.Q * self.N * self.T)

    def check(self) -> None:
        if sum(self.per_round.values()) != self.total_bits:
            raise InvariantViolation("per-round breakdown does not sum to the total")
        if sum(self.per_sender.values()) != self.total_bits:
            raise InvariantViolation("per-sender breakdown does not sum to the total")
        if not 0 <= self.load_padded <= self.K:
            raise InvariantViolation(f"load {self.load_padded} outside [0, K]")

    def csv_row(self) -> List[str]:
        load = self.load
        return [
            self.strategy, str(self.K), str(self.r), str(self.s), str(self.Q),
            str(self.N), str(self.T), str(self.total_bits),
            str(load.numerator), str(load.denominator),
        ]


@dataclass
class ShuffleOutcome:
    store: IntermediateStore
    report: LoadReport
    messages: List[MulticastMessage]

    def message_log(self) -> bytes:
        """Concatenated wire records in send order."""
        return b"".join(message.to_bytes() for message in self.messages)


@dataclass
class OracleReport:
    """Result of comparing reduce outputs against a single-machine evaluation."""
    passed: bool
    checked: int
    first_divergence: Optional[str] = None
    location: Optional[Tuple[int, ...]] = None


def default_field() -> FieldSpec:
    return FieldSpec(settings.engine.FIELD_BITS, settings.engine.FIELD_POLY)


def _workers(workers: Optional[int]) -> int:
    return max(1, workers if workers is not None else settings.engine.WORKERS)


def run_map_phase(
    spec: JobSpec,
    fa: FileAssignment,
    jf: JobFunctions,
    inputs: Sequence[bytes],
    workers: Optional[int] = None,
) -> IntermediateStore:
    """
    Evaluate every Map function and place its Q values at the file's holders.

    Args:
        spec: Job parameters
        fa: File assignment (files above fa.n_real are padding)
        jf: Job functions
        inputs: File contents; files 1..len(inputs), the rest are empty
        workers: Thread pool size (defaults to settings.engine.WORKERS)

    Returns:
        IntermediateStore: node k holds (q, n) for every q and every n it maps
    """
    fa.check_coverage()

    def map_file(n: int) -> List[bytes]:
        if fa.is_padding(n) or n > len(inputs):
            return [zero_payload(spec.T)] * spec.Q
        payloads = list(jf.map_fn(n, inputs[n - 1]))
        if len(payloads) != spec.Q:
            raise JobValidationError(
                f"{jf.name}: map of file {n} returned {len(payloads)} values, expected Q={spec.Q}"
            )
        for payload in payloads:
            check_payload(payload, spec.T)
        return payloads

    store = IntermediateStore(spec.K, spec.T)
    files = range(1, fa.n_files + 1)
    # map_fn is deterministic: evaluate once per file, store at every holder
    with ThreadPoolExecutor(max_workers=_workers(workers)) as pool:
        for n, payloads in zip(files, pool.map(map_file, files)):
            for k in fa.holders_of(n):
                for q, payload in enumerate(payloads, start=1):
                    store.put(k, q, n, payload)

    logger.info(f"Map phase done: {jf.name}, {fa.n_files} files, computation load {fa.computation_load()}")
    return store


class CodedShuffle:
    """Runs the coded rounds of every replication level present in a file assignment."""

    def __init__(
        self,
        spec: JobSpec,
        fa: FileAssignment,
        ra: ReduceAssignment,
        store: IntermediateStore,
        report: LoadReport,
        field: FieldSpec,
        pad: bool = False,
        useful_bits: Optional[Callable[[bytes], int]] = None,
    ):
        self.spec = spec
        self.fa = fa
        self.ra = ra
        self.store = store
        self.report = report
        self.field = field
        self.pad = pad
        self.useful_bits = useful_bits
        self.messages: List[MulticastMessage] = []

    def run(self) -> List[MulticastMessage]:
        for r in self.fa.levels():
            sizes = round_range(r, self.spec.s, self.spec.K)
            for size in sizes:
                for S in enumerate_subsets(self.spec.K, size):
                    self.run_round(S, r)
            logger.debug(f"Coded rounds for level r={r} over |S| in {list(sizes)} done")
        return self.messages

    def _field_for(self, segment_bits: int, n1: int, n2: int) -> FieldSpec:
        try:
            return select_field(segment_bits, n1, n2, self.field)
        except FieldError:
            if not self.pad or (1 << self.field.m) - 1 < n1:
                raise
            # messages get padded up to whole words
            return self.field

    def run_round(self, S: NodeSubset, r: int) -> None:
        """Encode, multicast and decode every message of shuffle subset S."""
        groups: Dict[NodeSubset, SegmentGroup] = {
            es.owner_subset: segment(es, pad=self.pad, useful_bits=self.useful_bits)
            for es in build_exclusive_sets(S, self.fa, self.ra, self.store, r=r)
        }
        if all(group.total_bits == 0 for group in groups.values()):
            return

        # recovered[j][S1][k]: segment of node k in group S1, decoded at node j
        recovered: Dict[int, Dict[NodeSubset, Dict[int, np.ndarray]]] = {j: {} for j in S}
        for k in S:
            own = [groups[S1] for S1 in subsets_containing(k, S, r)]
            segment_bits = max(group.segment_bits for group in own)
            if segment_bits == 0:
                continue
            field = self._field_for(segment_bits, len(own), comb(len(S) - 2, r - 1))
            messages = encode_node_messages(k, S, own, field, allow_padding=self.pad)
            for message in messages:
                self.messages.append(message)
                self.report.record(message, len(S))

            for j in S:
                if j == k:
                    continue
                local = {S1: group for S1, group in groups.items() if j in S1}
                decoded = decode_messages(j, k, S, messages, local, field, r)
                for S1, bits in decoded.items():
                    recovered[j].setdefault(S1, {})[k] = bits

        for j in S:
            for S1, by_sender in recovered[j].items():
                self._store_decoded(j, groups[S1], by_sender)

    def _store_decoded(
        self, j: int, group: SegmentGroup, by_sender: Dict[int, np.ndarray]
    ) -> None:
        if group.total_bits == 0:
            return
        length = group.segment_bits
        missing = [k for k in group.owner_subset if k not in by_sender]
        if missing:
            raise ShuffleError(
                f"node {j} received no segment from {missing} for {group.owner_subset}"
            )
        bits = np.concatenate(
            [by_sender[k][:length] for k in group.owner_subset]
        )[:group.total_bits]
        T = self.spec.T
        keys = exclusive_keys(group.shuffle_subset, group.owner_subset, self.fa, self.ra)
        for i, (q, n) in enumerate(keys):
            payload = from_bits(bits[i * T:(i + 1) * T])
            self.store.put(j, q, n, payload, Provenance.DECODED)


def _uncoded_messages(
    spec: JobSpec, fa: FileAssignment, ra: ReduceAssignment, store: IntermediateStore
) -> List[Tuple[int, NodeSubset, int, int]]:
    entries = []
    for q in range(1, ra.Q + 1):
        reducers = ra.reducers_of(q)
        for n in range(1, fa.n_files + 1):
            holders = fa.holders_of(n)
            requesters = tuple(k for k in reducers if k not in holders)
            if not requesters:
                continue
            if not holders:
                raise ShuffleError(f"v_({q},{n}) is held by no node")
            entries.append((holders[0], requesters, q, n))
    entries.sort()
    return entries


def run_shuffle(
    spec: JobSpec,
    fa: FileAssignment,
    ra: ReduceAssignment,
    store: IntermediateStore,
    strategy: ShuffleStrategy = ShuffleStrategy.CODED,
    useful_bits: Optional[Callable[[bytes], int]] = None,
    field: Optional[FieldSpec] = None,
) -> ShuffleOutcome:
    """
    Deliver to every node the values of the functions it reduces.

    Args:
        spec: Job parameters
        fa: File assignment
        ra: Reduce assignment
        store: Post-Map store; it is copied, not modified
        strategy: Coded rounds, uncoded unicast/multicast, or coded with zero padding
        useful_bits: Optional hook counting the meaningful prefix of a payload
        field: Preferred coefficient field (defaults to the configured one)

    Returns:
        ShuffleOutcome: augmented store, load report and message log
    """
    strategy = ShuffleStrategy(strategy)
    store = store.copy()
    report = LoadReport(
        strategy.value, spec.K, spec.Q, spec.N, fa.n_files, spec.T, spec.r, spec.s
    )
    if any(not holders for holders in fa.holders):
        raise ShuffleError("some files are mapped by no node")

    if strategy is ShuffleStrategy.UNCODED:
        messages = []
        for sender, requesters, q, n in _uncoded_messages(spec, fa, ra, store):
            payload = store.get(sender, q, n)
            message = MulticastMessage(
                sender, requesters, q, payload, spec.T,
                useful_bits(payload) if useful_bits else None,
            )
            messages.append(message)
            report.record(message, 0)
            for k in requesters:
                store.put(k, q, n, payload, Provenance.DECODED)
    else:
        shuffle = CodedShuffle(
            spec, fa, ra, store, report, field or default_field(),
            pad=strategy is ShuffleStrategy.RANDOM_PLACEMENT_CODED,
            useful_bits=useful_bits,
        )
        messages = shuffle.run()

    for k in range(1, spec.K + 1):
        for q in sorted(ra.per_node[k]):
            for n in range(1, fa.n_files + 1):
                if not store.has(k, q, n):
                    raise ShuffleError(f"after shuffle node {k} still lacks v_({q},{n})")

    report.check()
    logger.info(
        f"Shuffle ({strategy.value}) done: {report.message_count} messages, "
        f"{report.total_bits} bits, load {report.load}"
    )
    return ShuffleOutcome(store, report, messages)


def run_reduce_phase(
    spec: JobSpec,
    ra: ReduceAssignment,
    store: IntermediateStore,
    jf: JobFunctions,
    n_files: Optional[int] = None,
    workers: Optional[int] = None,
) -> Dict[int, Dict[int, bytes]]:
    """
    Every node k computes u_q for each q it reduces.

    Returns:
        Dict[int, Dict[int, bytes]]: node -> function -> output
    """
    n_files = n_files if n_files is not None else store.file_count()

    def reduce_node(k: int) -> Dict[int, bytes]:
        outputs = {}
        for q in sorted(ra.per_node[k]):
            values = [
                MappedValue(n, store.get(k, q, n), n > spec.N)
                for n in range(1, n_files + 1)
            ]
            outputs[q] = jf.reduce_fn(q, values)
        return outputs

    nodes = range(1, spec.K + 1)
    with ThreadPoolExecutor(max_workers=_workers(workers)) as pool:
        outputs = dict(zip(nodes, pool.map(reduce_node, nodes)))
    logger.info(f"Reduce phase done: {jf.name}, {sum(map(len, outputs.values()))} outputs")
    return outputs


def verify_against_oracle(
    spec: JobSpec,
    jf: JobFunctions,
    inputs: Sequence[bytes],
    outputs: Dict[int, Dict[int, bytes]],
    store: Optional[IntermediateStore] = None,
    n_files: Optional[int] = None,
) -> OracleReport:
    """
    Compare every u_q with h_q(g_q1(w_1), ..., g_qN(w_N)) evaluated directly.

    With a store, a divergent output is traced to the first stored value that
    differs from the direct map result, located as (node, q, n).
    """
    n_files = n_files if n_files is not None else max(len(inputs), spec.N)
    mapped = [
        list(jf.map_fn(n, inputs[n - 1])) if n <= min(spec.N, len(inputs))
        else [zero_payload(spec.T)] * spec.Q
        for n in range(1, n_files + 1)
    ]
    checked = 0
    for k in sorted(outputs):
        for q in sorted(outputs[k]):
            checked += 1
            expected = jf.reduce_fn(q, [
                MappedValue(n, mapped[n - 1][q - 1], n > spec.N)
                for n in range(1, n_files + 1)
            ])
            if outputs[k][q] == expected:
                continue
            location: Tuple[int, ...] = (k, q)
            detail = f"node {k} output u_{q} differs from the direct evaluation"
            if store is not None:
                for n in range(1, n_files + 1):
                    if store.has(k, q, n) and store.get(k, q, n) != mapped[n - 1][q - 1]:
                        location = (k, q, n)
                        detail += f"; stored v_({q},{n}) is corrupt"
                        break
            logger.warning(detail)
            return OracleReport(False, checked, detail, location)
    return OracleReport(True, checked)


@dataclass
class JobResult:
    outputs: Dict[int, Dict[int, bytes]]
    shuffle: ShuffleOutcome
    oracle: OracleReport

    @property
    def report(self) -> LoadReport:
        return self.shuffle.report


def run_job(
    spec: JobSpec,
    jf: JobFunctions,
    inputs: Sequence[bytes],
    fa: FileAssignment,
    ra: ReduceAssignment,
    strategy: ShuffleStrategy = ShuffleStrategy.CODED,
    field: Optional[FieldSpec] = None,
    workers: Optional[int] = None,
) -> JobResult:
    """Map, shuffle, reduce and check one job end to end."""
    store = run_map_phase(spec, fa, jf, inputs, workers)
    outcome = run_shuffle(spec, fa, ra, store, strategy, jf.useful_bits, field)
    outputs = run_reduce_phase(spec, ra, outcome.store, jf, fa.n_files, workers)
    oracle = verify_against_oracle(spec, jf, inputs, outputs, outcome.store, fa.n_files)
    return JobResult(outputs, outcome, oracle)

