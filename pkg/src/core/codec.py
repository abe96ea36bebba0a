"""
The coded shuffle: exclusive sets, segmentation, Vandermonde encoding of the
multicast messages and their decoding.

Within a shuffle subset S every size-r owner subset S1 holds an exclusive set
of intermediate values that all of S minus S1 need. Its concatenated payload
is split into r segments, one per owner. Node k combines its n1 segments into
n2 messages with the rows of a Vandermonde matrix; a receiver j cancels the
segments it already knows and solves the remaining n2 x n2 system. Coding is
word-wise over GF(2^m); when n2 = 1 only the all-ones row is used and the
message is a plain XOR.
"""

import struct
from dataclasses import dataclass, field as dataclass_field
from functools import reduce
from itertools import combinations
from math import comb, gcd
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.core.combinatorics import (
    NodeSubset,
    complement_indices,
    subset_bitmask,
    subset_from_bitmask,
    subsets_containing,
)
from src.core.exceptions import CodecError, DecodeError, FieldError, JobValidationError
from src.core.gf2m import TABLE_MAX_BITS, FieldSpec, coefficient_alphas, vandermonde_solve
from src.core.placement import FileAssignment, ReduceAssignment
from src.utils.bits import bits_to_words, from_bits, pad_bits, to_bits, words_to_bits

ValueKey = Tuple[int, int]


@dataclass(frozen=True)
class ExclusiveSet:
    """Values known exactly by ``owner_subset`` and needed by the rest of ``shuffle_subset``."""
    shuffle_subset: NodeSubset
    owner_subset: NodeSubset
    values: Tuple[Tuple[int, int, bytes], ...]
    T: int

    @property
    def keys(self) -> Tuple[ValueKey, ...]:
        return tuple((q, n) for q, n, _ in self.values)

    @property
    def total_bits(self) -> int:
        return len(self.values) * self.T

    def payload_bits(self) -> np.ndarray:
        if not self.values:
            return np.zeros(0, dtype=np.uint8)
        return np.concatenate([to_bits(payload, self.T) for _, _, payload in self.values])


@dataclass(frozen=True)
class SegmentGroup:
    """An exclusive-set payload split into one segment per owner, in owner order."""
    shuffle_subset: NodeSubset
    owner_subset: NodeSubset
    segments: Tuple[np.ndarray, ...] = dataclass_field(compare=False)
    total_bits: int
    useful: Tuple[int, ...] = ()

    @property
    def segment_bits(self) -> int:
        return int(self.segments[0].size) if self.segments else 0

    def segment_for(self, node: int) -> np.ndarray:
        return self.segments[self.owner_subset.index(node)]

    def useful_for(self, node: int) -> int:
        if not self.useful:
            return self.segment_bits
        return self.useful[self.owner_subset.index(node)]

    def concatenate(self) -> np.ndarray:
        """The exclusive-set payload U, with segmentation padding removed."""
        return np.concatenate(self.segments)[:self.total_bits]


@dataclass(frozen=True)
class MulticastMessage:
    """One coded symbol X_k^S[index] sent by ``sender`` to the rest of ``shuffle_subset``."""
    sender: int
    shuffle_subset: NodeSubset
    index: int
    payload: bytes
    bit_length: int
    useful_bits: Optional[int] = dataclass_field(default=None, compare=False)

    HEADER = struct.Struct("<HIHI")

    def bits(self) -> np.ndarray:
        return to_bits(self.payload, self.bit_length)

    def to_bytes(self) -> bytes:
        """Wire record: sender u16, subset bitmask u32, index u16, payload length u32, payload."""
        header = self.HEADER.pack(
            self.sender, subset_bitmask(self.shuffle_subset), self.index, len(self.payload)
        )
        return header + self.payload


def parse_message_log(data: bytes) -> List[MulticastMessage]:
    """Read concatenated wire records back; bit lengths are recovered in whole bytes."""
    messages = []
    offset = 0
    header = MulticastMessage.HEADER
    while offset < len(data):
        if offset + header.size > len(data):
            raise CodecError(f"truncated message header at byte {offset}")
        sender, mask, index, length = header.unpack_from(data, offset)
        offset += header.size
        payload = data[offset:offset + length]
        if len(payload) != length:
            raise CodecError(f"truncated payload at byte {offset}")
        offset += length
        messages.append(MulticastMessage(
            sender, subset_from_bitmask(mask), index, payload, 8 * length
        ))
    return messages


def round_range(r: int, s: int, K: int) -> range:
    """Shuffle subset sizes max{r+1, s} .. min{r+s, K}."""
    return range(max(r + 1, s), min(r + s, K) + 1)


def exclusive_keys(
    S: NodeSubset, S1: NodeSubset, fa: FileAssignment, ra: ReduceAssignment
) -> Tuple[ValueKey, ...]:
    """
    (q, n) pairs of the exclusive set for owner subset S1 inside S.

    q is reduced by every node of S minus S1 and by no node outside S; file n
    is mapped by exactly the nodes of S1. Ordered by (q, n).
    """
    files = fa.batches.get(S1, ())
    if not files:
        return ()
    members = set(S)
    wanted = members - set(S1)
    functions = sorted(
        q for P, batch in ra.batches.items()
        if wanted <= set(P) <= members
        for q in batch
    )
    return tuple((q, n) for q in functions for n in files)


def build_exclusive_sets(
    S: NodeSubset,
    fa: FileAssignment,
    ra: ReduceAssignment,
    store,
    r: Optional[int] = None,
    viewer: Optional[int] = None,
) -> List[ExclusiveSet]:
    """
    Exclusive sets of every size-r owner subset of S.

    Args:
        S: Shuffle subset
        fa: File assignment
        ra: Reduce assignment
        store: IntermediateStore to read payloads from
        r: Owner subset size (defaults to the assignment's single replication level)
        viewer: Only build the sets this node owns, reading its own store

    Returns:
        List[ExclusiveSet]: one per owner subset, in lexicographic order
    """
    if r is None:
        levels = fa.levels()
        if len(levels) != 1:
            raise CodecError(f"assignment mixes replication levels {levels}; pass r")
        r = levels[0]
    s = len(ra.reducers_of(1))
    if len(S) not in round_range(r, s, fa.K):
        raise CodecError(
            f"|S|={len(S)} outside the shuffle round range "
            f"[max(r+1, s), min(r+s, K)] for r={r}, s={s}, K={fa.K}"
        )

    sets = []
    for S1 in combinations(S, r):
        if viewer is not None and viewer not in S1:
            continue
        source = viewer if viewer is not None else S1[0]
        values = tuple(
            (q, n, store.get(source, q, n)) for q, n in exclusive_keys(S, S1, fa, ra)
        )
        sets.append(ExclusiveSet(S, S1, values, store.T))
    return sets


def segment(
    es: ExclusiveSet,
    pad: bool = False,
    useful_bits: Optional[Callable[[bytes], int]] = None,
) -> SegmentGroup:
    """
    Split the exclusive-set payload evenly into r segments in owner order.

    Args:
        es: Exclusive set
        pad: Zero-pad the payload up to a multiple of r instead of failing
        useful_bits: Optional hook giving the meaningful prefix length of a payload

    Raises:
        CodecError: payload length not divisible by r and pad is False
    """
    r = len(es.owner_subset)
    total = es.total_bits
    if total % r and not pad:
        fix = r // gcd(r, len(es.values))
        raise CodecError(
            f"{total}-bit exclusive set of {es.owner_subset} does not split into {r} "
            f"equal segments; T must be a multiple of {fix}"
        )
    seg_len = -(-total // r)
    bits = pad_bits(es.payload_bits(), seg_len * r)
    segments = tuple(bits[i * seg_len:(i + 1) * seg_len] for i in range(r))

    useful: Tuple[int, ...] = ()
    if useful_bits is not None:
        intervals = [
            (i * es.T, i * es.T + useful_bits(payload))
            for i, (_, _, payload) in enumerate(es.values)
        ]
        useful = tuple(
            max(
                (min(end, (i + 1) * seg_len) - i * seg_len
                 for start, end in intervals
                 if start < (i + 1) * seg_len and end > i * seg_len),
                default=0,
            )
            for i in range(r)
        )
    return SegmentGroup(es.shuffle_subset, es.owner_subset, segments, total, useful)


def select_field(
    segment_bits: int, n1: int, n2: int, preferred: FieldSpec
) -> FieldSpec:
    """
    Field for one node's messages in one shuffle subset.

    The preferred field is kept when its width divides the segment length and
    it has at least n1 nonzero elements; otherwise the smallest suitable
    GF(2^m), m <= 16, is used. With n2 = 1 only XOR is needed.
    """
    def fits(m: int) -> bool:
        return segment_bits % m == 0 and (1 << m) - 1 >= n1

    if n2 == 1 or fits(preferred.m):
        return preferred
    for m in range(1, TABLE_MAX_BITS + 1):
        if fits(m):
            return FieldSpec.default(m)
    min_m = n1.bit_length()
    raise FieldError(
        f"no GF(2^m) with m <= {TABLE_MAX_BITS} divides the {segment_bits}-bit segment "
        f"while offering n1={n1} distinct nonzero coefficients (2^m - 1 >= n1); "
        f"choose T so segments are a multiple of {min_m} bits"
    )


def _check_groups(k: int, S: NodeSubset, groups: Sequence[SegmentGroup]) -> int:
    if not groups:
        raise CodecError(f"node {k} has no segment groups in {S}")
    r = len(groups[0].owner_subset)
    expected = subsets_containing(k, S, r)
    if [g.owner_subset for g in groups] != expected:
        raise CodecError(f"segment groups of node {k} do not follow the subsets of {S} containing it")
    return r


def encode_node_messages(
    k: int,
    S: NodeSubset,
    groups: Sequence[SegmentGroup],
    field: FieldSpec,
    allow_padding: bool = False,
) -> List[MulticastMessage]:
    """
    Node k's n2 coded messages for shuffle subset S.

    Message i is sum_j alpha_j^(i-1) * (segment of node k in group j).

    Args:
        k: Sending node
        S: Shuffle subset
        groups: The n1 segment groups of subsets_containing(k, S, r), in order
        field: Coefficient field
        allow_padding: Zero-pad shorter segments to the longest one

    Returns:
        List[MulticastMessage]: n2 messages, or none if every segment is empty
    """
    r = _check_groups(k, S, groups)
    n1 = len(groups)
    n2 = comb(len(S) - 2, r - 1)
    segments = [g.segment_for(k) for g in groups]
    length = max(seg.size for seg in segments)
    if not allow_padding and any(seg.size != length for seg in segments):
        raise CodecError(f"segments of node {k} in {S} differ in length")
    if length == 0:
        return []
    useful = max(g.useful_for(k) for g in groups)

    if n2 == 1:
        combined = reduce(np.bitwise_xor, (pad_bits(seg, length) for seg in segments))
        return [MulticastMessage(k, S, 1, from_bits(combined), length, useful)]

    if length % field.m:
        if not allow_padding:
            raise CodecError(
                f"{length}-bit segments are not a whole number of GF(2^{field.m}) words"
            )
        length += field.m - length % field.m
    alphas = coefficient_alphas(field, n1)
    words = [bits_to_words(pad_bits(seg, length), field.m) for seg in segments]
    messages = []
    for i in range(n2):
        row = reduce(
            np.bitwise_xor,
            (field.scale(w, field.pow(alpha, i)) for alpha, w in zip(alphas, words)),
        )
        messages.append(
            MulticastMessage(k, S, i + 1, from_bits(words_to_bits(row, field.m)), length, useful)
        )
    return messages


def decode_messages(
    j: int,
    k: int,
    S: NodeSubset,
    received: Sequence[MulticastMessage],
    local_groups: Mapping[NodeSubset, SegmentGroup],
    field: FieldSpec,
    r: int,
) -> Dict[NodeSubset, np.ndarray]:
    """
    Recover the segments of node k that node j is missing.

    Args:
        j: Receiving node
        k: Sending node
        S: Shuffle subset
        received: The n2 messages of node k, in index order
        local_groups: Node j's own segment groups, keyed by owner subset
        field: Coefficient field used by the sender
        r: Owner subset size

    Returns:
        Dict[NodeSubset, np.ndarray]: owner subset -> node k's segment, at message length
    """
    try:
        positions = subsets_containing(k, S, r)
        missing = complement_indices(j, k, S, r)
    except JobValidationError as e:
        raise DecodeError(str(e)) from e
    n2 = len(missing)
    if len(received) != n2:
        raise DecodeError(f"node {j} expected {n2} messages from node {k}, got {len(received)}")
    lengths = {msg.bit_length for msg in received}
    if len(lengths) != 1:
        raise DecodeError(f"messages from node {k} in {S} differ in length")
    length = lengths.pop()

    known = []
    for position, owners in enumerate(positions, start=1):
        if position in missing:
            continue
        group = local_groups.get(owners)
        if group is None:
            raise DecodeError(f"node {j} lacks the side information of {owners}")
        seg = group.segment_for(k)
        if seg.size > length:
            raise DecodeError(f"known segment of {owners} is longer than the message")
        known.append((position, pad_bits(seg, length)))

    targets = [positions[p - 1] for p in missing]
    if n2 == 1:
        recovered = reduce(np.bitwise_xor, (seg for _, seg in known), received[0].bits())
        return {targets[0]: recovered}

    if length % field.m:
        raise DecodeError(f"{length}-bit messages are not GF(2^{field.m}) words")
    alphas = coefficient_alphas(field, len(positions))
    reduced = []
    for i, msg in enumerate(received):
        y = bits_to_words(msg.bits(), field.m)
        for position, seg in known:
            y = y ^ field.scale(bits_to_words(seg, field.m), field.pow(alphas[position - 1], i))
        reduced.append(y)
    try:
        solved = vandermonde_solve(field, [alphas[p - 1] for p in missing], reduced)
    except FieldError as e:
        raise DecodeError(f"node {j} cannot decode node {k} in {S}: {e}") from e
    return {owners: words_to_bits(u, field.m) for owners, u in zip(targets, solved)}
