"""
Ready-made MapReduce jobs for the simulator: a seeded synthetic job for load
sweeps, an identity job, a letter-count job and the labelled job used to
replay the worked examples.
"""

import hashlib
import string
from collections import Counter
from typing import List, Sequence

import numpy as np

from src.core.engine import JobFunctions, MappedValue
from src.utils.bits import int_to_payload, payload_bytes


def _digest(*parts: bytes, size: int = 16) -> bytes:
    h = hashlib.blake2b(digest_size=size)
    for part in parts:
        h.update(part)
    return h.digest()


def _mask(raw: bytes, T: int) -> bytes:
    """Clear the bits beyond T in the last byte."""
    spare = 8 * len(raw) - T
    if not spare:
        return raw
    return raw[:-1] + bytes([raw[-1] & (0xFF << spare) & 0xFF])


def synthetic_inputs(N: int, seed: int = 0, size: int = 16) -> List[bytes]:
    """N pseudo-random files of ``size`` bytes each."""
    rng = np.random.default_rng(seed)
    return [rng.bytes(size) for _ in range(N)]


def synthetic_job(Q: int, T: int) -> JobFunctions:
    """
    Map draws Q random T-bit values from a generator seeded by the file
    content; reduce hashes the values in file order.
    """
    width = payload_bytes(T)

    def map_fn(n: int, data: bytes) -> List[bytes]:
        seed = int.from_bytes(_digest(data, n.to_bytes(4, "little"), size=8), "little")
        rng = np.random.default_rng(seed)
        return [_mask(rng.bytes(width), T) for _ in range(Q)]

    def reduce_fn(q: int, values: Sequence[MappedValue]) -> bytes:
        return _digest(q.to_bytes(4, "little"), *(v.payload for v in values))

    return JobFunctions("synthetic", map_fn, reduce_fn)


def identity_job(Q: int, T: int) -> JobFunctions:
    """Every function sees the files themselves; reduce concatenates the real ones."""

    def map_fn(n: int, data: bytes) -> List[bytes]:
        if 8 * len(data) < T:
            data = data + bytes(payload_bytes(T) - len(data))
        return [_mask(data[:payload_bytes(T)], T)] * Q

    def reduce_fn(q: int, values: Sequence[MappedValue]) -> bytes:
        return b"".join(v.payload for v in values if not v.padding)

    return JobFunctions("identity", map_fn, reduce_fn)


LETTERS = string.ascii_lowercase


def letter_count_job(Q: int, T: int = 32) -> JobFunctions:
    """
    Function q counts the letters whose alphabet index is q-1 modulo Q.

    Counts travel as T-bit big-endian integers; reduce sums them.
    """

    def map_fn(n: int, data: bytes) -> List[bytes]:
        counts = Counter(ch for ch in data.decode("utf-8", errors="ignore").lower() if ch in LETTERS)
        buckets = [0] * Q
        for letter, count in counts.items():
            buckets[LETTERS.index(letter) % Q] += count
        return [int_to_payload(count, T) for count in buckets]

    def reduce_fn(q: int, values: Sequence[MappedValue]) -> bytes:
        spare = 8 * payload_bytes(T) - T
        total = sum(int.from_bytes(v.payload, "big") >> spare for v in values)
        return total.to_bytes(8, "big")

    return JobFunctions("letter-count", map_fn, reduce_fn)


def reference_letter_count(files: Sequence[bytes], Q: int) -> List[int]:
    """Single-machine letter count per function."""
    totals = [0] * Q
    for data in files:
        for ch in data.decode("utf-8", errors="ignore").lower():
            if ch in LETTERS:
                totals[LETTERS.index(ch) % Q] += 1
    return totals


def labelled_value(q: int, n: int, T: int) -> bytes:
    """A T-bit value that identifies v_(q,n)."""
    seed = int.from_bytes(_digest(b"v", q.to_bytes(4, "little"), n.to_bytes(4, "little"), size=8), "little")
    return _mask(np.random.default_rng(seed).bytes(payload_bytes(T)), T)


def labelled_job(Q: int, T: int) -> JobFunctions:
    """v_(q,n) = labelled_value(q, n); reduce hashes the values in file order."""

    def map_fn(n: int, data: bytes) -> List[bytes]:
        return [labelled_value(q, n, T) for q in range(1, Q + 1)]

    def reduce_fn(q: int, values: Sequence[MappedValue]) -> bytes:
        return _digest(*(v.payload for v in values))

    return JobFunctions("labelled", map_fn, reduce_fn)
