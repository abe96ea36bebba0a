"""
Node-subset enumeration, ranking and indexing.

A node subset is a strictly increasing tuple of 1-based node indices. All
enumerations are lexicographic so every node derives the same indexing of
batches, owner subsets and coefficients without coordination.
"""

from functools import lru_cache
from itertools import combinations
from math import comb
from typing import Iterable, List, Tuple

from src.core.exceptions import JobValidationError

NodeSubset = Tuple[int, ...]


def node_subset(members: Iterable[int], K: int = None) -> NodeSubset:
    """Normalise members into a sorted NodeSubset, validating the range when K is given."""
    subset = tuple(sorted(set(members)))
    if K is not None and subset and (subset[0] < 1 or subset[-1] > K):
        raise JobValidationError(f"subset {subset} has members outside [1, {K}]")
    return subset


@lru_cache(maxsize=None)
def _enumerate(K: int, size: int) -> Tuple[NodeSubset, ...]:
    return tuple(combinations(range(1, K + 1), size))


def enumerate_subsets(K: int, size: int) -> List[NodeSubset]:
    """All size-element subsets of {1..K} in lexicographic order."""
    if size < 0 or size > K:
        raise JobValidationError(f"cannot choose {size} of {K} nodes")
    return list(_enumerate(K, size))


def rank_subset(subset: NodeSubset, K: int) -> int:
    """Position of ``subset`` in enumerate_subsets(K, len(subset))."""
    size = len(subset)
    rank = 0
    previous = 0
    for i, member in enumerate(subset):
        for skipped in range(previous + 1, member):
            rank += comb(K - skipped, size - i - 1)
        previous = member
    return rank


def unrank_subset(rank: int, K: int, size: int) -> NodeSubset:
    """Inverse of rank_subset."""
    if not 0 <= rank < comb(K, size):
        raise JobValidationError(f"rank {rank} outside [0, C({K},{size}))")
    members = []
    candidate = 1
    for i in range(size):
        while True:
            block = comb(K - candidate, size - i - 1)
            if rank < block:
                break
            rank -= block
            candidate += 1
        members.append(candidate)
        candidate += 1
    return tuple(members)


def subsets_containing(k: int, S: NodeSubset, r: int) -> List[NodeSubset]:
    """
    The C(|S|-1, r-1) size-r subsets of S that contain k, lexicographically.

    Raises:
        JobValidationError: k is not a member of S or r exceeds |S|
    """
    if k not in S:
        raise JobValidationError(f"node {k} is not in subset {S}")
    if not 1 <= r <= len(S):
        raise JobValidationError(f"cannot choose {r} of the {len(S)} nodes of {S}")
    return [subset for subset in combinations(S, r) if k in subset]


def complement_indices(j: int, k: int, S: NodeSubset, r: int) -> List[int]:
    """
    1-based positions into subsets_containing(k, S, r) of the subsets without j.

    There are C(|S|-2, r-1) of them; they index the segments of node k that
    node j still needs.
    """
    if j == k:
        raise JobValidationError("receiver and sender must differ")
    if j not in S:
        raise JobValidationError(f"node {j} is not in subset {S}")
    return [
        position
        for position, subset in enumerate(subsets_containing(k, S, r), start=1)
        if j not in subset
    ]


def subset_bitmask(subset: NodeSubset) -> int:
    """Bit k-1 set for every member k."""
    mask = 0
    for member in subset:
        mask |= 1 << (member - 1)
    return mask


def subset_from_bitmask(mask: int) -> NodeSubset:
    members = []
    k = 1
    while mask:
        if mask & 1:
            members.append(k)
        mask >>= 1
        k += 1
    return tuple(members)
