from math import comb

import pytest

from src.core.combinatorics import (
    complement_indices,
    enumerate_subsets,
    node_subset,
    rank_subset,
    subset_bitmask,
    subset_from_bitmask,
    subsets_containing,
    unrank_subset,
)
from src.core.exceptions import JobValidationError


def test_enumerate_lexicographic():
    assert enumerate_subsets(3, 2) == [(1, 2), (1, 3), (2, 3)]
    subsets = enumerate_subsets(4, 2)
    assert len(subsets) == 6
    assert subsets[0] == (1, 2) and subsets[-1] == (3, 4)
    assert enumerate_subsets(5, 5) == [(1, 2, 3, 4, 5)]


def test_enumerate_rejects_oversized():
    with pytest.raises(JobValidationError):
        enumerate_subsets(3, 4)


@pytest.mark.parametrize("K", range(1, 13))
def test_rank_unrank_bijection(K):
    for size in range(K + 1):
        for position, subset in enumerate(enumerate_subsets(K, size)):
            assert rank_subset(subset, K) == position
            assert unrank_subset(position, K, size) == subset


def test_unrank_out_of_range():
    with pytest.raises(JobValidationError):
        unrank_subset(comb(5, 2), 5, 2)


def test_subsets_containing():
    assert subsets_containing(1, (1, 2, 3, 4), 2) == [(1, 2), (1, 3), (1, 4)]
    assert subsets_containing(1, (1, 2, 3), 2) == [(1, 2), (1, 3)]
    assert subsets_containing(3, (1, 3, 5), 3) == [(1, 3, 5)]
    with pytest.raises(JobValidationError):
        subsets_containing(4, (1, 2, 3), 2)


def test_complement_indices():
    assert complement_indices(2, 1, (1, 2, 3, 4), 2) == [2, 3]
    assert complement_indices(3, 1, (1, 2, 3), 2) == [1]
    with pytest.raises(JobValidationError):
        complement_indices(1, 1, (1, 2, 3), 2)


@pytest.mark.parametrize("size, r", [(3, 2), (4, 2), (5, 3), (6, 2), (6, 4), (7, 3)])
def test_complement_positions_exclude_receiver(size, r):
    S = tuple(range(1, size + 1))
    for k in S:
        containing = subsets_containing(k, S, r)
        assert len(containing) == comb(size - 1, r - 1)
        for j in S:
            if j == k:
                continue
            positions = complement_indices(j, k, S, r)
            assert len(positions) == comb(size - 2, r - 1)
            for position, subset in enumerate(containing, start=1):
                assert (j not in subset) == (position in positions)


def test_bitmask_round_trip():
    assert subset_bitmask((1, 3)) == 0b101
    assert subset_from_bitmask(0b101) == (1, 3)
    assert subset_from_bitmask(subset_bitmask((2, 5, 10))) == (2, 5, 10)


def test_node_subset_normalises():
    assert node_subset([3, 1, 3]) == (1, 3)
    with pytest.raises(JobValidationError):
        node_subset([0, 1], K=3)
