from fractions import Fraction

import numpy as np
import pytest

from src.core.bounds import (
    AProfile,
    binom,
    bounds_table,
    canonical_profile,
    count_a_profile,
    counting_identity,
    format_rational,
    l_coded,
    l_coded_envelope,
    l_uncoded,
    lower_bound_lemma1,
    lower_bound_lemma2,
    rows_to_csv,
    split_profile,
)
from src.core.exceptions import JobValidationError
from src.core.placement import FileAssignment


def test_binom_outside_range_is_zero():
    assert binom(5, 2) == 10
    assert binom(3, 4) == 0
    assert binom(3, -1) == 0
    assert binom(-1, 0) == 0


@pytest.mark.parametrize("r, K, expected", [
    (1, 3, Fraction(2, 3)),
    (2, 10, Fraction(4, 5)),
    (Fraction(5, 2), 10, Fraction(3, 4)),
    (10, 10, Fraction(0)),
])
def test_l_uncoded(r, K, expected):
    assert l_uncoded(r, K) == expected


@pytest.mark.parametrize("r, s, K, expected", [
    (2, 1, 10, Fraction(2, 5)),
    (2, 1, 3, Fraction(1, 6)),
    (2, 2, 4, Fraction(4, 9)),
    (1, 1, 3, Fraction(2, 3)),
    (4, 2, 4, Fraction(0)),
])
def test_l_coded(r, s, K, expected):
    assert l_coded(r, s, K) == expected


def test_l_coded_single_reducer_closed_form():
    for K in range(2, 13):
        for r in range(1, K + 1):
            assert l_coded(r, 1, K) == Fraction(1, r) * (1 - Fraction(r, K))


def test_envelope_interpolates():
    assert l_coded_envelope(Fraction(3, 2), 1, 10) == Fraction(13, 20)
    assert l_coded_envelope(3, 1, 10) == l_coded(3, 1, 10)


def test_loads_reject_out_of_range_r():
    with pytest.raises(JobValidationError, match="outside"):
        l_uncoded(0, 5)
    with pytest.raises(JobValidationError, match="outside"):
        l_coded(2, 6, 5)


def test_l_coded_rejects_fractional_r():
    with pytest.raises(JobValidationError, match="integer computation load"):
        l_coded(Fraction(5, 2), 1, 4)
    assert l_coded(Fraction(2), 1, 4) == l_coded(2, 1, 4)


def test_profile_validation():
    assert AProfile((2, 3, 1), 6, 3).computation_load == Fraction(11, 6)
    with pytest.raises(JobValidationError, match="does not sum"):
        AProfile((2, 3, 1), 7, 3)
    with pytest.raises(JobValidationError, match="expected K=3"):
        AProfile((2, 3), 5, 3)


def test_profile_counted_from_assignment():
    fa = FileAssignment(3, ((1,), (2,), (1, 2), (2, 3), (1, 3), (1, 2, 3)), 6)
    assert count_a_profile(fa).a == (2, 3, 1)


def test_single_reducer_bound_at_mixed_profile():
    assert lower_bound_lemma1(AProfile((2, 3, 1), 6, 3)) == Fraction(11, 36)


def test_replicated_bound_reduces_to_single_reducer_bound(rng):
    for _ in range(1000):
        K = int(rng.integers(1, 9))
        counts = tuple(int(c) for c in rng.integers(0, 6, size=K))
        if not sum(counts):
            continue
        profile = AProfile(counts, sum(counts), K)
        assert lower_bound_lemma2(profile, 1) == lower_bound_lemma1(profile)


def test_converse_bound_tight_at_canonical_profile():
    for K in range(2, 9):
        for r in range(1, K + 1):
            for s in range(1, K + 1):
                profile = canonical_profile(K, r, binom(K, r))
                assert lower_bound_lemma2(profile, s) == l_coded(r, s, K)


def test_counting_identity_exhaustive():
    for K in range(1, 13):
        for r in range(1, K + 1):
            for s in range(1, K + 1):
                check = counting_identity(K, r, s)
                assert check.equal, (K, r, s, check)


def test_split_profile():
    profile = split_profile(4, Fraction(5, 2), 120)
    assert profile.a == (0, 60, 60, 0)
    assert profile.computation_load == Fraction(5, 2)


def test_bounds_table_rows():
    rows = bounds_table(10, 1, [Fraction(1), Fraction(3, 2), Fraction(2)])
    assert [row.r for row in rows] == [1, Fraction(3, 2), 2]
    assert rows[1].l_coded == Fraction(13, 20)
    assert rows[2].lemma_bound == l_coded(2, 1, 10)
    for row in rows:
        assert row.lemma_bound <= row.l_coded <= row.l_uncoded


def test_rationals_render_exactly():
    assert format_rational(Fraction(4, 9)) == "4/9"
    assert format_rational(Fraction(3)) == "3"
    text = rows_to_csv(("r", "load"), [(Fraction(3, 2), Fraction(13, 20)), (2, np.int64(1))])
    assert text == "r,load\n3/2,13/20\n2,1\n"
