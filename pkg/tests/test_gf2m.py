import numpy as np
import pytest

from src.core.exceptions import FieldError
from src.core.gf2m import (
    DEFAULT_POLYNOMIALS,
    FieldElement,
    FieldSpec,
    coefficient_alphas,
    gf_add,
    gf_inv,
    gf_mul,
    invert_matrix,
    reference_mul,
    vandermonde_matrix,
    vandermonde_solve,
)


def test_add_is_xor(gf3):
    a, b = gf3.element(0b101), gf3.element(0b011)
    assert int(gf_add(a, b)) == 0b110
    assert int(a + a) == 0
    assert int(a + gf3.element(0)) == 0b101


@pytest.mark.parametrize("a, b, expected", [(3, 3, 5), (2, 6, 7), (5, 1, 5)])
def test_mul_small_field(gf3, a, b, expected):
    assert int(gf_mul(gf3.element(a), gf3.element(b))) == expected


def test_inverse_in_gf2_3(gf3):
    assert int(gf_inv(gf3.element(2))) == 5
    assert int(gf_inv(gf3.element(1))) == 1


def test_zero_has_no_inverse(gf8):
    with pytest.raises(FieldError, match="zero has no inverse"):
        gf_inv(gf8.element(0))


def test_mismatched_fields_rejected(gf3, gf8):
    with pytest.raises(FieldError, match="mismatched"):
        gf_add(gf3.element(1), gf8.element(1))


def test_element_range_checked(gf3):
    with pytest.raises(FieldError):
        FieldElement(gf3, 8)


def test_reducible_polynomial_rejected():
    with pytest.raises(FieldError, match="reducible"):
        FieldSpec(2, 0b101)
    with pytest.raises(FieldError, match="degree"):
        FieldSpec(3, 0b111)


@pytest.mark.parametrize("m", range(1, 9))
def test_table_mul_matches_reference(m):
    field = FieldSpec.default(m)
    for a in range(field.size):
        for b in range(field.size):
            assert field.mul(a, b) == reference_mul(a, b, field.reduction_poly, m)


@pytest.mark.parametrize("m", range(1, 5))
def test_distributivity_exhaustive(m):
    field = FieldSpec.default(m)
    values = range(field.size)
    for a in values:
        for b in values:
            for c in values:
                assert field.mul(a, b ^ c) == field.mul(a, b) ^ field.mul(a, c)


@pytest.mark.parametrize("m", [2, 3, 8, 16])
def test_every_nonzero_element_has_inverse(m):
    field = FieldSpec.default(m)
    for a in range(1, min(field.size, 4096)):
        assert field.mul(a, field.inv(a)) == 1


def test_large_field_falls_back_to_reference():
    field = FieldSpec.default(32)
    assert not field.uses_tables
    a, b = 0x12345678, 0x9ABCDEF0
    assert field.mul(a, b) == reference_mul(a, b, DEFAULT_POLYNOMIALS[32], 32)
    assert field.mul(a, field.inv(a)) == 1


def test_scale_matches_scalar_mul(gf8, rng):
    words = rng.integers(0, 256, size=64, dtype=np.int64)
    scaled = gf8.scale(words, 0x53)
    assert [int(w) for w in scaled] == [gf8.mul(int(w), 0x53) for w in words]


def test_alphas_are_first_nonzero_elements(gf3):
    assert coefficient_alphas(gf3, 7) == [1, 2, 3, 4, 5, 6, 7]
    with pytest.raises(FieldError, match="distinct coefficients"):
        coefficient_alphas(gf3, 8)


def test_invert_matrix_round_trip(gf8):
    matrix = vandermonde_matrix(gf8, [1, 2, 3, 4], 4)
    inverse = invert_matrix(gf8, matrix)
    for i in range(4):
        for j in range(4):
            acc = 0
            for k in range(4):
                acc ^= gf8.mul(matrix[i][k], inverse[k][j])
            assert acc == int(i == j)


def test_solve_single_row_is_identity(gf8):
    rhs = [np.array([7, 9, 200], dtype=np.int64)]
    (u,) = vandermonde_solve(gf8, [5], rhs)
    assert list(u) == [7, 9, 200]


def test_solve_round_trips_every_pair_in_gf2_3(gf3):
    alphas = [1, 2]
    for u0 in range(8):
        for u1 in range(8):
            rhs = [
                np.array([u0 ^ u1], dtype=np.int64),
                np.array([gf3.mul(1, u0) ^ gf3.mul(2, u1)], dtype=np.int64),
            ]
            solved = vandermonde_solve(gf3, alphas, rhs)
            assert [int(v[0]) for v in solved] == [u0, u1]


def test_solve_random_systems(gf8, rng):
    for n in range(1, 6):
        alphas = [int(a) for a in rng.choice(np.arange(1, 256), size=n, replace=False)]
        unknowns = [rng.integers(0, 256, size=10, dtype=np.int64) for _ in range(n)]
        rhs = []
        for i in range(n):
            row = np.zeros(10, dtype=np.int64)
            for a, u in zip(alphas, unknowns):
                row ^= gf8.scale(u, gf8.pow(a, i))
            rhs.append(row)
        solved = vandermonde_solve(gf8, alphas, rhs)
        for got, want in zip(solved, unknowns):
            assert np.array_equal(got, want)


def test_solve_rejects_duplicate_alphas(gf8):
    rhs = [np.zeros(2, dtype=np.int64), np.zeros(2, dtype=np.int64)]
    with pytest.raises(FieldError, match="singular Vandermonde"):
        vandermonde_solve(gf8, [3, 3], rhs)


def test_solve_rejects_too_few_alphas(gf8):
    rhs = [np.zeros(1, dtype=np.int64)] * 3
    with pytest.raises(FieldError, match="alphas"):
        vandermonde_solve(gf8, [1, 2], rhs, n=3)
