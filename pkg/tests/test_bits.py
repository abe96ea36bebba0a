import numpy as np
import pytest

from src.core.exceptions import JobValidationError
from src.utils.bits import (
    bits_to_words,
    check_payload,
    from_bits,
    int_to_payload,
    pad_bits,
    payload_bytes,
    to_bits,
    words_to_bits,
)


def test_payload_width():
    assert payload_bytes(1) == 1
    assert payload_bytes(8) == 1
    assert payload_bytes(9) == 2


def test_bits_are_most_significant_first():
    bits = to_bits(b"\xa0", 4)
    assert bits.tolist() == [1, 0, 1, 0]
    assert from_bits(bits) == b"\xa0"


def test_int_payload_is_left_aligned():
    assert int_to_payload(5, 4) == b"\x50"
    assert int_to_payload(0x1FF, 8) == b"\xff"
    check_payload(int_to_payload(3, 12), 12)


def test_check_payload_rejects_stray_bits():
    with pytest.raises(JobValidationError, match="beyond T=4"):
        check_payload(b"\x51", 4)
    with pytest.raises(JobValidationError, match="expected 2 bytes"):
        check_payload(b"\x00", 16)


def test_words_group_bits():
    bits = np.array([1, 0, 1, 1, 1, 0], dtype=np.uint8)
    words = bits_to_words(bits, 3)
    assert words.tolist() == [5, 6]
    assert words_to_bits(words, 3).tolist() == bits.tolist()
    assert pad_bits(bits, 8).tolist() == [1, 0, 1, 1, 1, 0, 0, 0]
