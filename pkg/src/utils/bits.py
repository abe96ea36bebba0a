"""
Bit-level helpers for T-bit intermediate values.

A T-bit value travels as ceil(T/8) bytes, most significant bit first, with the
unused trailing bits of the last byte set to zero. Inside the codec values are
handled as numpy arrays of 0/1 bits so segments can start at any bit offset.
"""

import numpy as np

from src.core.exceptions import JobValidationError


def payload_bytes(T: int) -> int:
    """Number of bytes that carry a T-bit value."""
    return (T + 7) // 8


def zero_payload(T: int) -> bytes:
    return bytes(payload_bytes(T))


def check_payload(payload: bytes, T: int) -> None:
    """
    Check that a payload carries exactly T bits.

    Raises:
        JobValidationError: wrong byte length or non-zero trailing pad bits
    """
    if len(payload) != payload_bytes(T):
        raise JobValidationError(
            f"payload of {len(payload)} bytes does not carry T={T} bits "
            f"(expected {payload_bytes(T)} bytes)"
        )
    spare = 8 * len(payload) - T
    if spare and payload[-1] & ((1 << spare) - 1):
        raise JobValidationError(f"payload has non-zero bits beyond T={T}")


def to_bits(payload: bytes, T: int) -> np.ndarray:
    """Unpack the first T bits of a payload into a uint8 0/1 array."""
    return np.unpackbits(np.frombuffer(payload, dtype=np.uint8))[:T]


def from_bits(bits: np.ndarray) -> bytes:
    """Pack a 0/1 array into bytes, zero-filling the last byte."""
    return np.packbits(bits.astype(np.uint8, copy=False)).tobytes()


def int_to_payload(value: int, T: int) -> bytes:
    """Encode the low T bits of an integer as a T-bit payload."""
    value &= (1 << T) - 1
    n_bytes = payload_bytes(T)
    return (value << (8 * n_bytes - T)).to_bytes(n_bytes, "big")


def pad_bits(bits: np.ndarray, length: int) -> np.ndarray:
    """Zero-extend a bit array to ``length`` bits."""
    if bits.size == length:
        return bits
    padded = np.zeros(length, dtype=np.uint8)
    padded[:bits.size] = bits
    return padded


def bits_to_words(bits: np.ndarray, m: int) -> np.ndarray:
    """Group a bit array (length divisible by m) into m-bit integer words."""
    weights = np.left_shift(np.int64(1), np.arange(m - 1, -1, -1, dtype=np.int64))
    return bits.reshape(-1, m).astype(np.int64) @ weights


def words_to_bits(words: np.ndarray, m: int) -> np.ndarray:
    """Inverse of bits_to_words."""
    shifts = np.arange(m - 1, -1, -1, dtype=np.int64)
    return ((words[:, None] >> shifts) & 1).astype(np.uint8).ravel()
