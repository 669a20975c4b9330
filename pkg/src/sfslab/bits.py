"""Bit-vector utilities shared across the laboratory.

A *bit array* is a one-dimensional ``numpy`` array of dtype ``uint8``
whose entries are 0 or 1.  Position 0 is the leftmost bit of the
string.  Packing to bytes is MSB-first: bit 0 of the array becomes the
most significant bit of byte 0, matching ``numpy.packbits``.

All inner products are over GF(2): ``dot2(x, y)`` is the XOR over the
AND of aligned bits.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import WidthError

__all__ = [
    "as_bits",
    "zeros",
    "random_bits",
    "pack_bits",
    "unpack_bits",
    "packed_size",
    "concat_bits",
    "xor_bits",
    "dot2",
    "bits_to_int",
    "int_to_bits",
    "bits_to_str",
    "bits_from_str",
    "bits_to_hex",
    "hex_to_bits",
    "bits_equal",
]


def as_bits(value: Iterable[int] | str | np.ndarray) -> np.ndarray:
    """Coerce ``value`` into a validated uint8 bit array.

    Accepts an existing array, any iterable of 0/1 integers, or a
    string of ``'0'``/``'1'`` characters.
    """
    if isinstance(value, str):
        return bits_from_str(value)
    arr = np.asarray(value, dtype=np.uint8)
    if arr.ndim != 1:
        raise WidthError(f"bit array must be 1-dimensional, got shape {arr.shape}")
    if arr.size and int(arr.max(initial=0)) > 1:
        raise WidthError("bit array entries must be 0 or 1")
    return arr


def zeros(n: int) -> np.ndarray:
    """Return the all-zero bit array of length ``n``."""
    return np.zeros(n, dtype=np.uint8)


def random_bits(rng: np.random.Generator, n: int) -> np.ndarray:
    """Sample ``n`` uniform bits from ``rng``."""
    return rng.integers(0, 2, size=n, dtype=np.uint8)


def pack_bits(bits: np.ndarray) -> bytes:
    """Pack a bit array into bytes, MSB-first, zero-padded at the tail."""
    return np.packbits(as_bits(bits)).tobytes()


def packed_size(n_bits: int) -> int:
    """Number of bytes occupied by ``n_bits`` packed bits."""
    return (n_bits + 7) // 8


def unpack_bits(data: bytes, n: int) -> np.ndarray:
    """Unpack ``n`` bits from ``data`` (MSB-first).

    ``data`` must contain at least ``packed_size(n)`` bytes; surplus
    bytes are an error so framed payloads cannot smuggle extra data.
    """
    need = packed_size(n)
    if len(data) != need:
        raise WidthError(f"expected {need} bytes for {n} bits, got {len(data)}")
    arr = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if int(arr[n:].max(initial=0)) != 0:
        raise WidthError("nonzero padding bits in packed data")
    return arr[:n].astype(np.uint8)


def concat_bits(*parts: np.ndarray) -> np.ndarray:
    """Concatenate bit arrays left to right."""
    if not parts:
        return zeros(0)
    return np.concatenate([as_bits(p) for p in parts])


def xor_bits(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Bitwise XOR of two equal-length bit arrays."""
    a = as_bits(a)
    b = as_bits(b)
    if a.size != b.size:
        raise WidthError(f"xor width mismatch: {a.size} vs {b.size}")
    return np.bitwise_xor(a, b)


def dot2(a: np.ndarray, b: np.ndarray) -> int:
    """GF(2) inner product: XOR over the AND of aligned bits."""
    a = as_bits(a)
    b = as_bits(b)
    if a.size != b.size:
        raise WidthError(f"dot2 width mismatch: {a.size} vs {b.size}")
    return int(np.bitwise_and(a, b).sum() & 1)


def bits_to_int(bits: np.ndarray) -> int:
    """Interpret a bit array as an unsigned integer, bit 0 most significant."""
    value = 0
    for bit in as_bits(bits):
        value = (value << 1) | int(bit)
    return value


def int_to_bits(value: int, width: int) -> np.ndarray:
    """Encode an unsigned integer as ``width`` bits, bit 0 most significant."""
    if value < 0 or value >= (1 << width):
        raise WidthError(f"value {value} does not fit in {width} bits")
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_str(bits: np.ndarray) -> str:
    """Render a bit array as a '0'/'1' string."""
    return "".join("1" if b else "0" for b in as_bits(bits))


def bits_from_str(s: str) -> np.ndarray:
    """Parse a '0'/'1' string into a bit array."""
    if any(c not in "01" for c in s):
        raise WidthError(f"invalid bit-string character in {s!r}")
    return np.array([1 if c == "1" else 0 for c in s], dtype=np.uint8)


def bits_to_hex(bits: np.ndarray) -> str:
    """Render a bit array as lowercase hex of its MSB-first packing."""
    return pack_bits(bits).hex()


def hex_to_bits(s: str, n: int) -> np.ndarray:
    """Parse hex into exactly ``n`` bits (inverse of :func:`bits_to_hex`)."""
    try:
        data = bytes.fromhex(s)
    except ValueError as exc:
        raise WidthError(f"invalid hex string {s!r}") from exc
    return unpack_bits(data, n)


def bits_equal(a: np.ndarray, b: np.ndarray) -> bool:
    """True iff two bit arrays have equal length and contents."""
    a = as_bits(a)
    b = as_bits(b)
    return a.size == b.size and bool(np.array_equal(a, b))
