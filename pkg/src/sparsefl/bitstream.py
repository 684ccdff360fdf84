"""MSB-first bit packing for the uplink payload.

Bit order is big-endian within bytes: the first bit written becomes the
most significant bit of the first byte.  Integers are written as fixed-width
fields, most significant bit first.  The trailing bits of the last byte are
zero padding and are not part of the stream.
"""

from __future__ import annotations

import struct

from .errors import DecodeError


class BitWriter:
    """Append-only bit buffer."""

    def __init__(self) -> None:
        self._acc = 0
        self._nbits = 0

    @property
    def bit_length(self) -> int:
        return self._nbits

    def write_uint(self, value: int, width: int) -> None:
        """Write ``value`` as a ``width``-bit unsigned integer, MSB first."""
        if width < 0:
            raise ValueError("width must be nonnegative")
        if value < 0 or value >> width:
            raise ValueError(f"value {value} does not fit in {width} bits")
        self._acc = (self._acc << width) | value
        self._nbits += width

    def write_f32(self, value: float) -> None:
        """Write an IEEE-754 binary32 value, big-endian."""
        raw = struct.pack(">f", float(value))
        self.write_uint(int.from_bytes(raw, "big"), 32)

    def getvalue(self) -> bytes:
        """Return the packed bytes, zero-padded at the end to a byte boundary."""
        pad = (-self._nbits) % 8
        return ((self._acc << pad)).to_bytes((self._nbits + pad) // 8, "big")


class BitReader:
    """Cursor-based reader over bytes produced by :class:`BitWriter`.

    ``bit_length`` bounds the readable region; reads past it raise
    :class:`DecodeError` rather than silently consuming padding.
    """

    def __init__(self, data: bytes, bit_length: int) -> None:
        if bit_length > 8 * len(data):
            raise DecodeError("payload", "declared bit length exceeds buffer")
        self._value = int.from_bytes(data, "big")
        self._total = 8 * len(data)
        self._limit = bit_length
        self.cursor = 0

    @property
    def remaining(self) -> int:
        return self._limit - self.cursor

    def read_uint(self, width: int, field: str = "field") -> int:
        if width < 0:
            raise ValueError("width must be nonnegative")
        if self.cursor + width > self._limit:
            raise DecodeError(field, "read past end of payload")
        shift = self._total - self.cursor - width
        self.cursor += width
        return (self._value >> shift) & ((1 << width) - 1)

    def read_f32(self, field: str = "field") -> float:
        raw = self.read_uint(32, field).to_bytes(4, "big")
        return struct.unpack(">f", raw)[0]
