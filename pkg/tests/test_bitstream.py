import math
import struct

import pytest

from sparsefl.bitstream import BitReader, BitWriter
from sparsefl.errors import DecodeError


def test_msb_first_bit_order():
    w = BitWriter()
    w.write_uint(0b101, 3)
    w.write_uint(1, 1)
    assert w.getvalue() == bytes([0b1011_0000])
    assert w.bit_length == 4


def test_multibyte_field_big_endian():
    w = BitWriter()
    w.write_uint(0xABCD, 16)
    w.write_uint(0x5, 4)
    assert w.getvalue() == bytes([0xAB, 0xCD, 0x50])


def test_zero_width_field_is_noop():
    w = BitWriter()
    w.write_uint(0, 0)
    assert w.bit_length == 0
    assert w.getvalue() == b""


def test_value_must_fit_width():
    w = BitWriter()
    with pytest.raises(ValueError):
        w.write_uint(4, 2)
    with pytest.raises(ValueError):
        w.write_uint(-1, 8)


def test_round_trip_mixed_fields():
    w = BitWriter()
    fields = [(0, 0), (1, 1), (5, 3), (1023, 10), (2**200 - 7, 201), (0, 5)]
    for value, width in fields:
        w.write_uint(value, width)
    r = BitReader(w.getvalue(), w.bit_length)
    for value, width in fields:
        assert r.read_uint(width) == value
    assert r.remaining == 0


def test_f32_round_trip_exact_bits():
    w = BitWriter()
    for x in (0.0, 1.5, -2.25, 3.14159, 1e-30, -1e30):
        w.write_f32(x)
    r = BitReader(w.getvalue(), w.bit_length)
    for x in (0.0, 1.5, -2.25, 3.14159, 1e-30, -1e30):
        got = r.read_f32()
        assert struct.pack(">f", got) == struct.pack(">f", x)
        assert math.isclose(got, x, rel_tol=1e-6, abs_tol=1e-37)


def test_read_past_end_raises():
    w = BitWriter()
    w.write_uint(3, 2)
    r = BitReader(w.getvalue(), w.bit_length)
    r.read_uint(2)
    with pytest.raises(DecodeError):
        r.read_uint(1, "tail")


def test_declared_length_bounded_by_buffer():
    with pytest.raises(DecodeError):
        BitReader(b"\x00", 9)
