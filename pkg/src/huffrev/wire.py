"""Binary packing helpers shared by the tree and protocol codecs.

All integers are big-endian and fixed-width; variable-length blobs are
length-prefixed with a 4-byte big-endian length. Decoders must consume
their input exactly: any surplus or deficit is a rejection.
"""

from __future__ import annotations

import struct


class CodecError(ValueError):
    """Base class for canonical-encoding rejections."""


class BadMagic(CodecError):
    pass


class Truncated(CodecError):
    pass


class TrailingBytes(CodecError):
    pass


class FieldRange(CodecError):
    pass


U8_MAX = 0xFF
U32_MAX = 0xFFFF_FFFF
U64_MAX = 0xFFFF_FFFF_FFFF_FFFF


def u8(value: int) -> bytes:
    if not 0 <= value <= U8_MAX:
        raise FieldRange(f"u8 out of range: {value}")
    return struct.pack(">B", value)


def u16(value: int) -> bytes:
    if not 0 <= value <= 0xFFFF:
        raise FieldRange(f"u16 out of range: {value}")
    return struct.pack(">H", value)


def u32(value: int) -> bytes:
    if not 0 <= value <= U32_MAX:
        raise FieldRange(f"u32 out of range: {value}")
    return struct.pack(">I", value)


def u64(value: int) -> bytes:
    if not 0 <= value <= U64_MAX:
        raise FieldRange(f"u64 out of range: {value}")
    return struct.pack(">Q", value)


def lp_bytes(payload: bytes) -> bytes:
    return u32(len(payload)) + payload


class Reader:
    """Cursor over an immutable buffer with exact-consumption checking."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos

    def take(self, n: int) -> bytes:
        if n < 0:
            raise FieldRange(f"negative read length: {n}")
        if self.remaining < n:
            raise Truncated(f"need {n} bytes, have {self.remaining}")
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def lp_bytes(self) -> bytes:
        n = self.u32()
        return self.take(n)

    def expect_magic(self, magic: bytes) -> None:
        if self.remaining < len(magic):
            raise Truncated(f"need {len(magic)} magic bytes, have {self.remaining}")
        got = self.take(len(magic))
        if got != magic:
            raise BadMagic(f"expected magic {magic!r}, got {got!r}")

    def finish(self) -> None:
        if self.remaining:
            raise TrailingBytes(f"{self.remaining} trailing bytes")
