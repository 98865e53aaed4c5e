"""Low-level field encoding shared by frames, stored records and sealed payloads.

A field sequence is each field's bytes preceded by a 4-byte big-endian
length. Integers are big-endian with no leading zero byte (zero encodes
as the empty string), so every value has exactly one encoding and the
whole layer is injective.
"""

from __future__ import annotations

from .errors import (
    FieldFormatError,
    FieldOverflowError,
    TrailingGarbageError,
    TruncatedFrameError,
)

MAX_FIELD_LEN = 1 << 24


def int_to_bytes(value: int) -> bytes:
    """Canonical big-endian integer: minimal width, zero is empty."""
    if value < 0:
        raise ValueError("negative integers have no wire form")
    if value == 0:
        return b""
    return value.to_bytes((value.bit_length() + 7) // 8, "big")


def int_from_bytes(data: bytes) -> int:
    """Inverse of int_to_bytes; rejects non-minimal encodings."""
    if data and data[0] == 0:
        raise FieldFormatError("non-canonical integer (leading zero byte)")
    return int.from_bytes(data, "big")


def encode_fields(fields: list[bytes]) -> bytes:
    """Length-prefix and concatenate a field sequence."""
    parts = []
    for f in fields:
        if len(f) >= MAX_FIELD_LEN:
            raise ValueError("field too large")
        parts.append(len(f).to_bytes(4, "big"))
        parts.append(f)
    return b"".join(parts)


def split_fields(data: bytes, count: int) -> list[bytes]:
    """Parse exactly `count` length-prefixed fields covering all of `data`."""
    return split_fields_with_spans(data, count)[0]


def split_fields_with_spans(data: bytes, count: int) -> tuple[list[bytes], list[tuple[int, int]]]:
    """Like split_fields, also returning each field's (start, end) byte span."""
    fields: list[bytes] = []
    spans: list[tuple[int, int]] = []
    offset = 0
    for _ in range(count):
        if offset + 4 > len(data):
            raise TruncatedFrameError("missing field length prefix")
        flen = int.from_bytes(data[offset:offset + 4], "big")
        offset += 4
        if offset + flen > len(data):
            raise FieldOverflowError("field length prefix exceeds available bytes")
        fields.append(data[offset:offset + flen])
        spans.append((offset, offset + flen))
        offset += flen
    if offset != len(data):
        raise TrailingGarbageError(f"{len(data) - offset} unexpected trailing bytes")
    return fields, spans
