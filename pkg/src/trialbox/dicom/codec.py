"""Explicit-VR little-endian parser and serializer.

Only one transfer syntax is supported; files offered in anything else are
rejected rather than misread. Sequences are emitted in the undefined-length
form with item/sequence delimiters, which is also what the parser expects
back, so serialize->parse round-trips are byte-stable.

Zero-length elements parse to the empty value for their VR ("" / b"" / ()).
A ``None`` element value is accepted at construction time and serializes
identically to the empty value.
"""

from __future__ import annotations

import struct

from .model import (
    DataElement,
    DataSet,
    Tag,
    VR_BINARY,
    VR_LONG_FORM,
    VR_NUMERIC,
    VR_TEXT,
)

EXPLICIT_VR_LITTLE_ENDIAN = "1.2.840.10008.1.2.1"

TRANSFER_SYNTAX_TAG = Tag(0x0002, 0x0010)

_ITEM = (0xFFFE, 0xE000)
_ITEM_DELIM = (0xFFFE, 0xE00D)
_SEQ_DELIM = (0xFFFE, 0xE0DD)
_UNDEFINED = 0xFFFFFFFF


class DicomCodecError(Exception):
    """Base class for encode/decode failures."""


class TruncatedInput(DicomCodecError):
    """A length field points past the end of the input."""


class BadMagic(DicomCodecError):
    """A preamble is present but the magic marker is not 'DICM'."""


class UnsupportedTransferSyntax(DicomCodecError):
    """The file declares a transfer syntax other than explicit VR little endian."""


class OddLengthUnpadded(DicomCodecError):
    """A binary payload has odd length, which the wire format cannot carry."""


class ValueTooLong(DicomCodecError):
    """A short-form element value exceeds the 16-bit length field."""


class _Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, n: int) -> bytes:
        if n > self.remaining():
            raise TruncatedInput(f"need {n} bytes at offset {self.pos}, have {self.remaining()}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def peek_tag(self) -> tuple[int, int]:
        if self.remaining() < 4:
            raise TruncatedInput(f"need 4 bytes at offset {self.pos}, have {self.remaining()}")
        return struct.unpack_from("<HH", self.data, self.pos)

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def parse_dataset(data: bytes) -> DataSet:
    """Parse a full file or bare element stream into a DataSet.

    Accepts an optional 128-byte preamble + "DICM" magic. A declared
    transfer syntax other than explicit VR little endian is rejected.
    """
    if len(data) == 0:
        raise TruncatedInput("empty input")
    reader = _Reader(data)
    if len(data) >= 132 and data[:128] == b"\x00" * 128:
        reader.take(128)
        magic = reader.take(4)
        if magic != b"DICM":
            raise BadMagic(f"expected DICM after preamble, found {magic!r}")
    elements = _read_elements(reader, end=len(data))
    ds = DataSet(elements)
    ts = ds.text(TRANSFER_SYNTAX_TAG)
    if ts and ts != EXPLICIT_VR_LITTLE_ENDIAN:
        raise UnsupportedTransferSyntax(ts)
    return ds


def _read_elements(reader: _Reader, end: int, stop_at_item_delim: bool = False) -> list[DataElement]:
    elements: list[DataElement] = []
    while reader.pos < end:
        group, element = reader.peek_tag()
        if stop_at_item_delim and (group, element) == _ITEM_DELIM:
            reader.take(4)
            reader.u32()  # delimiter length, always zero
            return elements
        elements.append(_read_element(reader))
    return elements


def _read_element(reader: _Reader) -> DataElement:
    group = reader.u16()
    element = reader.u16()
    tag = Tag(group, element)
    vr = reader.take(2).decode("ascii", errors="replace")
    if vr == "SQ":
        reader.take(2)  # reserved
        length = reader.u32()
        items = _read_sequence_items(reader, length)
        return DataElement(tag, "SQ", items)
    if vr in VR_LONG_FORM:
        reader.take(2)
        length = reader.u32()
    elif vr in VR_TEXT or vr in VR_NUMERIC:
        length = reader.u16()
    else:
        raise DicomCodecError(f"unsupported VR {vr!r} for tag {tag}")
    payload = reader.take(length)
    return DataElement(tag, vr, _decode_value(vr, payload))


def _read_sequence_items(reader: _Reader, length: int) -> list[DataSet]:
    items: list[DataSet] = []
    if length == _UNDEFINED:
        while True:
            group, element = reader.peek_tag()
            if (group, element) == _SEQ_DELIM:
                reader.take(4)
                reader.u32()
                return items
            items.append(_read_item(reader))
    else:
        end = reader.pos + length
        if end > len(reader.data):
            raise TruncatedInput(f"sequence length {length} exceeds input")
        while reader.pos < end:
            items.append(_read_item(reader))
        return items


def _read_item(reader: _Reader) -> DataSet:
    group = reader.u16()
    element = reader.u16()
    if (group, element) != _ITEM:
        raise DicomCodecError(f"expected sequence item, found ({group:04X},{element:04X})")
    length = reader.u32()
    if length == _UNDEFINED:
        elements = _read_elements(reader, end=len(reader.data), stop_at_item_delim=True)
    else:
        end = reader.pos + length
        if end > len(reader.data):
            raise TruncatedInput(f"item length {length} exceeds input")
        elements = _read_elements(reader, end=end)
    return DataSet(elements)


def _decode_value(vr: str, payload: bytes):
    if vr in VR_BINARY:
        return payload
    if vr in VR_NUMERIC:
        if len(payload) % 2:
            raise DicomCodecError(f"{vr} payload length {len(payload)} is not a multiple of 2")
        return tuple(struct.unpack(f"<{len(payload) // 2}H", payload)) if payload else ()
    text = payload.decode("utf-8", errors="replace")
    if vr == "UI":
        return text.rstrip("\x00")
    return text.rstrip(" ")


def serialize_dataset(ds: DataSet, file_meta: bool | None = None) -> bytes:
    """Serialize to explicit-VR little-endian bytes.

    ``file_meta`` controls the 128-byte preamble + "DICM" header: True
    forces it, False suppresses it, None (default) emits it iff the
    dataset carries any group 0002 element.
    """
    has_meta_elements = any(el.tag.group == 0x0002 for el in ds)
    emit_header = file_meta if file_meta is not None else has_meta_elements
    out = bytearray()
    if emit_header:
        out += b"\x00" * 128
        out += b"DICM"
    for el in ds:
        out += _encode_element(el)
    return bytes(out)


def _encode_element(el: DataElement) -> bytes:
    head = struct.pack("<HH", el.tag.group, el.tag.element) + el.vr.encode("ascii")
    if el.vr == "SQ":
        body = bytearray()
        for item in el.value:
            item_bytes = b"".join(_encode_element(child) for child in item)
            body += struct.pack("<HHI", *_ITEM, _UNDEFINED)
            body += item_bytes
            body += struct.pack("<HHI", *_ITEM_DELIM, 0)
        body += struct.pack("<HHI", *_SEQ_DELIM, 0)
        return head + struct.pack("<HI", 0, _UNDEFINED) + bytes(body)
    payload = _encode_value(el)
    if el.vr in VR_LONG_FORM:
        return head + struct.pack("<HI", 0, len(payload)) + payload
    if len(payload) > 0xFFFE:
        raise ValueTooLong(f"{el.tag} {el.vr} value of {len(payload)} bytes exceeds the 16-bit length form")
    return head + struct.pack("<H", len(payload)) + payload


def _encode_value(el: DataElement) -> bytes:
    value = el.value
    if el.vr in VR_BINARY:
        payload = value if value is not None else b""
        if len(payload) % 2:
            raise OddLengthUnpadded(f"{el.tag} {el.vr} payload has odd length {len(payload)}")
        return payload
    if el.vr in VR_NUMERIC:
        values = value if value is not None else ()
        return struct.pack(f"<{len(values)}H", *values)
    text = value if value is not None else ""
    payload = text.encode("utf-8")
    if len(payload) % 2:
        payload += b"\x00" if el.vr == "UI" else b" "
    return payload
