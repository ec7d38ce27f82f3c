"""Classic DNS wire format (RFC 1035) encode/decode.

Names decode with full compression-pointer expansion; the pointer chain
must move strictly backwards, so parsing is linear and loop-free.  On
encode, compression reuses the longest previously written suffix whose
offset fits the 14-bit pointer, including names embedded in the rdata
of the RFC 1035 record types that carry them (NS, CNAME, SOA, PTR, MX,
SRV).  Decoded rdata for those types is re-serialized uncompressed so a
message compares equal regardless of how it was compressed on the wire.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field


class DnsWireError(Exception):
    pass


class Truncated(DnsWireError):
    pass


class PointerLoop(DnsWireError):
    pass


class LabelOverflow(DnsWireError):
    pass


class NameOverflow(DnsWireError):
    pass


class BadPointerTarget(DnsWireError):
    pass


class SectionOverflow(DnsWireError):
    pass


TYPE_A = 1
TYPE_NS = 2
TYPE_CNAME = 5
TYPE_SOA = 6
TYPE_PTR = 12
TYPE_MX = 15
TYPE_TXT = 16
TYPE_AAAA = 28
TYPE_SRV = 33
TYPE_OPT = 41

CLASS_IN = 1

# Record types whose rdata embeds names that may be pointer-compressed.
NAME_BEARING_TYPES = frozenset({TYPE_NS, TYPE_CNAME, TYPE_SOA, TYPE_PTR, TYPE_MX, TYPE_SRV})

FLAG_QR = 0x8000

_POINTER_MASK = 0xC0
_MAX_POINTER = 0x3FFF
_HEADER_LEN = 12

_ESCAPED = frozenset(b'."\\;()@$')


@dataclass(frozen=True)
class Name:
    """A DNS name as an ordered tuple of labels (empty tuple = root)."""

    labels: tuple[bytes, ...] = ()

    def __post_init__(self) -> None:
        for label in self.labels:
            if not label:
                raise LabelOverflow("empty label")
            if len(label) > 63:
                raise LabelOverflow("label longer than 63 bytes")
        if self.wire_length() > 255:
            raise NameOverflow("name longer than 255 wire bytes")

    @classmethod
    def from_text(cls, text: str) -> "Name":
        """Parse presentation form ('' or '.' both mean root)."""
        if text in ("", "."):
            return cls(())
        if text.endswith(".") and not text.endswith("\\."):
            text = text[:-1]
        labels: list[bytes] = []
        current = bytearray()
        i = 0
        while i < len(text):
            ch = text[i]
            if ch == "\\":
                digits = text[i + 1 : i + 4]
                if len(digits) == 3 and all(c in "0123456789" for c in digits):
                    code = int(digits)
                    if code > 255:
                        raise DnsWireError("escape \\%s out of byte range" % digits)
                    current.append(code)
                    i += 4
                    continue
                if i + 1 >= len(text):
                    raise DnsWireError("dangling escape")
                current.append(ord(text[i + 1]))
                i += 2
                continue
            if ch == ".":
                labels.append(bytes(current))
                current = bytearray()
            else:
                current.append(ord(ch))
            i += 1
        labels.append(bytes(current))
        return cls(tuple(labels))

    def to_text(self) -> str:
        """Presentation form without a trailing dot; root renders as ''."""
        return ".".join(_label_text(label) for label in self.labels)

    def key(self) -> tuple[bytes, ...]:
        """Case-insensitive comparison key."""
        return tuple(label.lower() for label in self.labels)

    def wire_length(self) -> int:
        return sum(len(label) + 1 for label in self.labels) + 1

    def to_wire(self) -> bytes:
        out = bytearray()
        for label in self.labels:
            out.append(len(label))
            out += label
        out.append(0)
        return bytes(out)

    def equals(self, other: "Name") -> bool:
        return self.key() == other.key()


def _label_text(label: bytes) -> str:
    chars = []
    for b in label:
        if b in _ESCAPED:
            chars.append("\\" + chr(b))
        elif 0x20 < b < 0x7F:
            chars.append(chr(b))
        else:
            chars.append("\\%03d" % b)
    return "".join(chars)


@dataclass
class Question:
    name: Name
    rtype: int = TYPE_A
    rclass: int = CLASS_IN

    def matches(self, other: "Question") -> bool:
        return (
            self.name.equals(other.name)
            and self.rtype == other.rtype
            and self.rclass == other.rclass
        )


@dataclass
class ResourceRecord:
    name: Name
    rtype: int
    rclass: int
    ttl: int
    rdata: bytes  # pointer-expanded, uncompressed form

    def __post_init__(self) -> None:
        if len(self.rdata) > 0xFFFF:
            raise SectionOverflow("rdata longer than 65535 bytes")


@dataclass
class DnsMessage:
    id: int = 0
    flags: int = 0
    questions: list[Question] = field(default_factory=list)
    answers: list[ResourceRecord] = field(default_factory=list)
    authority: list[ResourceRecord] = field(default_factory=list)
    additional: list[ResourceRecord] = field(default_factory=list)

    @property
    def is_response(self) -> bool:
        return bool(self.flags & FLAG_QR)


def _read_name(data: bytes, offset: int, min_target: int = 0) -> tuple[Name, int]:
    """Decode a possibly compressed name starting at ``offset``.

    Returns the name and the offset just past its in-place encoding.
    Every pointer must target a strictly smaller offset than the last
    jump (or than the pointer itself for the first jump).
    """
    labels: list[bytes] = []
    total = 1
    pos = offset
    resume = -1
    limit = len(data)  # upper bound for the next pointer target
    while True:
        if pos >= len(data):
            raise Truncated("name runs past message end")
        length = data[pos]
        if length & _POINTER_MASK == _POINTER_MASK:
            if pos + 1 >= len(data):
                raise Truncated("pointer missing second byte")
            target = ((length & 0x3F) << 8) | data[pos + 1]
            if resume < 0:
                resume = pos + 2
                limit = pos
            if target >= limit:
                raise PointerLoop(
                    "pointer at %d targets non-decreasing offset %d" % (pos, target)
                )
            if target < min_target:
                raise BadPointerTarget(
                    "pointer target %d lands inside the header" % target
                )
            limit = target
            pos = target
            continue
        if length & _POINTER_MASK:
            raise LabelOverflow("label length byte %#x uses a reserved prefix" % length)
        if length == 0:
            pos += 1
            break
        if pos + 1 + length > len(data):
            raise Truncated("label runs past message end")
        total += length + 1
        if total > 255:
            raise NameOverflow("expanded name longer than 255 bytes")
        labels.append(bytes(data[pos + 1 : pos + 1 + length]))
        pos += 1 + length
    end = resume if resume >= 0 else pos
    return Name(tuple(labels)), end


def _reencode_rdata(data: bytes, rd_start: int, rd_end: int, rtype: int) -> bytes:
    """Expand pointers inside name-bearing rdata; other types pass through."""
    raw = data[rd_start:rd_end]
    if rtype not in NAME_BEARING_TYPES:
        return raw
    if rtype in (TYPE_NS, TYPE_CNAME, TYPE_PTR):
        name, end = _read_name(data, rd_start, _HEADER_LEN)
        if end != rd_end:
            raise Truncated("trailing bytes after name in rdata")
        return name.to_wire()
    if rtype == TYPE_MX:
        if rd_end - rd_start < 3:
            raise Truncated("MX rdata too short")
        name, end = _read_name(data, rd_start + 2, _HEADER_LEN)
        if end != rd_end:
            raise Truncated("trailing bytes after MX exchange")
        return raw[:2] + name.to_wire()
    if rtype == TYPE_SRV:
        if rd_end - rd_start < 7:
            raise Truncated("SRV rdata too short")
        name, end = _read_name(data, rd_start + 6, _HEADER_LEN)
        if end != rd_end:
            raise Truncated("trailing bytes after SRV target")
        return raw[:6] + name.to_wire()
    # SOA
    mname, pos = _read_name(data, rd_start, _HEADER_LEN)
    rname, pos = _read_name(data, pos, _HEADER_LEN)
    if pos + 20 != rd_end:
        raise Truncated("SOA rdata tail is not 20 bytes")
    return mname.to_wire() + rname.to_wire() + data[pos:rd_end]


def decode_wire(data: bytes) -> DnsMessage:
    if len(data) < 12:
        raise Truncated("message shorter than the 12-byte header")
    msg_id, flags, qd, an, ns, ar = struct.unpack(">HHHHHH", data[:12])
    pos = _HEADER_LEN
    questions = []
    for _ in range(qd):
        name, pos = _read_name(data, pos, _HEADER_LEN)
        if pos + 4 > len(data):
            raise Truncated("question shorter than type+class")
        rtype, rclass = struct.unpack(">HH", data[pos : pos + 4])
        pos += 4
        questions.append(Question(name, rtype, rclass))
    sections: list[list[ResourceRecord]] = []
    for count in (an, ns, ar):
        records = []
        for _ in range(count):
            name, pos = _read_name(data, pos, _HEADER_LEN)
            if pos + 10 > len(data):
                raise Truncated("record header incomplete")
            rtype, rclass, ttl, rdlen = struct.unpack(">HHIH", data[pos : pos + 10])
            pos += 10
            if pos + rdlen > len(data):
                raise Truncated("rdata runs past message end")
            rdata = _reencode_rdata(data, pos, pos + rdlen, rtype)
            pos += rdlen
            records.append(ResourceRecord(name, rtype, rclass, ttl, rdata))
        sections.append(records)
    return DnsMessage(msg_id, flags, questions, *sections)


class _Compressor:
    """Tracks emitted name suffixes; earliest offset wins."""

    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.offsets: dict[tuple[bytes, ...], int] = {}

    def emit(self, out: bytearray, name: Name) -> None:
        labels = name.labels
        key = name.key()
        if self.enabled:
            for i in range(len(labels)):
                offset = self.offsets.get(key[i:])
                if offset is not None and offset <= _MAX_POINTER:
                    self._emit_literals(out, labels[:i], key[:i], key[i:])
                    out += struct.pack(">H", 0xC000 | offset)
                    return
        self._emit_literals(out, labels, key, ())
        out.append(0)

    def _emit_literals(self, out, labels, keys, tail_key) -> None:
        for i, label in enumerate(labels):
            suffix = keys[i:] + tail_key
            if self.enabled and suffix not in self.offsets:
                self.offsets[suffix] = len(out)
            out.append(len(label))
            out += label


def _emit_rdata(out: bytearray, record: ResourceRecord, comp: _Compressor) -> None:
    rdlen_at = len(out)
    out += b"\x00\x00"
    start = len(out)
    rtype, rdata = record.rtype, record.rdata
    if comp.enabled and rtype in NAME_BEARING_TYPES:
        if rtype in (TYPE_NS, TYPE_CNAME, TYPE_PTR):
            name, _ = _read_name(rdata, 0)
            comp.emit(out, name)
        elif rtype == TYPE_MX:
            out += rdata[:2]
            name, _ = _read_name(rdata, 2)
            comp.emit(out, name)
        elif rtype == TYPE_SRV:
            out += rdata[:6]
            name, _ = _read_name(rdata, 6)
            comp.emit(out, name)
        else:  # SOA
            mname, p = _read_name(rdata, 0)
            rname, p = _read_name(rdata, p)
            comp.emit(out, mname)
            comp.emit(out, rname)
            out += rdata[p:]
    else:
        out += rdata
    struct.pack_into(">H", out, rdlen_at, len(out) - start)


def encode_wire(msg: DnsMessage, compress: bool = True) -> bytes:
    for section in (msg.questions, msg.answers, msg.authority, msg.additional):
        if len(section) > 0xFFFF:
            raise SectionOverflow("section count exceeds 16 bits")
    out = bytearray(
        struct.pack(
            ">HHHHHH",
            msg.id,
            msg.flags,
            len(msg.questions),
            len(msg.answers),
            len(msg.authority),
            len(msg.additional),
        )
    )
    comp = _Compressor(compress)
    for question in msg.questions:
        comp.emit(out, question.name)
        out += struct.pack(">HH", question.rtype, question.rclass)
    for record in (*msg.answers, *msg.authority, *msg.additional):
        comp.emit(out, record.name)
        out += struct.pack(">HHI", record.rtype, record.rclass, record.ttl)
        _emit_rdata(out, record, comp)
    return bytes(out)


def unpack_name_rdata(rdata: bytes) -> Name:
    """NS/CNAME/PTR rdata (uncompressed) -> the embedded name."""
    name, end = _read_name(rdata, 0)
    if end != len(rdata):
        raise Truncated("trailing bytes after embedded name")
    return name


def unpack_mx_rdata(rdata: bytes) -> tuple[int, Name]:
    if len(rdata) < 3:
        raise Truncated("MX rdata too short")
    name, end = _read_name(rdata, 2)
    if end != len(rdata):
        raise Truncated("trailing bytes after MX exchange")
    return struct.unpack(">H", rdata[:2])[0], name


def unpack_srv_rdata(rdata: bytes) -> tuple[int, int, int, Name]:
    if len(rdata) < 7:
        raise Truncated("SRV rdata too short")
    name, end = _read_name(rdata, 6)
    if end != len(rdata):
        raise Truncated("trailing bytes after SRV target")
    priority, weight, port = struct.unpack(">HHH", rdata[:6])
    return priority, weight, port, name


def unpack_soa_rdata(rdata: bytes) -> tuple[Name, Name, int, int, int, int, int]:
    mname, pos = _read_name(rdata, 0)
    rname, pos = _read_name(rdata, pos)
    if pos + 20 != len(rdata):
        raise Truncated("SOA rdata tail is not 20 bytes")
    return (mname, rname, *struct.unpack(">IIIII", rdata[pos:]))


def a_rdata(address: str) -> bytes:
    """Pack a dotted-quad IPv4 address."""
    parts = [int(p) for p in address.split(".")]
    if len(parts) != 4 or any(not 0 <= p <= 255 for p in parts):
        raise DnsWireError("bad IPv4 address: %r" % address)
    return bytes(parts)


def name_rdata(text: str) -> bytes:
    """Uncompressed rdata for NS/CNAME/PTR records."""
    return Name.from_text(text).to_wire()


def mx_rdata(preference: int, exchange: str) -> bytes:
    return struct.pack(">H", preference) + Name.from_text(exchange).to_wire()


def srv_rdata(priority: int, weight: int, port: int, target: str) -> bytes:
    return struct.pack(">HHH", priority, weight, port) + Name.from_text(target).to_wire()


def soa_rdata(
    mname: str,
    rname: str,
    serial: int,
    refresh: int,
    retry: int,
    expire: int,
    minimum: int,
) -> bytes:
    return (
        Name.from_text(mname).to_wire()
        + Name.from_text(rname).to_wire()
        + struct.pack(">IIIII", serial, refresh, retry, expire, minimum)
    )
