"""Compact DNS messages as a single CBOR array.

The layout leans on element order instead of field keys:

    [flags?, question?, section, section, section]

* ``flags`` (unsigned) appears only when it differs from the role's
  default (0x0100 for queries, 0x8180 for responses).
* the question is elided from a response when the decoder already knows
  it from the matching request; queries always carry it.  Within the
  question, class is dropped when IN and type additionally when AAAA.
* trailing sections are dropped and the remaining count disambiguates
  which ones are present (authority before additional on the chopping
  block; answers in queries are dropped entirely unless
  ``allow_query_answers`` is set, where they get top elision priority).
* a record array is ``[name..., ttl, type, rdata..., class?]``; the
  name is omitted when it equals the question name (plain mode only).

Names are either one text string (presentation form, mode ``None``) or
spliced label components.  In component mode every emitted text string
gets a depth-first index and each name suffix remembers the index of
its first component; later names replace a known suffix with a single
reference tag carrying that index, and the decoder rebuilds the name by
jumping to the indexed component and appending what follows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import cbor
from .cbor import Array, Bytes, CborItem, Tag, Text, Uint
from .dnswire import (
    CLASS_IN,
    DnsMessage,
    DnsWireError,
    Name,
    Question,
    ResourceRecord,
    TYPE_AAAA,
    TYPE_CNAME,
    TYPE_MX,
    TYPE_NS,
    TYPE_PTR,
    TYPE_SOA,
    TYPE_SRV,
    mx_rdata,
    soa_rdata,
    srv_rdata,
    unpack_mx_rdata,
    unpack_name_rdata,
    unpack_soa_rdata,
    unpack_srv_rdata,
)

ROLE_QUERY = "query"
ROLE_RESPONSE = "response"

DEFAULT_QUERY_FLAGS = 0x0100
DEFAULT_RESPONSE_FLAGS = 0x8180

# Default reference tag numbers; neither is an IANA assignment.
REF_TAG_1PLUS0 = 7
REF_TAG_1PLUS1 = 140


class DnsCborError(Exception):
    pass


class MultiQuestion(DnsCborError):
    pass


class BadReference(DnsCborError):
    pass


class TypeMismatch(DnsCborError):
    pass


class MissingQuestionContext(DnsCborError):
    pass


@dataclass(frozen=True)
class ComponentRef:
    """Name compression via indexed components and a reference tag."""

    tag: int = REF_TAG_1PLUS0

    def __post_init__(self) -> None:
        if not 0 <= self.tag <= 255:
            raise DnsCborError("reference tag must fit one byte of argument")

    @classmethod
    def one_plus_zero(cls, tag: int = REF_TAG_1PLUS0) -> "ComponentRef":
        if tag > 23:
            raise DnsCborError("1+0 reference tag must encode in a 1-byte head")
        return cls(tag)

    @classmethod
    def one_plus_one(cls, tag: int = REF_TAG_1PLUS1) -> "ComponentRef":
        if not 24 <= tag <= 255:
            raise DnsCborError("1+1 reference tag must need a 2-byte head")
        return cls(tag)


CompressionMode = ComponentRef | None


@dataclass
class CodecContext:
    role: str = ROLE_QUERY
    request_question: Question | None = None
    allow_query_answers: bool = False
    structured_rdata: bool = True
    default_query_flags: int = DEFAULT_QUERY_FLAGS
    default_response_flags: int = DEFAULT_RESPONSE_FLAGS
    mode: CompressionMode = None

    @property
    def default_flags(self) -> int:
        if self.role == ROLE_RESPONSE:
            return self.default_response_flags
        return self.default_query_flags


def _fold_case(component: str) -> str:
    # DNS case-insensitivity covers ASCII letters only; multi-byte UTF-8
    # sequences never contain bytes in the A-Z range.
    return component.encode("utf-8").lower().decode("utf-8")


@dataclass
class ComponentIndex:
    """Encoder-side suffix registry for component referencing.

    Every literally emitted component consumes the next index; each
    suffix of an emitted name maps to the index of its first component,
    and the earliest registration wins.
    """

    next_index: int = 0
    suffix_table: dict[tuple[str, ...], int] = field(default_factory=dict)

    def lookup_longest_suffix(
        self, labels: tuple[str, ...]
    ) -> tuple[int, int | None]:
        """Minimal literal count plus the reference index for the rest."""
        key = tuple(_fold_case(c) for c in labels)
        for i in range(len(labels)):
            index = self.suffix_table.get(key[i:])
            if index is not None:
                return i, index
        return len(labels), None

    def register_name(self, labels: tuple[str, ...], literal_count: int) -> None:
        """Record a name emitted as ``literal_count`` components plus an
        optional reference covering the remainder of ``labels``."""
        key = tuple(_fold_case(c) for c in labels)
        for i in range(literal_count):
            self.suffix_table.setdefault(key[i:], self.next_index + i)
        self.next_index += literal_count

    def register_root(self) -> None:
        # The root name is one empty text string; it consumes an index
        # but registers no suffix (a reference would never be shorter).
        self.next_index += 1


@dataclass
class EncodedMessage:
    """Encoder output plus what was lost or elided along the way."""

    data: bytes
    item: CborItem
    dropped_answers: int = 0
    question_elided: bool = False

    def __bytes__(self) -> bytes:
        return self.data


def _label_components(name: Name) -> tuple[str, ...]:
    try:
        return tuple(label.decode("utf-8") for label in name.labels)
    except UnicodeDecodeError as exc:
        raise TypeMismatch("name label is not UTF-8 text: %s" % exc) from exc


class _Encoder:
    def __init__(self, ctx: CodecContext):
        self.ctx = ctx
        self.index = ComponentIndex()
        self.question_emitted = False

    def name_items(self, name: Name) -> list[CborItem]:
        mode = self.ctx.mode
        if mode is None:
            return [Text(name.to_text())]
        if not name.labels:
            self.index.register_root()
            return [Text("")]
        components = _label_components(name)
        literal_count, ref = self.index.lookup_longest_suffix(components)
        items: list[CborItem] = [Text(c) for c in components[:literal_count]]
        if ref is not None:
            items.append(Tag(mode.tag, Uint(ref)))
        self.index.register_name(components, literal_count)
        return items

    def question_items(self, question: Question) -> Array:
        items = self.name_items(question.name)
        if question.rclass != CLASS_IN:
            items.append(Uint(question.rtype))
            items.append(Uint(question.rclass))
        elif question.rtype != TYPE_AAAA:
            items.append(Uint(question.rtype))
        return Array(items)

    def rr_items(self, record: ResourceRecord, question_name: Name) -> Array:
        items: list[CborItem] = []
        # An owner equal to the question name is elided unless component
        # mode can reference the physically present question components
        # (a 1-2 byte reference; with the question elided there is nothing
        # to point at and elision stays cheaper than respelling).
        elide_name = record.name.equals(question_name) and (
            self.ctx.mode is None or not self.question_emitted
        )
        if not elide_name:
            items.extend(self.name_items(record.name))
        items.append(Uint(record.ttl))
        items.append(Uint(record.rtype))
        items.extend(self.rdata_items(record))
        if record.rclass != CLASS_IN:
            items.append(Uint(record.rclass))
        return Array(items)

    def rdata_items(self, record: ResourceRecord) -> list[CborItem]:
        if not self.ctx.structured_rdata:
            return [Bytes(record.rdata)]
        rtype, rdata = record.rtype, record.rdata
        try:
            if rtype in (TYPE_CNAME, TYPE_NS, TYPE_PTR):
                return self.name_items(unpack_name_rdata(rdata))
            if rtype == TYPE_SOA:
                mname, rname, *counters = unpack_soa_rdata(rdata)
                return [
                    Array(
                        [
                            self.nested_name(mname),
                            self.nested_name(rname),
                            *(Uint(v) for v in counters),
                        ]
                    )
                ]
            if rtype == TYPE_MX:
                preference, exchange = unpack_mx_rdata(rdata)
                return [Array([Uint(preference), self.nested_name(exchange)])]
            if rtype == TYPE_SRV:
                priority, weight, port, target = unpack_srv_rdata(rdata)
                return [
                    Array(
                        [
                            Uint(priority),
                            Uint(weight),
                            Uint(port),
                            self.nested_name(target),
                        ]
                    )
                ]
        except DnsWireError:
            pass  # malformed structured rdata travels opaquely
        return [Bytes(rdata)]

    def nested_name(self, name: Name) -> CborItem:
        if self.ctx.mode is None:
            return Text(name.to_text())
        return Array(self.name_items(name))


def _plan_sections(
    msg: DnsMessage, ctx: CodecContext
) -> tuple[list[list[ResourceRecord]], int]:
    """Pick the emitted section lists; returns (sections, dropped answers)."""
    answers, authority, additional = msg.answers, msg.authority, msg.additional
    if ctx.role == ROLE_RESPONSE:
        if authority:
            return [answers, authority, additional], 0
        if additional:
            return [answers, additional], 0
        if answers:
            return [answers], 0
        return [], 0
    # queries: answers have the highest elision priority
    dropped = 0
    if answers and not ctx.allow_query_answers:
        dropped = len(answers)
        answers = []
    if answers:
        return [answers, authority, additional], dropped
    if authority:
        return [authority, additional], dropped
    if additional:
        return [additional], dropped
    return [], dropped


def message_to_item(msg: DnsMessage, ctx: CodecContext) -> EncodedMessage:
    """Build the outer CBOR array; ``data`` is left empty here."""
    if len(msg.questions) != 1:
        raise MultiQuestion(
            "message carries %d questions; exactly one is required" % len(msg.questions)
        )
    question = msg.questions[0]
    encoder = _Encoder(ctx)
    outer: list[CborItem] = []
    if msg.flags != ctx.default_flags:
        outer.append(Uint(msg.flags))
    question_elided = (
        ctx.role == ROLE_RESPONSE
        and ctx.request_question is not None
        and ctx.request_question.matches(question)
    )
    sections, dropped = _plan_sections(msg, ctx)
    if question_elided and not outer and not sections:
        # Everything elidable at once would leave an undecodable empty
        # array; keep the question so the output stays self-describing.
        question_elided = False
    if not question_elided:
        outer.append(encoder.question_items(question))
        encoder.question_emitted = True
    for records in sections:
        outer.append(Array([encoder.rr_items(r, question.name) for r in records]))
    return EncodedMessage(
        data=b"",
        item=Array(outer),
        dropped_answers=dropped,
        question_elided=question_elided,
    )


def encode_message(msg: DnsMessage, ctx: CodecContext) -> EncodedMessage:
    encoded = message_to_item(msg, ctx)
    encoded.data = cbor.encode(encoded.item)
    return encoded


def _expect_uint(item: CborItem, bits: int, what: str) -> int:
    if not isinstance(item, Uint) or item.value >= 1 << bits:
        raise TypeMismatch("%s must be an unsigned %d-bit integer" % (what, bits))
    return item.value


class _Decoder:
    def __init__(self, ctx: CodecContext):
        self.ctx = ctx
        self.suffixes: list[tuple[str, ...]] = []

    def is_ref(self, item: CborItem) -> bool:
        mode = self.ctx.mode
        return mode is not None and isinstance(item, Tag) and item.number == mode.tag

    def parse_name(self, elems: list[CborItem], i: int) -> tuple[Name, int]:
        if self.ctx.mode is None:
            if i >= len(elems) or not isinstance(elems[i], Text):
                raise TypeMismatch("expected a name text string")
            try:
                return Name.from_text(elems[i].data), i + 1
            except DnsWireError as exc:
                raise TypeMismatch("bad name: %s" % exc) from exc
        texts: list[str] = []
        tail: tuple[str, ...] | None = None
        while i < len(elems):
            element = elems[i]
            if isinstance(element, Text):
                texts.append(element.data)
                i += 1
                continue
            if self.is_ref(element):
                if not isinstance(element.content, Uint):
                    raise TypeMismatch("reference tag must carry an unsigned index")
                index = element.content.value
                if index >= len(self.suffixes):
                    raise BadReference(
                        "reference %d but only %d components seen"
                        % (index, len(self.suffixes))
                    )
                tail = self.suffixes[index]
                i += 1
            break
        if not texts and tail is None:
            raise TypeMismatch("expected name components")
        if texts == [""] and tail is None:
            self.suffixes.append(())
            return Name(()), i
        if any(not t for t in texts):
            raise TypeMismatch("empty name component")
        components = tuple(texts) + (tail or ())
        for j in range(len(texts)):
            self.suffixes.append(components[j:])
        try:
            labels = tuple(c.encode("utf-8") for c in components)
            return Name(labels), i
        except (UnicodeEncodeError, DnsWireError) as exc:
            raise TypeMismatch("bad name components: %s" % exc) from exc

    def parse_nested_name(self, element: CborItem) -> Name:
        if self.ctx.mode is None:
            if not isinstance(element, Text):
                raise TypeMismatch("expected a name text string")
            return Name.from_text(element.data)
        if not isinstance(element, Array):
            raise TypeMismatch("expected an array of name components")
        name, consumed = self.parse_name(element.items, 0)
        if consumed != len(element.items):
            raise TypeMismatch("stray elements after nested name")
        return name

    def parse_question(self, arr: Array) -> Question:
        name, i = self.parse_name(arr.items, 0)
        rest = arr.items[i:]
        if len(rest) == 0:
            return Question(name, TYPE_AAAA, CLASS_IN)
        if len(rest) == 1:
            return Question(name, _expect_uint(rest[0], 16, "question type"), CLASS_IN)
        if len(rest) == 2:
            return Question(
                name,
                _expect_uint(rest[0], 16, "question type"),
                _expect_uint(rest[1], 16, "question class"),
            )
        raise TypeMismatch("question array has %d trailing items" % len(rest))

    def parse_rr(self, arr: CborItem, question_name: Name) -> ResourceRecord:
        if not isinstance(arr, Array) or not arr.items:
            raise TypeMismatch("record must be a non-empty array")
        elems = arr.items
        if isinstance(elems[0], Uint):
            name = question_name
            i = 0
        else:
            name, i = self.parse_name(elems, 0)
        if i + 1 >= len(elems):
            raise TypeMismatch("record TTL or type missing")
        ttl = _expect_uint(elems[i], 32, "record TTL")
        rtype = _expect_uint(elems[i + 1], 16, "record type")
        i += 2
        rdata, i = self.parse_rdata(rtype, elems, i)
        rclass = CLASS_IN
        if i < len(elems):
            rclass = _expect_uint(elems[i], 16, "record class")
            i += 1
        if i != len(elems):
            raise TypeMismatch("stray elements after record class")
        return ResourceRecord(name, rtype, rclass, ttl, rdata)

    def parse_rdata(
        self, rtype: int, elems: list[CborItem], i: int
    ) -> tuple[bytes, int]:
        if i >= len(elems):
            raise TypeMismatch("record data missing")
        element = elems[i]
        if self.ctx.structured_rdata:
            if rtype in (TYPE_CNAME, TYPE_NS, TYPE_PTR) and not isinstance(
                element, Bytes
            ):
                name, i = self.parse_name(elems, i)
                return name.to_wire(), i
            if rtype == TYPE_SOA and isinstance(element, Array):
                f = element.items
                if len(f) != 7:
                    raise TypeMismatch("SOA data must be [mname, rname, 5 counters]")
                return (
                    soa_rdata(
                        self.parse_nested_name(f[0]).to_text(),
                        self.parse_nested_name(f[1]).to_text(),
                        *(_expect_uint(x, 32, "SOA counter") for x in f[2:]),
                    ),
                    i + 1,
                )
            if rtype == TYPE_MX and isinstance(element, Array):
                f = element.items
                if len(f) != 2:
                    raise TypeMismatch("MX data must be [preference, exchange]")
                return (
                    mx_rdata(
                        _expect_uint(f[0], 16, "MX preference"),
                        self.parse_nested_name(f[1]).to_text(),
                    ),
                    i + 1,
                )
            if rtype == TYPE_SRV and isinstance(element, Array):
                f = element.items
                if len(f) != 4:
                    raise TypeMismatch("SRV data must be [prio, weight, port, target]")
                return (
                    srv_rdata(
                        _expect_uint(f[0], 16, "SRV priority"),
                        _expect_uint(f[1], 16, "SRV weight"),
                        _expect_uint(f[2], 16, "SRV port"),
                        self.parse_nested_name(f[3]).to_text(),
                    ),
                    i + 1,
                )
        if not isinstance(element, Bytes):
            raise TypeMismatch(
                "record data for type %d must be a byte string" % rtype
            )
        return element.data, i + 1


def _is_question_shape(element: CborItem, ctx: CodecContext) -> bool:
    if not isinstance(element, Array) or not element.items:
        return False
    first = element.items[0]
    if isinstance(first, Text):
        return True
    mode = ctx.mode
    return mode is not None and isinstance(first, Tag) and first.number == mode.tag


def item_to_message(item: CborItem, ctx: CodecContext) -> DnsMessage:
    if not isinstance(item, Array):
        raise TypeMismatch("message must be a CBOR array")
    elems = item.items
    if not elems:
        raise TypeMismatch("empty message array")
    decoder = _Decoder(ctx)
    i = 0
    flags = ctx.default_flags
    if isinstance(elems[i], Uint):
        flags = _expect_uint(elems[i], 16, "flags")
        i += 1
    question: Question | None = None
    if i < len(elems) and _is_question_shape(elems[i], ctx):
        question = decoder.parse_question(elems[i])
        i += 1
    if question is None:
        if ctx.role != ROLE_RESPONSE:
            raise TypeMismatch("query without a question section")
        if ctx.request_question is None:
            raise MissingQuestionContext(
                "response elides the question and no request context was given"
            )
        q = ctx.request_question
        question = Question(q.name, q.rtype, q.rclass)
    section_items = elems[i:]
    for section in section_items:
        if not isinstance(section, Array) or not all(
            isinstance(e, Array) for e in section.items
        ):
            raise TypeMismatch("sections must be arrays of record arrays")
    count = len(section_items)
    answers: list[ResourceRecord] = []
    authority: list[ResourceRecord] = []
    additional: list[ResourceRecord] = []
    if ctx.role == ROLE_RESPONSE:
        order = {1: ("an",), 2: ("an", "ar"), 3: ("an", "ns", "ar")}.get(count)
    elif count == 3 and ctx.allow_query_answers:
        order = ("an", "ns", "ar")
    else:
        order = {0: (), 1: ("ar",), 2: ("ns", "ar")}.get(count)
    if count and order is None:
        raise TypeMismatch("%d section arrays do not fit role %s" % (count, ctx.role))
    targets = {"an": answers, "ns": authority, "ar": additional}
    for slot, section in zip(order or (), section_items):
        targets[slot].extend(
            decoder.parse_rr(rr, question.name) for rr in section.items
        )
    return DnsMessage(
        id=0,
        flags=flags,
        questions=[question],
        answers=answers,
        authority=authority,
        additional=additional,
    )


def decode_message(data: bytes, ctx: CodecContext) -> DnsMessage:
    item, consumed = cbor.decode(data)
    if consumed != len(data):
        raise TypeMismatch("trailing bytes after message item")
    return item_to_message(item, ctx)
