"""Packed envelope: a prepended table of shared values referenced from the rump.

``pack`` runs two passes.  Pass one enumerates candidates over the item
tree: exact duplicate scalars (full mode), text suffixes at dot
boundaries shared by two or more strings (both modes), and byte-string
prefixes of three or more bytes shared by two or more strings (full
mode).  A candidate is admitted while its net saving stays positive,

    saving = sum over occurrences (occurrence size - reference size)
             - table entry size,

largest saving first, ties broken by first occurrence in preorder; a
rewritten string never gets rewritten again.  Pass two substitutes the
references: whole values become ``Simple(i)`` (or tag 6 above index 15),
suffixes ``tag 216 [head, i]``, prefixes ``tag 217 [i, tail]``.  The
envelope ``tag 113 [table, rump]`` is emitted even when the table is
empty, so the no-redundancy penalty is exactly the four envelope bytes.

Lite mode keeps only the text-suffix candidates, so its table is all
text strings.  Tag and envelope numbers are defaults, not assignments.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import cbor
from .cbor import Array, Bytes, CborItem, Map, Nint, Simple, Tag, Text, Uint

PACKED_FULL = "full"
PACKED_LITE = "lite"


class DnsPackedError(Exception):
    pass


class AlreadyPacked(DnsPackedError):
    pass


class IndexOutOfRange(DnsPackedError):
    pass


class ForwardReference(DnsPackedError):
    pass


class TypeMismatch(DnsPackedError):
    pass


@dataclass(frozen=True)
class PackOptions:
    envelope_tag: int = 113
    value_tag: int = 6
    suffix_tag: int = 216
    prefix_tag: int = 217
    simple_ref_limit: int = 16  # Simple(i) references for i below this
    min_prefix_len: int = 3

    @property
    def reference_tags(self) -> frozenset[int]:
        return frozenset((self.value_tag, self.suffix_tag, self.prefix_tag))


@dataclass
class PackedEnvelope:
    table: list[CborItem]
    rump: CborItem
    options: PackOptions = PackOptions()

    def to_item(self) -> CborItem:
        return Tag(self.options.envelope_tag, Array([Array(list(self.table)), self.rump]))

    def encode(self) -> bytes:
        return cbor.encode(self.to_item())

    @classmethod
    def from_item(cls, item: CborItem, options: PackOptions = PackOptions()) -> "PackedEnvelope":
        if not isinstance(item, Tag) or item.number != options.envelope_tag:
            raise TypeMismatch("expected envelope tag %d" % options.envelope_tag)
        body = item.content
        if not isinstance(body, Array) or len(body.items) != 2:
            raise TypeMismatch("envelope must hold [table, rump]")
        table = body.items[0]
        if not isinstance(table, Array):
            raise TypeMismatch("packing table must be an array")
        return cls(list(table.items), body.items[1], options)

    @classmethod
    def from_bytes(cls, data: bytes, options: PackOptions = PackOptions()) -> "PackedEnvelope":
        item, consumed = cbor.decode(data)
        if consumed != len(data):
            raise TypeMismatch("trailing bytes after envelope")
        return cls.from_item(item, options)


def _scan_references(item: CborItem, opts: PackOptions) -> None:
    if isinstance(item, Simple) and item.value < opts.simple_ref_limit:
        raise AlreadyPacked("input holds reference simple value %d" % item.value)
    if isinstance(item, Tag):
        if item.number in opts.reference_tags:
            raise AlreadyPacked("input holds reference tag %d" % item.number)
        _scan_references(item.content, opts)
    elif isinstance(item, Array):
        for child in item.items:
            _scan_references(child, opts)
    elif isinstance(item, Map):
        for key, value in item.entries:
            _scan_references(key, opts)
            _scan_references(value, opts)


def _walk(item: CborItem, positions: list[CborItem]) -> None:
    """Preorder enumeration; a node's position is its list index."""
    positions.append(item)
    if isinstance(item, Array):
        for child in item.items:
            _walk(child, positions)
    elif isinstance(item, Map):
        for key, value in item.entries:
            _walk(key, positions)
            _walk(value, positions)
    elif isinstance(item, Tag):
        _walk(item.content, positions)


def _dot_suffixes(text: str) -> list[tuple[str, str]]:
    """(head, suffix) splits at component boundaries, whole string included."""
    splits = [("", text)]
    for i, ch in enumerate(text):
        if ch == "." and i + 1 < len(text):
            splits.append((text[: i + 1], text[i + 1 :]))
    return splits


class _Candidate:
    __slots__ = ("kind", "entry", "occurrences", "first")

    def __init__(self, kind: str, entry: CborItem, occurrences: dict[int, CborItem]):
        self.kind = kind  # "value" | "suffix" | "prefix"
        self.entry = entry
        self.occurrences = occurrences  # position -> original item there
        self.first = min(occurrences)


def _value_ref(index: int, opts: PackOptions) -> CborItem:
    if index < opts.simple_ref_limit:
        return Simple(index)
    return Tag(opts.value_tag, Uint(index - opts.simple_ref_limit))


def _candidates(item: CborItem, mode: str, opts: PackOptions) -> list[_Candidate]:
    positions: list[CborItem] = []
    _walk(item, positions)
    out: list[_Candidate] = []
    if mode == PACKED_FULL:
        values: dict[CborItem, dict[int, CborItem]] = {}
        for pos, node in enumerate(positions):
            if isinstance(node, (Text, Bytes, Uint, Nint)) and cbor.item_size(node) >= 2:
                values.setdefault(node, {})[pos] = node
        for node, occs in values.items():
            if len(occs) >= 2:
                out.append(_Candidate("value", node, occs))
    suffixes: dict[str, dict[int, CborItem]] = {}
    for pos, node in enumerate(positions):
        if isinstance(node, Text) and node.data:
            for _, suffix in _dot_suffixes(node.data):
                suffixes.setdefault(suffix, {})[pos] = node
    for suffix, occs in suffixes.items():
        if len(occs) >= 2:
            out.append(_Candidate("suffix", Text(suffix), occs))
    if mode == PACKED_FULL:
        strings = [
            (pos, node.data)
            for pos, node in enumerate(positions)
            if isinstance(node, Bytes) and len(node.data) >= opts.min_prefix_len
        ]
        prefixes: set[bytes] = set()
        for i in range(len(strings)):
            for j in range(i + 1, len(strings)):
                a, b = strings[i][1], strings[j][1]
                n = 0
                for x, y in zip(a, b):
                    if x != y:
                        break
                    n += 1
                if n >= opts.min_prefix_len:
                    prefixes.add(a[:n])
        for prefix in prefixes:
            occs = {pos: positions[pos] for pos, data in strings if data.startswith(prefix)}
            if len(occs) >= 2:
                out.append(_Candidate("prefix", Bytes(prefix), occs))
    # Deterministic ordering independent of hash seeds: earliest occurrence,
    # then a canonical rendering of the entry.
    out.sort(key=lambda c: (c.first, c.kind, cbor.encode(c.entry)))
    return out


def _reference_item(cand: _Candidate, original: CborItem, index: int, opts: PackOptions) -> CborItem:
    if cand.kind == "value":
        return _value_ref(index, opts)
    if cand.kind == "suffix":
        head = original.data[: len(original.data) - len(cand.entry.data)]  # type: ignore[union-attr]
        return Tag(opts.suffix_tag, Array([Text(head), Uint(index)]))
    tail = original.data[len(cand.entry.data) :]  # type: ignore[union-attr]
    return Tag(opts.prefix_tag, Array([Uint(index), Bytes(tail)]))


def _net_saving(cand: _Candidate, index: int, consumed: set[int], opts: PackOptions) -> int:
    saving = -cbor.item_size(cand.entry)
    for pos, original in cand.occurrences.items():
        if pos in consumed:
            continue
        saving += cbor.item_size(original) - cbor.item_size(
            _reference_item(cand, original, index, opts)
        )
    return saving


def pack(item: CborItem, mode: str = PACKED_FULL, opts: PackOptions = PackOptions()) -> PackedEnvelope:
    if mode not in (PACKED_FULL, PACKED_LITE):
        raise DnsPackedError("unknown packing mode %r" % mode)
    _scan_references(item, opts)
    candidates = _candidates(item, mode, opts)
    table: list[CborItem] = []
    consumed: set[int] = set()
    rewrites: dict[int, CborItem] = {}
    while candidates:
        index = len(table)
        best = None
        best_saving = 0
        for cand in candidates:
            saving = _net_saving(cand, index, consumed, opts)
            if saving > best_saving:
                best, best_saving = cand, saving
        if best is None:
            break
        table.append(best.entry)
        for pos, original in best.occurrences.items():
            if pos in consumed:
                continue
            rewrites[pos] = _reference_item(best, original, index, opts)
            consumed.add(pos)
        candidates.remove(best)
    rump = _rebuild(item, rewrites, [0])
    return PackedEnvelope(table, rump, opts)


def _rebuild(item: CborItem, rewrites: dict[int, CborItem], counter: list[int]) -> CborItem:
    pos = counter[0]
    counter[0] += 1
    replacement = rewrites.get(pos)
    if replacement is not None:
        _skip(item, counter)
        return replacement
    if isinstance(item, Array):
        return Array([_rebuild(c, rewrites, counter) for c in item.items])
    if isinstance(item, Map):
        return Map(
            [
                (_rebuild(k, rewrites, counter), _rebuild(v, rewrites, counter))
                for k, v in item.entries
            ]
        )
    if isinstance(item, Tag):
        return Tag(item.number, _rebuild(item.content, rewrites, counter))
    return item


def _skip(item: CborItem, counter: list[int]) -> None:
    if isinstance(item, Array):
        for child in item.items:
            counter[0] += 1
            _skip(child, counter)
    elif isinstance(item, Map):
        for key, value in item.entries:
            counter[0] += 1
            _skip(key, counter)
            counter[0] += 1
            _skip(value, counter)
    elif isinstance(item, Tag):
        counter[0] += 1
        _skip(item.content, counter)


def unpack(env: PackedEnvelope) -> CborItem:
    opts = env.options
    resolved: list[CborItem] = []
    for k, entry in enumerate(env.table):
        resolved.append(_resolve(entry, resolved, opts, in_table=True))
    return _resolve(env.rump, resolved, opts, in_table=False)


def _resolve(
    item: CborItem, table: list[CborItem], opts: PackOptions, in_table: bool
) -> CborItem:
    def lookup(index: int) -> CborItem:
        if index >= len(table):
            if in_table:
                raise ForwardReference(
                    "table entry references index %d at or past itself" % index
                )
            raise IndexOutOfRange(
                "reference %d but table holds %d entries" % (index, len(table))
            )
        return table[index]

    if isinstance(item, Simple) and item.value < opts.simple_ref_limit:
        return lookup(item.value)
    if isinstance(item, Tag):
        if item.number == opts.value_tag:
            content = item.content
            if not isinstance(content, Uint):
                raise TypeMismatch("value reference must carry an unsigned index")
            return lookup(content.value + opts.simple_ref_limit)
        if item.number == opts.suffix_tag:
            head, index = _ref_pair(item.content, first_text=True)
            target = lookup(index)
            if not isinstance(target, Text):
                raise TypeMismatch("suffix reference to a non-text entry")
            return Text(head + target.data)
        if item.number == opts.prefix_tag:
            tail, index = _ref_pair(item.content, first_text=False)
            target = lookup(index)
            if not isinstance(target, Bytes):
                raise TypeMismatch("prefix reference to a non-bytes entry")
            return Bytes(target.data + tail)
        return Tag(item.number, _resolve(item.content, table, opts, in_table))
    if isinstance(item, Array):
        return Array([_resolve(c, table, opts, in_table) for c in item.items])
    if isinstance(item, Map):
        return Map(
            [
                (
                    _resolve(k, table, opts, in_table),
                    _resolve(v, table, opts, in_table),
                )
                for k, v in item.entries
            ]
        )
    return item


def _ref_pair(content: CborItem, first_text: bool):
    if not isinstance(content, Array) or len(content.items) != 2:
        raise TypeMismatch("reference tag must carry a two-element array")
    a, b = content.items
    if first_text:
        if not isinstance(a, Text) or not isinstance(b, Uint):
            raise TypeMismatch("suffix reference must be [head text, index]")
        return a.data, b.value
    if not isinstance(a, Uint) or not isinstance(b, Bytes):
        raise TypeMismatch("prefix reference must be [index, tail bytes]")
    return b.data, a.value
