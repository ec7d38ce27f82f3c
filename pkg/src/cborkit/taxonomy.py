"""Byte savings/gain metrics and the object taxonomy.

``compute_savings`` gives the absolute saving b = original - encoded and
the relative gain g = b / original.  ``classify`` buckets an item by
size tier, dominant content type (including byte strings and tags as
their own classes), value redundancy and nesting.

The prevalence and redundancy rules are explicit stand-ins: map keys
count as leaves, and duplicates only count as redundancy when their
encoding is at least 2 bytes.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from . import cbor
from .cbor import (
    Array,
    Bool,
    Bytes,
    CborItem,
    Float,
    Map,
    Nint,
    Null,
    Simple,
    Tag,
    Text,
    Uint,
    Undefined,
)


class TaxonomyError(Exception):
    pass


class ZeroOriginal(TaxonomyError):
    pass


@dataclass(frozen=True)
class SavingsReport:
    original_size: int
    encoded_size: int
    savings_b: int
    gain_g: float


def compute_savings(original_size: int, encoded_size: int) -> SavingsReport:
    if original_size <= 0:
        raise ZeroOriginal("original size must be positive, got %d" % original_size)
    b = original_size - encoded_size
    return SavingsReport(original_size, encoded_size, b, b / original_size)


TIER_1_LIMIT = 100
TIER_2_LIMIT = 1000

CONTENT_TYPES = ("textual", "numeric", "binary", "taggy", "boolean", "structural")

# Simple values below this bound act as table references in packed items.
PACKED_REFERENCE_LIMIT = 16


@dataclass(frozen=True)
class TaxonomyRecord:
    tier: int
    content_type: str
    redundancy: str
    structure: str


def size_tier(size: int) -> int:
    if size < TIER_1_LIMIT:
        return 1
    if size < TIER_2_LIMIT:
        return 2
    return 3


def classify(item: CborItem, encoded_size: int) -> TaxonomyRecord:
    counts: Counter[str] = Counter()
    _count_content(item, counts)
    winner = max(CONTENT_TYPES, key=lambda t: (counts[t], -CONTENT_TYPES.index(t)))
    return TaxonomyRecord(
        tier=size_tier(encoded_size),
        content_type=winner,
        redundancy="redundant" if _is_redundant(item) else "non_redundant",
        structure="nested" if _is_nested(item, False) else "flat",
    )


def _count_content(item: CborItem, counts: Counter) -> None:
    if isinstance(item, Text):
        counts["textual"] += 1
    elif isinstance(item, (Uint, Nint, Float)):
        counts["numeric"] += 1
    elif isinstance(item, Simple):
        if item.value < PACKED_REFERENCE_LIMIT:
            counts["taggy"] += 1
        else:
            counts["numeric"] += 1
    elif isinstance(item, (Bool, Null, Undefined)):
        counts["boolean"] += 1
    elif isinstance(item, Bytes):
        counts["binary"] += 1
    elif isinstance(item, Tag):
        counts["taggy"] += 1
        _count_content(item.content, counts)
    elif isinstance(item, Array):
        counts["structural"] += 1
        for child in item.items:
            _count_content(child, counts)
    elif isinstance(item, Map):
        counts["structural"] += 1
        for key, value in item.entries:
            _count_content(key, counts)
            _count_content(value, counts)


def _is_redundant(item: CborItem) -> bool:
    # Encoded bytes double as the structural-equality key; the >= 2 byte
    # bound keeps trivial repeats (0, true, ...) from counting.
    seen: Counter[bytes] = Counter()
    _collect_encodings(item, seen)
    return any(n >= 2 and len(key) >= 2 for key, n in seen.items())


def _collect_encodings(item: CborItem, seen: Counter) -> None:
    seen[cbor.encode(item)] += 1
    if isinstance(item, Array):
        for child in item.items:
            _collect_encodings(child, seen)
    elif isinstance(item, Map):
        for key, value in item.entries:
            _collect_encodings(key, seen)
            _collect_encodings(value, seen)
    elif isinstance(item, Tag):
        _collect_encodings(item.content, seen)


def _is_nested(item: CborItem, inside: bool) -> bool:
    if isinstance(item, (Array, Map)):
        if inside:
            return True
        children = (
            item.items
            if isinstance(item, Array)
            else [x for pair in item.entries for x in pair]
        )
        return any(_is_nested(child, True) for child in children)
    if isinstance(item, Tag):
        # Tags are transparent for nesting purposes.
        return _is_nested(item.content, inside)
    return False
