import random

import pytest

from conftest import random_item
from cborkit import cbor
from cborkit.cbor import Array, Bool, Bytes, Map, Null, Simple, Tag, Text, Uint
from cborkit.taxonomy import (
    SavingsReport,
    ZeroOriginal,
    classify,
    compute_savings,
    size_tier,
)


def test_savings_basics():
    report = compute_savings(100, 80)
    assert report == SavingsReport(100, 80, 20, 0.2)
    same = compute_savings(57, 57)
    assert same.savings_b == 0 and same.gain_g == 0
    inflated = compute_savings(10, 25)
    assert inflated.savings_b == -15 and inflated.gain_g == -1.5


def test_savings_packed_arithmetic_check():
    # arithmetic check against the reported 23,298 -> 10,214 byte shrink
    report = compute_savings(23298, 10214)
    assert report.savings_b == 13084
    assert abs(report.gain_g - 0.5616) < 1e-4


def test_zero_original_rejected():
    with pytest.raises(ZeroOriginal):
        compute_savings(0, 10)
    with pytest.raises(ZeroOriginal):
        compute_savings(-5, 10)


@pytest.mark.parametrize("size,tier", [(1, 1), (99, 1), (100, 2), (999, 2), (1000, 3), (10**6, 3)])
def test_tier_boundaries(size, tier):
    assert size_tier(size) == tier
    assert classify(Uint(0), size).tier == tier


def test_classify_small_map():
    item = Map([(Text("a"), Uint(1))])
    record = classify(item, cbor.item_size(item))
    # one text leaf, one numeric leaf, one structural node: tie -> textual
    assert record.tier == 1
    assert record.content_type == "textual"
    assert record.structure == "flat"
    assert record.redundancy == "non_redundant"


def test_classify_content_types():
    assert classify(Array([Uint(1), Uint(2), Text("x")]), 10).content_type == "numeric"
    assert classify(Array([Bytes(b"ab"), Bytes(b"cd"), Uint(1)]), 10).content_type == "binary"
    assert classify(Array([Bool(True), Null(), Bool(False)]), 10).content_type == "boolean"
    assert (
        classify(Array([Tag(34, Text("x")), Simple(3), Simple(2)]), 10).content_type
        == "taggy"
    )
    assert classify(Array([Array([]), Array([])]), 10).content_type == "structural"
    # simple values >= 16 count as numeric, below as packed references
    assert classify(Array([Simple(19), Simple(19), Simple(18)]), 10).content_type == "numeric"
    assert classify(Array([Simple(15), Simple(14), Simple(0)]), 10).content_type == "taggy"


def test_classify_redundancy():
    repeated = Array([Text("suffix.example13")] * 301)
    assert classify(repeated, 5000).redundancy == "redundant"
    # repeats below two encoded bytes do not count
    zeros = Array([Uint(0)] * 50 + [Bool(True)] * 50)
    assert classify(zeros, 110).redundancy == "non_redundant"
    # a repeated composite subtree counts
    subtree = Array([Array([Uint(1), Uint(2)]), Array([Uint(1), Uint(2)])])
    assert classify(subtree, 10).redundancy == "redundant"
    distinct = Array([Uint(n) for n in range(40, 90)])
    assert classify(distinct, 100).redundancy == "non_redundant"


def test_classify_structure():
    assert classify(Array([Uint(1)]), 2).structure == "flat"
    assert classify(Array([Array([])]), 2).structure == "nested"
    assert classify(Map([(Text("a"), Array([]))]), 5).structure == "nested"
    # tags are transparent: the packed envelope shape is nested
    envelope = Tag(113, Array([Array([]), Uint(1)]))
    assert classify(envelope, 6).structure == "nested"
    assert classify(Tag(34, Text("x")), 4).structure == "flat"


def test_classify_permutation_invariant():
    rng = random.Random(11)
    for _ in range(50):
        entries = [
            (random_item(rng, 1), random_item(rng, 2)) for _ in range(rng.randrange(2, 6))
        ]
        base = Map(list(entries))
        shuffled = list(entries)
        rng.shuffle(shuffled)
        permuted = Map(shuffled)
        assert classify(base, 100) == classify(permuted, 100)


def test_classify_total_on_random_items():
    rng = random.Random(5)
    for _ in range(200):
        item = random_item(rng, 5)
        record = classify(item, cbor.item_size(item))
        assert record.tier in (1, 2, 3)
        assert record.content_type in (
            "textual",
            "numeric",
            "binary",
            "taggy",
            "boolean",
            "structural",
        )
