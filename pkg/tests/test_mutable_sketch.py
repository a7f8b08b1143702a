import itertools
import random

import pytest

from conftest import (EXAMPLE_LINES, build_example_sketch,
                      example_word_postings)
from dynawarp.hashing import fingerprint, postings_hash
from dynawarp.mutable import (LookupMap, MutableSketch, TAG_DIRECT, TAG_LIST,
                              make_direct, make_list, value_payload, value_tag)
from dynawarp.postings import MutablePostingList

# -- token map value packing ---------------------------------------------------


def test_token_value_packing_roundtrip():
    for tag, make in ((TAG_DIRECT, make_direct), (TAG_LIST, make_list)):
        for payload in (0, 1, (1 << 30) - 1):
            raw = make(payload)
            assert value_tag(raw) == tag
            assert value_payload(raw) == payload
            assert raw < 1 << 32


# -- worked example -----------------------------------------------------------


def test_example_corpus_shares_one_list_and_keeps_one_direct():
    sketch = build_example_sketch()
    words = example_word_postings()
    # "connection" and "host" share {0, 2}; "info" holds {0, 1, 3}.
    assert sketch.get_postings(fingerprint("connection")) == [0, 2]
    assert sketch.get_postings(fingerprint("host")) == [0, 2]
    assert sketch.get_postings(fingerprint("info")) == [0, 1, 3]
    assert sketch.list_count == 2
    raw = sketch._tokens[fingerprint("connection")]
    assert raw == sketch._tokens[fingerprint("host")]
    assert value_tag(raw) == TAG_LIST
    # Single-posting words stay directly encoded.
    for word in ("start", "established", "terminated", "restart"):
        assert value_tag(sketch._tokens[fingerprint(word)]) == TAG_DIRECT
    assert sketch.get_postings(fingerprint("start")) == [1]
    for word, postings in words.items():
        assert sketch.get_postings(fingerprint(word)) == sorted(postings)
    sketch.check_invariants()


def test_example_corpus_insertion_order_does_not_matter():
    pairs = [(fingerprint(word), posting)
             for word, postings in example_word_postings().items()
             for posting in postings]
    reference = build_example_sketch()
    rng = random.Random(21)
    for _ in range(10):
        rng.shuffle(pairs)
        sketch = MutableSketch(4)
        for fp, posting in pairs:
            sketch.add(fp, posting)
        assert sketch.list_count == reference.list_count
        for fp, _ in pairs:
            assert sketch.get_postings(fp) == reference.get_postings(fp)
        sketch.check_invariants()


def test_add_is_idempotent():
    sketch = build_example_sketch()
    before = {fp: sketch.get_postings(fp) for fp in sketch.fingerprints()}
    lists_before = sketch.list_count
    for word, postings in example_word_postings().items():
        for posting in postings:
            sketch.add(fingerprint(word), posting)
    assert sketch.list_count == lists_before
    for fp, postings in before.items():
        assert sketch.get_postings(fp) == postings
    sketch.check_invariants()


def test_unknown_fingerprint_returns_none():
    sketch = build_example_sketch()
    assert sketch.get_postings(fingerprint("absent")) is None


def test_add_rejects_out_of_capacity_posting():
    sketch = MutableSketch(4)
    with pytest.raises(ValueError):
        sketch.add(fingerprint("x"), 4)


# -- deduplication behavior ----------------------------------------------------


def test_tokens_converging_on_same_set_share_one_list():
    sketch = MutableSketch(16)
    fps = [fingerprint(f"t{i}") for i in range(20)]
    for fp in fps:
        for posting in (2, 5, 11):
            sketch.add(fp, posting)
    assert sketch.list_count == 1
    sketch.check_invariants()


def test_diverging_token_copies_shared_list():
    sketch = MutableSketch(16)
    a, b = fingerprint("a"), fingerprint("b")
    for fp in (a, b):
        sketch.add(fp, 1)
        sketch.add(fp, 2)
    assert sketch.list_count == 1
    sketch.add(a, 3)  # copy-on-write; b keeps {1, 2}
    assert sketch.get_postings(a) == [1, 2, 3]
    assert sketch.get_postings(b) == [1, 2]
    assert sketch.list_count == 2
    sketch.check_invariants()


def test_sole_referent_extends_in_place():
    sketch = MutableSketch(16)
    a = fingerprint("a")
    sketch.add(a, 1)
    sketch.add(a, 2)
    handle = value_payload(sketch._tokens[a])
    sketch.add(a, 3)
    assert value_payload(sketch._tokens[a]) == handle
    assert sketch.list_count == 1
    sketch.check_invariants()


def test_abandoned_list_is_freed_and_handle_reused():
    sketch = MutableSketch(16)
    a, b = fingerprint("a"), fingerprint("b")
    sketch.add(a, 1)
    sketch.add(a, 2)          # a -> {1,2}
    sketch.add(b, 1)
    sketch.add(b, 2)
    sketch.add(b, 3)          # b copies to {1,2,3}
    sketch.add(a, 3)          # a joins b's list; {1,2} becomes garbage
    assert sketch.list_count == 1
    assert sketch.get_postings(a) == sketch.get_postings(b) == [1, 2, 3]
    c = fingerprint("c")
    sketch.add(c, 4)
    sketch.add(c, 5)
    assert sketch.list_count == 2
    assert len(sketch._arena) == 2  # freed arena slot was reused
    sketch.check_invariants()


def test_stats_report_dedup():
    sketch = build_example_sketch()
    stats = sketch.stats()
    assert stats["token_count"] == len(example_word_postings())
    assert stats["list_count"] == 2
    singles = sum(1 for postings in example_word_postings().values()
                  if len(postings) == 1)
    assert stats["direct_count"] == singles
    assert 0 <= stats["dedup_ratio"] < 1


def test_estimate_memory_grows_with_content():
    sketch = MutableSketch(1024)
    baseline = sketch.estimate_memory()
    for i in range(200):
        sketch.add(fingerprint(f"w{i}"), i % 1024)
        sketch.add(fingerprint(f"w{i}"), (i * 7 + 1) % 1024)
    assert sketch.estimate_memory() > baseline + 200 * 100


# -- model-based fuzz -----------------------------------------------------------


def test_sketch_matches_reference_mapping_under_fuzz():
    rng = random.Random(22)
    capacity = 64
    sketch = MutableSketch(capacity, promotion_threshold=3)
    model: dict[int, set[int]] = {}
    fps = [rng.getrandbits(32) for _ in range(400)]
    for step in range(100_000):
        fp = fps[rng.randrange(len(fps))]
        posting = rng.randrange(capacity)
        sketch.add(fp, posting)
        model.setdefault(fp, set()).add(posting)
        if step % 20_000 == 19_999:
            sketch.check_invariants()
    for fp, postings in model.items():
        assert sketch.get_postings(fp) == sorted(postings)
    # Dedup exactness: live list count == distinct non-singleton sets.
    distinct = {frozenset(v) for v in model.values() if len(v) > 1}
    assert sketch.list_count == len(distinct)
    sketch.check_invariants()


def test_lookup_map_insert_remove_fuzz_against_reference():
    rng = random.Random(23)
    arena: list[MutablePostingList | None] = []
    lookup = LookupMap(arena, initial_size=8)
    resident: dict[frozenset, int] = {}

    def new_list(postings) -> int:
        plist = MutablePostingList(256, threshold=4)
        for p in postings:
            plist.insert(p)
        plist.token_count = 1
        arena.append(plist)
        return len(arena) - 1

    ops = 0
    while ops < 100_000:
        ops += 1
        if resident and rng.random() < 0.45:
            key = rng.choice(list(resident))
            handle = resident.pop(key)
            lookup.remove(handle)
            arena[handle] = None
        else:
            postings = frozenset(rng.sample(range(256), rng.randint(2, 6)))
            handle = new_list(sorted(postings))
            got = lookup.insert(handle)
            if postings in resident:
                assert got == resident[postings]
                arena[handle] = None  # duplicate was deduplicated
            else:
                assert got == handle
                resident[postings] = handle
        if ops % 10_000 == 0:
            lookup.check_probe_invariant()
            assert len(lookup) == len(resident)
            assert set(lookup.handles()) == set(resident.values())
    # Every resident set is findable by its postings hash.
    for postings, handle in resident.items():
        found = lookup.find_equal(
            postings_hash(postings),
            lambda cand: set(cand.postings()) == set(postings))
        assert found == handle


def test_lookup_map_distinguishes_colliding_hashes():
    arena: list[MutablePostingList | None] = []
    lookup = LookupMap(arena, initial_size=8)
    first = MutablePostingList(64)
    second = MutablePostingList(64)
    for p in (1, 2):
        first.insert(p)
    for p in (3, 4):
        second.insert(p)
    second.postings_hash = first.postings_hash  # force a full hash collision
    first.token_count = second.token_count = 1
    arena.extend([first, second])
    assert lookup.insert(0) == 0
    assert lookup.insert(1) == 1  # same hash, different set: both resident
    assert lookup.find_equal(first.postings_hash,
                             lambda c: c.postings() == [1, 2]) == 0
    assert lookup.find_equal(first.postings_hash,
                             lambda c: c.postings() == [3, 4]) == 1
    lookup.remove(0)
    assert lookup.find_equal(first.postings_hash,
                             lambda c: c.postings() == [3, 4]) == 1
    lookup.check_probe_invariant()


def test_lookup_map_back_shift_keeps_probe_chains_intact():
    # Dense cluster of colliding entries, removed in varying orders.
    for removal_order in itertools.permutations(range(4)):
        arena: list[MutablePostingList | None] = []
        lookup = LookupMap(arena, initial_size=8)
        for i in range(4):
            plist = MutablePostingList(64)
            plist.insert(i)
            plist.insert(i + 8)
            plist.postings_hash = 16 + (i % 2)  # two home slots, long chains
            plist.token_count = 1
            arena.append(plist)
            assert lookup.insert(i) == i
        survivors = set(range(4))
        for victim in removal_order:
            lookup.remove(victim)
            survivors.discard(victim)
            lookup.check_probe_invariant()
            for h in survivors:
                assert lookup.find_equal(
                    arena[h].postings_hash,
                    lambda c, h=h: c.postings() == arena[h].postings()) == h
