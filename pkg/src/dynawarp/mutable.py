"""The mutable, instantly queryable ingest-side sketch.

Three cooperating structures: the token map (fingerprint -> tagged 32-bit
value), an arena of reference-counted posting lists, and the lookup map
keyed by postings hash that makes posting-list deduplication an O(1)
check per extension instead of a scan over all lists.
"""

from __future__ import annotations

import heapq
from typing import Callable, Iterator, Optional

from .hashing import MASK64, element_hash, extend_hash
from .postings import MutablePostingList

# Token map value tags (two most significant bits of the 32-bit value).
TAG_ABSENT = 0
TAG_DIRECT = 1
TAG_LIST = 2

PAYLOAD_BITS = 30
PAYLOAD_MASK = (1 << PAYLOAD_BITS) - 1
MAX_HANDLES = 1 << PAYLOAD_BITS


def make_direct(posting: int) -> int:
    return (TAG_DIRECT << PAYLOAD_BITS) | posting


def make_list(handle: int) -> int:
    return (TAG_LIST << PAYLOAD_BITS) | handle


def value_tag(raw: int) -> int:
    return raw >> PAYLOAD_BITS


def value_payload(raw: int) -> int:
    return raw & PAYLOAD_MASK


class LookupMap:
    """Open-addressed map from postings hash to posting-list handle.

    Probing increments the 64-bit key itself (wrapping); the slot is the
    key modulo the table size. Removal back-shifts displaced entries so a
    probe never crosses an empty slot on its way to a resident entry.
    """

    _EMPTY = -1

    def __init__(self, arena: list, initial_size: int = 16) -> None:
        self._arena = arena
        self._slots = [self._EMPTY] * initial_size
        self._count = 0

    def __len__(self) -> int:
        return self._count

    @property
    def table_size(self) -> int:
        return len(self._slots)

    def _home_slot(self, handle: int) -> int:
        return self._arena[handle].postings_hash % len(self._slots)

    def find_equal(self, target_hash: int,
                   equals: Callable[[MutablePostingList], bool]) -> Optional[int]:
        """Probe for a resident list whose posting set satisfies ``equals``."""
        size = len(self._slots)
        h = target_hash
        for _ in range(size):
            resident = self._slots[h % size]
            if resident == self._EMPTY:
                return None
            candidate = self._arena[resident]
            if candidate.postings_hash == target_hash and equals(candidate):
                return resident
            h = (h + 1) & MASK64
        return None

    def insert(self, handle: int) -> int:
        """Insert a list, deduplicating against resident equals.

        Returns the handle of an already-resident equal list after bumping
        its token count, or ``handle`` itself once stored at the first
        unoccupied key at or above its postings hash.
        """
        if (self._count + 1) * 4 > len(self._slots) * 3:
            self._grow()
        target = self._arena[handle]
        size = len(self._slots)
        h = target.postings_hash
        while True:
            slot = h % size
            resident = self._slots[slot]
            if resident == self._EMPTY:
                self._slots[slot] = handle
                self._count += 1
                return handle
            candidate = self._arena[resident]
            if candidate.postings_hash == target.postings_hash and \
                    candidate.same_set(target):
                candidate.token_count += 1
                return resident
            h = (h + 1) & MASK64

    def remove(self, handle: int) -> None:
        """Remove a no-longer-referenced list and restore the probe invariant."""
        size = len(self._slots)
        h = self._arena[handle].postings_hash
        for _ in range(size):
            slot = h % size
            resident = self._slots[slot]
            if resident == handle:
                break
            if resident == self._EMPTY:
                raise AssertionError("lookup map integrity: list not reachable")
            h = (h + 1) & MASK64
        else:
            raise AssertionError("lookup map integrity: probe wrapped")
        self._slots[slot] = self._EMPTY
        self._count -= 1
        freed = slot
        j = (slot + 1) % size
        while self._slots[j] != self._EMPTY:
            resident = self._slots[j]
            home = self._home_slot(resident)
            # Back-shift iff the resident's home position lies at or before
            # the freed slot in modular probe order.
            if (j - home) % size >= (j - freed) % size:
                self._slots[freed] = resident
                self._slots[j] = self._EMPTY
                freed = j
            j = (j + 1) % size

    def _grow(self) -> None:
        handles = [h for h in self._slots if h != self._EMPTY]
        self._slots = [self._EMPTY] * (len(self._slots) * 2)
        size = len(self._slots)
        for handle in handles:
            h = self._arena[handle].postings_hash
            while self._slots[h % size] != self._EMPTY:
                h = (h + 1) & MASK64
            self._slots[h % size] = handle

    def handles(self) -> Iterator[int]:
        for resident in self._slots:
            if resident != self._EMPTY:
                yield resident

    def check_probe_invariant(self) -> None:
        size = len(self._slots)
        for slot, resident in enumerate(self._slots):
            if resident == self._EMPTY:
                continue
            probe = self._home_slot(resident)
            while probe != slot:
                if self._slots[probe] == self._EMPTY:
                    raise AssertionError(
                        f"handle {resident} unreachable from its home slot")
                probe = (probe + 1) % size


class MutableSketch:
    """Hash-based multi-set membership sketch for one mutable segment."""

    def __init__(self, capacity: int, promotion_threshold: int | None = None) -> None:
        if not 0 < capacity <= (1 << 16):
            raise ValueError("capacity must be in (0, 2^16]")
        self.capacity = capacity
        self.promotion_threshold = promotion_threshold
        self._tokens: dict[int, int] = {}
        self._arena: list[MutablePostingList | None] = []
        self._free: list[int] = []
        self._lookup = LookupMap(self._arena)
        self._live_lists = 0

    # -- arena bookkeeping ------------------------------------------------

    def _alloc(self, plist: MutablePostingList) -> int:
        if self._free:
            handle = heapq.heappop(self._free)
            self._arena[handle] = plist
        else:
            handle = len(self._arena)
            if handle >= MAX_HANDLES:
                raise OverflowError("posting-list handle space exhausted")
            self._arena.append(plist)
        self._live_lists += 1
        return handle

    def _dealloc(self, handle: int) -> None:
        self._arena[handle] = None
        heapq.heappush(self._free, handle)
        self._live_lists -= 1

    def _fresh_list(self, postings) -> MutablePostingList:
        plist = MutablePostingList(self.capacity, self.promotion_threshold)
        for p in postings:
            plist.insert(p)
        plist.token_count = 1
        return plist

    # -- core operations ---------------------------------------------------

    def add(self, fingerprint: int, posting: int) -> None:
        """Record that the fingerprint's token occurs in the given posting."""
        if not 0 <= posting < self.capacity:
            raise ValueError(f"posting {posting} out of capacity {self.capacity}")
        raw = self._tokens.get(fingerprint, 0)
        tag = raw >> PAYLOAD_BITS
        if tag == TAG_ABSENT:
            self._tokens[fingerprint] = make_direct(posting)
            return
        payload = raw & PAYLOAD_MASK
        if tag == TAG_DIRECT:
            if payload == posting:
                return
            handle = self._alloc(self._fresh_list((payload, posting)))
            resident = self._lookup.insert(handle)
            if resident != handle:
                self._dealloc(handle)
            self._tokens[fingerprint] = make_list(resident)
            return
        # tag == TAG_LIST
        base = self._arena[payload]
        if base.contains(posting):
            return
        target_hash = extend_hash(base.postings_hash, posting)
        found = self._lookup.find_equal(
            target_hash, lambda cand: cand.equals_extended(base, posting))
        if found is not None:
            self._arena[found].token_count += 1
            self._tokens[fingerprint] = make_list(found)
            base.token_count -= 1
            if base.token_count == 0:
                self._lookup.remove(payload)
                self._dealloc(payload)
        elif base.token_count == 1:
            # Sole referent: extend in place, re-keying the lookup entry.
            self._lookup.remove(payload)
            base.insert(posting)
            resident = self._lookup.insert(payload)
            assert resident == payload, "dedup invariant violated on re-key"
        else:
            # Shared list: copy-on-write.
            base.token_count -= 1
            copy = base.clone()
            copy.insert(posting)
            handle = self._alloc(copy)
            resident = self._lookup.insert(handle)
            assert resident == handle, "dedup invariant violated on copy"
            self._tokens[fingerprint] = make_list(handle)

    def get_postings(self, fingerprint: int) -> list[int] | None:
        raw = self._tokens.get(fingerprint)
        if raw is None:
            return None
        tag = raw >> PAYLOAD_BITS
        if tag == TAG_DIRECT:
            return [raw & PAYLOAD_MASK]
        return self._arena[raw & PAYLOAD_MASK].postings()

    # -- introspection -----------------------------------------------------

    @property
    def token_count(self) -> int:
        return len(self._tokens)

    @property
    def list_count(self) -> int:
        return self._live_lists

    def fingerprints(self) -> Iterator[int]:
        return iter(self._tokens)

    def entries(self) -> Iterator[tuple[int, int]]:
        """(fingerprint, raw token map value) pairs."""
        return iter(self._tokens.items())

    def list_at(self, handle: int) -> MutablePostingList:
        plist = self._arena[handle]
        assert plist is not None
        return plist

    def stats(self) -> dict:
        direct = sum(1 for raw in self._tokens.values()
                     if raw >> PAYLOAD_BITS == TAG_DIRECT)
        with_lists = len(self._tokens) - direct
        ratio = 1.0 - self._live_lists / with_lists if with_lists else 0.0
        return {
            "token_count": len(self._tokens),
            "list_count": self._live_lists,
            "direct_count": direct,
            "dedup_ratio": ratio,
        }

    def estimate_memory(self) -> int:
        """Deterministic byte accounting of the sketch's footprint."""
        total = 512
        total += 104 * len(self._tokens)          # token map dict entries
        total += 8 * self._lookup.table_size      # lookup slots
        total += 8 * len(self._arena)             # arena pointers
        for plist in self._arena:
            if plist is not None:
                total += 96 + plist.byte_estimate()
        return total

    def check_invariants(self) -> None:
        """Exhaustive dedup/refcount/probe checks for slow-test mode."""
        refcounts: dict[int, int] = {}
        seen_sets: dict[tuple, int] = {}
        for raw in self._tokens.values():
            if raw >> PAYLOAD_BITS == TAG_LIST:
                refcounts[raw & PAYLOAD_MASK] = \
                    refcounts.get(raw & PAYLOAD_MASK, 0) + 1
        live = {h for h, pl in enumerate(self._arena) if pl is not None}
        if set(refcounts) != live:
            raise AssertionError("live lists and referenced handles differ")
        for handle in live:
            plist = self._arena[handle]
            if plist.token_count != refcounts[handle]:
                raise AssertionError(f"token_count drift on handle {handle}")
            key = tuple(plist.postings())
            if len(key) < 2:
                raise AssertionError("materialized list with < 2 postings")
            if key in seen_sets:
                raise AssertionError(f"duplicate posting set {key}")
            seen_sets[key] = handle
            expected = 0
            for p in key:
                expected ^= element_hash(p)
            if expected != plist.postings_hash:
                raise AssertionError("postings hash drift")
        if set(self._lookup.handles()) != live:
            raise AssertionError("lookup map contents differ from live lists")
        self._lookup.check_probe_invariant()
