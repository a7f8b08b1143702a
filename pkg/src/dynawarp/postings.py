"""Posting lists: mutable in-memory form and Binary Interpolative Coding.

A posting identifies one set (one compressed batch); capacities are capped
at 2^16 postings. Mutable lists switch from a sorted short array to a dense
bitset at a configurable threshold so inserts stay effectively constant.
"""

from __future__ import annotations

from bisect import bisect_left

from .bitio import BitCursor, BitWriter
from .hashing import extend_hash

MAX_CAPACITY = 1 << 16


def default_promotion_threshold(capacity: int) -> int:
    # Byte-size crossover: a 16-bit sorted list outgrows a capacity-bit bitset.
    return max(1, capacity // 16)


class MutablePostingList:
    """Deduplicated, reference-counted set of postings.

    Maintains an incrementally updated commutative postings hash and a
    token reference count used for deallocation by the owning sketch.
    """

    __slots__ = ("capacity", "threshold", "token_count", "postings_hash",
                 "_short", "_bits", "_card")

    def __init__(self, capacity: int, threshold: int | None = None) -> None:
        if not 0 < capacity <= MAX_CAPACITY:
            raise ValueError(f"capacity must be in (0, {MAX_CAPACITY}]")
        self.capacity = capacity
        self.threshold = threshold if threshold is not None else \
            default_promotion_threshold(capacity)
        self.token_count = 0
        self.postings_hash = 0
        self._short: list[int] | None = []
        self._bits = 0
        self._card = 0

    @property
    def cardinality(self) -> int:
        return self._card

    @property
    def is_short(self) -> bool:
        return self._short is not None

    def _check(self, posting: int) -> None:
        if not 0 <= posting < self.capacity:
            raise ValueError(f"posting {posting} out of capacity {self.capacity}")

    def contains(self, posting: int) -> bool:
        self._check(posting)
        if self._short is not None:
            i = bisect_left(self._short, posting)
            return i < len(self._short) and self._short[i] == posting
        return (self._bits >> posting) & 1 == 1

    def insert(self, posting: int) -> bool:
        """Add a posting; returns True iff it was newly added."""
        self._check(posting)
        if self._short is not None:
            i = bisect_left(self._short, posting)
            if i < len(self._short) and self._short[i] == posting:
                return False
            self._short.insert(i, posting)
            self._card += 1
            if self._card > self.threshold:
                bits = 0
                for p in self._short:
                    bits |= 1 << p
                self._bits = bits
                self._short = None
        else:
            bit = 1 << posting
            if self._bits & bit:
                return False
            self._bits |= bit
            self._card += 1
        self.postings_hash = extend_hash(self.postings_hash, posting)
        return True

    def postings(self) -> list[int]:
        """Sorted materialization of the set."""
        if self._short is not None:
            return list(self._short)
        out = []
        bits = self._bits
        while bits:
            low = bits & -bits
            out.append(low.bit_length() - 1)
            bits ^= low
        return out

    def clone(self) -> "MutablePostingList":
        """Copy of the set with a reset token reference count."""
        other = MutablePostingList(self.capacity, self.threshold)
        other._short = list(self._short) if self._short is not None else None
        other._bits = self._bits
        other._card = self._card
        other.postings_hash = self.postings_hash
        other.token_count = 1
        return other

    def same_set(self, other: "MutablePostingList") -> bool:
        if self._card != other._card:
            return False
        if self._short is not None and other._short is not None:
            return self._short == other._short
        if self._short is None and other._short is None:
            return self._bits == other._bits
        return self.postings() == other.postings()

    def equals_extended(self, base: "MutablePostingList", posting: int) -> bool:
        """True iff this set equals ``base`` plus the one extra posting."""
        if self._card != base._card + 1:
            return False
        if self._short is None and base._short is None:
            bit = 1 << posting
            return base._bits & bit == 0 and self._bits == base._bits | bit
        if self._short is not None and base._short is not None:
            i = bisect_left(base._short, posting)
            if i < len(base._short) and base._short[i] == posting:
                return False
            return (self._short[i] == posting
                    and self._short[:i] == base._short[:i]
                    and self._short[i + 1:] == base._short[i:])
        if not self.contains(posting) or base.contains(posting):
            return False
        return all(self.contains(p) for p in base.postings())

    def byte_estimate(self) -> int:
        if self._short is not None:
            return 16 + 2 * len(self._short)
        return 16 + self.capacity // 8


def _write_minimal_binary(writer: BitWriter, value: int, range_size: int) -> None:
    # Plain (non-centered) minimal binary code for value in [0, range_size).
    if range_size <= 1:
        return
    width = (range_size - 1).bit_length()
    short_codes = (1 << width) - range_size
    if value < short_codes:
        writer.write(value, width - 1)
    else:
        writer.write(value + short_codes, width)


def _read_minimal_binary(cursor: BitCursor, range_size: int) -> int:
    if range_size <= 1:
        return 0
    width = (range_size - 1).bit_length()
    short_codes = (1 << width) - range_size
    value = cursor.take(width - 1)
    if value < short_codes:
        return value
    return ((value << 1) | cursor.take(1)) - short_codes


def bic_encode(postings, lo: int, hi: int, writer: BitWriter | None = None) -> BitWriter:
    """Binary Interpolative Coding of a strictly sorted list within [lo, hi].

    Recursive midpoint encoding: the middle element is coded with a minimal
    binary code for its feasible range, then the left and right halves are
    coded recursively. Emits zero bits whenever the feasible range size
    equals the element count.
    """
    n = len(postings)
    if writer is None:
        writer = BitWriter()
    if n == 0:
        return writer
    if postings[0] < lo or postings[-1] > hi:
        raise ValueError("postings outside [lo, hi]")
    if any(postings[i] >= postings[i + 1] for i in range(n - 1)):
        raise ValueError("postings must be strictly sorted")

    def rec(i: int, j: int, lo: int, hi: int) -> None:
        n = j - i
        if n == 0 or hi - lo + 1 == n:
            return
        m = i + (n - 1) // 2
        vlo = lo + (m - i)
        vhi = hi - (j - 1 - m)
        v = postings[m]
        _write_minimal_binary(writer, v - vlo, vhi - vlo + 1)
        rec(i, m, lo, v - 1)
        rec(m + 1, j, v + 1, hi)

    rec(0, n, lo, hi)
    return writer


def bic_decode(buf, bit_offset: int, count: int, lo: int, hi: int) -> tuple[list[int], int]:
    """Inverse of :func:`bic_encode`; returns (postings, bits consumed)."""
    if count > hi - lo + 1:
        raise ValueError("count exceeds the value range")
    cursor = BitCursor(buf, bit_offset)
    out: list[int] = []

    def rec(n: int, lo: int, hi: int) -> None:
        if n == 0:
            return
        if hi - lo + 1 == n:
            out.extend(range(lo, hi + 1))
            return
        mrel = (n - 1) // 2
        vlo = lo + mrel
        vhi = hi - (n - 1 - mrel)
        v = vlo + _read_minimal_binary(cursor, vhi - vlo + 1)
        rec(mrel, lo, v - 1)
        out.append(v)
        rec(n - 1 - mrel, v + 1, hi)

    rec(count, lo, hi)
    return out, cursor.position - bit_offset
