"""Token fingerprints and the commutative postings hash.

All hash functions here are seedless and fixed for the lifetime of the
on-disk formats: fingerprints decide token identity everywhere, and the
postings hash drives posting-list deduplication, so changing any constant
invalidates previously written sketches.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
MASK32 = (1 << 32) - 1

# FNV-1a 64-bit byte accumulation.
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

# Multiply-xorshift finalizer constants (murmur3 fmix64).
_MIX_A = 0xFF51AFD7ED558CCD
_MIX_B = 0xC4CEB9FE1A85EC53

# Full-period LCG over 2^64; multiplier from the Steele/Vigna tables.
LCG_MULTIPLIER = 0xD1342543DE82EF95
LCG_INCREMENT = 1


def mix64(x: int) -> int:
    """Finalizing bijection on 64-bit values (multiply-xorshift)."""
    x &= MASK64
    x ^= x >> 33
    x = (x * _MIX_A) & MASK64
    x ^= x >> 33
    x = (x * _MIX_B) & MASK64
    x ^= x >> 33
    return x


def fingerprint(token: bytes | str) -> int:
    """32-bit fingerprint of a token's byte sequence.

    Distinct tokens may collide; colliding tokens simply share a posting
    list. Raises ValueError for empty tokens, which carry no information
    worth indexing.
    """
    if isinstance(token, str):
        token = token.encode("utf-8")
    if not token:
        raise ValueError("cannot fingerprint an empty token")
    h = _FNV_OFFSET
    for b in token:
        h = ((h ^ b) * _FNV_PRIME) & MASK64
    return mix64(h) & MASK32


def element_hash(posting: int) -> int:
    """One LCG step seeded with the posting id."""
    return (LCG_MULTIPLIER * posting + LCG_INCREMENT) & MASK64


def postings_hash(postings) -> int:
    """XOR fold of element hashes over a set of distinct postings.

    The empty set maps to 0, the XOR identity.
    """
    h = 0
    for p in postings:
        h ^= element_hash(p)
    return h


def extend_hash(h: int, posting: int) -> int:
    """Postings hash of the underlying set extended by one new posting.

    The caller must guarantee the posting is not already represented in
    ``h``; XOR is self-inverse, so a repeated posting would silently drop
    out again.
    """
    return h ^ element_hash(posting)
