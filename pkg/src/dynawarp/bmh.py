"""Boyer-Moore-Horspool substring search (bad-character rule only).

Used to post-filter decompressed batches; callers handle case folding.
"""

from __future__ import annotations


def bad_character_table(needle: bytes) -> list[int]:
    m = len(needle)
    table = [m] * 256
    for i in range(m - 1):
        table[needle[i]] = m - 1 - i
    return table


def find_all(haystack: bytes, needle: bytes, table: list[int] | None = None) -> list[int]:
    """Start offsets of every (possibly overlapping) occurrence."""
    m = len(needle)
    if m == 0:
        raise ValueError("empty needle")
    if table is None:
        table = bad_character_table(needle)
    out = []
    n = len(haystack)
    last = needle[-1]
    i = m - 1
    while i < n:
        c = haystack[i]
        if c == last and haystack[i - m + 1:i + 1] == needle:
            out.append(i - m + 1)
        i += table[c]
    return out


def contains(haystack: bytes, needle: bytes, table: list[int] | None = None) -> bool:
    m = len(needle)
    if m == 0:
        raise ValueError("empty needle")
    if table is None:
        table = bad_character_table(needle)
    n = len(haystack)
    last = needle[-1]
    i = m - 1
    while i < n:
        c = haystack[i]
        if c == last and haystack[i - m + 1:i + 1] == needle:
            return True
        i += table[c]
    return False
