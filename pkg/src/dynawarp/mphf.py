"""Minimal perfect hashing over static fingerprint sets.

Cascaded bit vectors: each level hashes the still-unplaced keys into a
vector of ~gamma * remaining bits and keeps the positions hit by exactly
one key; colliding keys fall through to the next level. Keys left after
the level budget go into an explicit sorted fallback table. A key's final
index is the rank of its bit across the concatenated level vectors, with
fallback keys taking the trailing indices.
"""

from __future__ import annotations

import struct
from bisect import bisect_left
from typing import Iterable, Optional

import numpy as np

from .bitio import popcount_range
from .hashing import MASK64, mix64

DEFAULT_GAMMA = 2.0
MAX_LEVELS = 32
_SEED_STEP = 0x9E3779B97F4A7C15
_RANK_SAMPLE_BITS = 512


def _level_seed(level: int) -> int:
    return (_SEED_STEP * (level + 1)) & MASK64


def _mix64_np(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    x ^= x >> np.uint64(33)
    x *= np.uint64(0xFF51AFD7ED558CCD)
    x ^= x >> np.uint64(33)
    x *= np.uint64(0xC4CEB9FE1A85EC53)
    x ^= x >> np.uint64(33)
    return x


class _Level:
    __slots__ = ("seed", "nbits", "bits", "packed", "samples", "ones", "_prefix")

    def __init__(self, seed: int, nbits: int, bits: np.ndarray,
                 samples: np.ndarray) -> None:
        self.seed = seed
        self.nbits = nbits
        self.bits = bits                      # bool array, len nbits
        self.packed = np.packbits(bits).tobytes()
        self.samples = samples                # absolute popcount before each 512-bit block
        self.ones = int(bits.sum())
        self._prefix: np.ndarray | None = None

    def prefix(self) -> np.ndarray:
        if self._prefix is None:
            self._prefix = np.cumsum(self.bits, dtype=np.int64)
        return self._prefix


class Mphf:
    """A built, in-memory minimal perfect hash function."""

    def __init__(self, n: int, gamma: float, levels: list[_Level],
                 fallback: list[tuple[int, int]]) -> None:
        self.n = n
        self.gamma = gamma
        self.levels = levels
        self.fallback = fallback              # sorted (key, index) pairs
        self._fallback_keys = [k for k, _ in fallback]

    @classmethod
    def build(cls, keys: Iterable[int], gamma: float = DEFAULT_GAMMA) -> "Mphf":
        if gamma < 1:
            raise ValueError("gamma must be >= 1")
        arr = np.fromiter(keys, dtype=np.uint64)
        arr.sort()
        if arr.size and np.any(arr[1:] == arr[:-1]):
            raise ValueError("duplicate keys")
        remaining = arr
        levels: list[_Level] = []
        for level in range(MAX_LEVELS):
            if remaining.size == 0:
                break
            nbits = -(-int(np.ceil(gamma * remaining.size)) // 64) * 64
            seed = _level_seed(level)
            pos = _mix64_np(remaining ^ np.uint64(seed)) % np.uint64(nbits)
            pos = pos.astype(np.int64)
            counts = np.bincount(pos, minlength=nbits)
            placed = counts[pos] == 1
            bits = np.zeros(nbits, dtype=bool)
            bits[pos[placed]] = True
            cum = np.concatenate(([0], np.cumsum(bits, dtype=np.int64)))
            samples = cum[np.arange(0, nbits, _RANK_SAMPLE_BITS)].astype(np.uint64)
            levels.append(_Level(seed, nbits, bits, samples))
            remaining = remaining[~placed]
        placed_total = int(arr.size - remaining.size)
        fallback = [(int(k), placed_total + i) for i, k in enumerate(remaining)]
        return cls(int(arr.size), gamma, levels, fallback)

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, key: int) -> Optional[int]:
        base = 0
        for lvl in self.levels:
            pos = mix64(key ^ lvl.seed) % lvl.nbits
            if lvl.bits[pos]:
                return base + int(lvl.prefix()[pos]) - 1
            base += lvl.ones
        if self._fallback_keys:
            i = bisect_left(self._fallback_keys, key)
            if i < len(self._fallback_keys) and self._fallback_keys[i] == key:
                return self.fallback[i][1]
        return None

    def evaluate_many(self, keys: np.ndarray) -> np.ndarray:
        """Vectorized evaluate; alien keys that resolve nowhere yield -1."""
        keys = np.asarray(keys, dtype=np.uint64)
        out = np.full(keys.size, -1, dtype=np.int64)
        undecided = np.arange(keys.size)
        base = 0
        for lvl in self.levels:
            if undecided.size == 0:
                break
            pos = (_mix64_np(keys[undecided] ^ np.uint64(lvl.seed))
                   % np.uint64(lvl.nbits)).astype(np.int64)
            hit = lvl.bits[pos]
            out[undecided[hit]] = base + lvl.prefix()[pos[hit]] - 1
            undecided = undecided[~hit]
            base += lvl.ones
        for i in undecided:
            k = int(keys[i])
            j = bisect_left(self._fallback_keys, k)
            if j < len(self._fallback_keys) and self._fallback_keys[j] == k:
                out[i] = self.fallback[j][1]
        return out

    # -- serialization --------------------------------------------------------

    def serialize(self) -> bytes:
        out = bytearray()
        out += struct.pack("<QQQ", self.n, len(self.levels), len(self.fallback))
        for lvl in self.levels:
            out += struct.pack("<QQ", lvl.seed, lvl.nbits)
            out += lvl.samples.astype("<u8").tobytes()
            out += lvl.packed
        for key, index in self.fallback:
            out += struct.pack("<IQ", key, index)
        return bytes(out)

    def bit_size(self) -> int:
        return 8 * len(self.serialize())


class MphfView:
    """Lazily evaluated MPHF over a serialized buffer.

    Construction touches no bytes; the level directory is decoded on the
    first evaluation and per-level popcounts are cached as they are needed.
    """

    def __init__(self, buf, offset: int = 0) -> None:
        self._buf = buf
        self._offset = offset
        self._parsed = False

    def _parse(self) -> None:
        buf, off = self._buf, self._offset
        self.n, n_levels, n_fallback = struct.unpack("<QQQ", bytes(buf[off:off + 24]))
        off += 24
        self._levels = []
        for _ in range(n_levels):
            seed, nbits = struct.unpack("<QQ", bytes(buf[off:off + 16]))
            off += 16
            n_samples = -(-nbits // _RANK_SAMPLE_BITS)
            samples_off = off
            off += 8 * n_samples
            bits_off = off
            off += nbits // 8
            self._levels.append([seed, nbits, samples_off, bits_off, None])
        self._fallback_off = off
        self._n_fallback = n_fallback
        self._parsed = True

    def _level_ones(self, lvl) -> int:
        if lvl[4] is None:
            seed, nbits, samples_off, bits_off, _ = lvl
            last_block = ((nbits - 1) // _RANK_SAMPLE_BITS) * _RANK_SAMPLE_BITS
            last_sample = struct.unpack_from(
                "<Q", bytes(self._buf[samples_off + 8 * (last_block // _RANK_SAMPLE_BITS):
                                      samples_off + 8 * (last_block // _RANK_SAMPLE_BITS) + 8]))[0]
            tail = popcount_range(_Window(self._buf, bits_off), last_block, nbits)
            lvl[4] = last_sample + tail
        return lvl[4]

    def _fallback_lookup(self, key: int) -> Optional[int]:
        lo, hi = 0, self._n_fallback
        base = self._fallback_off
        while lo < hi:
            mid = (lo + hi) // 2
            k, idx = struct.unpack("<IQ", bytes(self._buf[base + 12 * mid:
                                                          base + 12 * mid + 12]))
            if k == key:
                return idx
            if k < key:
                lo = mid + 1
            else:
                hi = mid
        return None

    def evaluate(self, key: int) -> Optional[int]:
        if not self._parsed:
            self._parse()
        base = 0
        for lvl in self._levels:
            seed, nbits, samples_off, bits_off, _ = lvl
            pos = mix64(key ^ seed) % nbits
            byte = self._buf[bits_off + (pos >> 3)]
            if isinstance(byte, bytes):  # mmap-style buffers
                byte = byte[0]
            if (byte >> (7 - (pos & 7))) & 1:
                block = pos // _RANK_SAMPLE_BITS
                sample = struct.unpack_from(
                    "<Q", bytes(self._buf[samples_off + 8 * block:
                                          samples_off + 8 * block + 8]))[0]
                rank = sample + popcount_range(_Window(self._buf, bits_off),
                                               block * _RANK_SAMPLE_BITS, pos)
                return base + rank
            base += self._level_ones(lvl)
        if self._n_fallback:
            return self._fallback_lookup(key)
        return None


class _Window:
    """Byte view shifted by a fixed offset, for bit helpers over sections."""

    __slots__ = ("_buf", "_off")

    def __init__(self, buf, off: int) -> None:
        self._buf = buf
        self._off = off

    def __getitem__(self, item):
        if isinstance(item, slice):
            return self._buf[item.start + self._off:item.stop + self._off]
        return self._buf[item + self._off]
