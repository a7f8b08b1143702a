"""Bit-level plumbing shared by every persisted structure.

One packing convention everywhere: bits are appended MSB-first into
consecutive bytes, multi-bit values are written big-endian within the
stream, and multi-byte scalars elsewhere in the formats are little-endian.
"""

from __future__ import annotations

import struct


class BitWriter:
    """Append-only MSB-first bit sequence."""

    def __init__(self) -> None:
        self._bytes = bytearray()
        self._acc = 0
        self._accbits = 0
        self._bitlen = 0

    @property
    def bit_length(self) -> int:
        return self._bitlen

    def write(self, value: int, nbits: int) -> None:
        """Append the low ``nbits`` of ``value``, most significant bit first."""
        if nbits < 0 or value < 0 or (nbits < value.bit_length()):
            raise ValueError(f"value {value} does not fit in {nbits} bits")
        self._acc = (self._acc << nbits) | value
        self._accbits += nbits
        self._bitlen += nbits
        while self._accbits >= 8:
            self._accbits -= 8
            self._bytes.append((self._acc >> self._accbits) & 0xFF)
        self._acc &= (1 << self._accbits) - 1

    def extend(self, other: "BitWriter") -> None:
        for byte in other._bytes:
            self.write(byte, 8)
        if other._accbits:
            self.write(other._acc, other._accbits)

    def getvalue(self) -> bytes:
        """Packed bytes; the final partial byte is zero-padded on the right."""
        out = bytes(self._bytes)
        if self._accbits:
            out += bytes([(self._acc << (8 - self._accbits)) & 0xFF])
        return out


def read_bits(buf, bit_offset: int, nbits: int) -> int:
    """Read ``nbits`` at ``bit_offset`` from an MSB-first packed buffer."""
    if nbits == 0:
        return 0
    first = bit_offset >> 3
    last = (bit_offset + nbits + 7) >> 3
    chunk = int.from_bytes(bytes(buf[first:last]), "big")
    shift = (last << 3) - (bit_offset + nbits)
    return (chunk >> shift) & ((1 << nbits) - 1)


class BitCursor:
    """Sequential reader over an MSB-first packed buffer."""

    def __init__(self, buf, bit_offset: int = 0) -> None:
        self._buf = buf
        self.position = bit_offset

    def take(self, nbits: int) -> int:
        value = read_bits(self._buf, self.position, nbits)
        self.position += nbits
        return value


def popcount_range(buf, start_bit: int, end_bit: int) -> int:
    """Number of set bits in [start_bit, end_bit) of an MSB-first buffer."""
    if end_bit <= start_bit:
        return 0
    first = start_bit >> 3
    last = (end_bit + 7) >> 3
    chunk = int.from_bytes(bytes(buf[first:last]), "big")
    total = (last << 3) - (first << 3)
    # Mask off leading bits before start_bit and trailing bits after end_bit.
    chunk &= (1 << (total - (start_bit - (first << 3)))) - 1
    chunk >>= (last << 3) - end_bit
    return bin(chunk).count("1")


class PrefixSumIndex:
    """Offsets into a bit sequence of variable-length records.

    Stores the bit length of every entry at a fixed width plus an absolute
    64-bit offset sample every ``sample_interval`` entries, so locating an
    entry costs at most ``sample_interval`` additions.
    """

    def __init__(self, lengths_buf, samples_buf, count: int, width: int,
                 sample_interval: int) -> None:
        if sample_interval < 1:
            raise ValueError("sample_interval must be positive")
        self._lengths = lengths_buf
        self._samples = samples_buf
        self.count = count
        self.width = width
        self.sample_interval = sample_interval

    @classmethod
    def build(cls, entry_lengths, sample_interval: int = 64):
        """Serialize lengths + samples; returns (index, lengths_bytes, samples_bytes)."""
        width = max((length.bit_length() for length in entry_lengths), default=0)
        width = max(width, 1)
        writer = BitWriter()
        samples = bytearray()
        offset = 0
        for i, length in enumerate(entry_lengths):
            if length < 1:
                raise ValueError("entry lengths must be >= 1")
            if i % sample_interval == 0:
                samples += struct.pack("<Q", offset)
            writer.write(length, width)
            offset += length
        lengths_bytes = writer.getvalue()
        index = cls(lengths_bytes, bytes(samples), len(entry_lengths), width,
                    sample_interval)
        return index, lengths_bytes, bytes(samples)

    def entry_length(self, i: int) -> int:
        return read_bits(self._lengths, i * self.width, self.width)

    def offset(self, i: int) -> tuple[int, int]:
        """(bit offset, bit length) of entry ``i``."""
        if not 0 <= i < self.count:
            raise IndexError(f"entry {i} out of range [0, {self.count})")
        base = i - (i % self.sample_interval)
        sample_idx = i // self.sample_interval
        off = struct.unpack(
            "<Q", bytes(self._samples[sample_idx * 8:sample_idx * 8 + 8]))[0]
        for j in range(base, i):
            off += self.entry_length(j)
        return off, self.entry_length(i)
