"""The immutable, single-file sketch (.dwsk).

Layout: a fixed header (checksummed, always within the first disk page)
followed by seven sections — MPHF, signatures or full fingerprints, rank
code lengths, rank offset samples, rank code bits, list directory, and
BIC-coded list bits. Opening a reader parses the header only; everything
else is read on demand so a memory-mapped file stays lazy.
"""

from __future__ import annotations

import struct
from typing import Sequence

import numpy as np

from .bitio import BitWriter, PrefixSumIndex, read_bits
from .mphf import Mphf, MphfView, _Window
from .mutable import MutableSketch, PAYLOAD_MASK, PAYLOAD_BITS, TAG_DIRECT
from .postings import bic_decode, bic_encode

MAGIC = b"DWSK"
VERSION = 1
FLAG_TEMPORARY = 1

_SECTIONS = 7  # mphf, signatures, rank lengths, rank samples, rank bits, list dir, list bits
_HEADER_FMT = "<4sHHQQIBBI" + "QQ" * _SECTIONS + "Q"
HEADER_SIZE = struct.calcsize(_HEADER_FMT)

_DIR_ENTRY = struct.Struct("<QI")


class SketchFormatError(ValueError):
    """Base for malformed sketch files."""


class MagicError(SketchFormatError):
    pass


class VersionError(SketchFormatError):
    pass


class ChecksumError(SketchFormatError):
    pass


class BoundsError(SketchFormatError):
    pass


def _fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def _rank_code_width(rank: int) -> int:
    # 1-bit codes "0"/"1" distinguish ranks 0 and 1 by width alone.
    return 1 if rank < 2 else (rank - 1).bit_length() + 1


def build_sketch(sketch: MutableSketch, signature_bits: int = 8,
                 sample_interval: int = 64, temporary: bool = False) -> bytes:
    """Serialize a finalized mutable sketch into the immutable file format."""
    if not 0 <= signature_bits <= 32:
        raise ValueError("signature_bits must be in [0, 32]")

    # Materialize DIRECT entries as singleton lists and collect the unique
    # list universe with exact reference counts.
    singleton_refs: dict[int, int] = {}
    handle_rank: dict[int, int] = {}
    for fp, raw in sketch.entries():
        if raw >> PAYLOAD_BITS == TAG_DIRECT:
            q = raw & PAYLOAD_MASK
            singleton_refs[q] = singleton_refs.get(q, 0) + 1

    universe: list[tuple[int, tuple[int, ...], int | None]] = []
    for q, refs in singleton_refs.items():
        universe.append((refs, (q,), None))
    for handle in sorted(set(raw & PAYLOAD_MASK for _, raw in sketch.entries()
                             if raw >> PAYLOAD_BITS != TAG_DIRECT)):
        plist = sketch.list_at(handle)
        universe.append((plist.token_count, tuple(plist.postings()), handle))

    # Rank by descending reference count; deterministic total tie-break.
    universe.sort(key=lambda item: (-item[0], item[1][0], len(item[1]), item[1]))
    n_lists = len(universe)
    if n_lists > (1 << 30):
        raise ValueError("too many posting lists")
    singleton_rank: dict[int, int] = {}
    for rank, (_, postings, handle) in enumerate(universe):
        if handle is None:
            singleton_rank[postings[0]] = rank
        else:
            handle_rank[handle] = rank

    fps = np.fromiter(sketch.fingerprints(), dtype=np.uint64)
    fps.sort()
    mphf = Mphf.build(fps)
    n = int(fps.size)

    # Rank per minimal-hash index.
    ranks = np.zeros(n, dtype=np.int64)
    if n:
        indices = mphf.evaluate_many(fps)
        tokens = sketch._tokens
        for fp, idx in zip(fps.tolist(), indices.tolist()):
            raw = tokens[fp]
            if raw >> PAYLOAD_BITS == TAG_DIRECT:
                ranks[idx] = singleton_rank[raw & PAYLOAD_MASK]
            else:
                ranks[idx] = handle_rank[raw & PAYLOAD_MASK]

    rank_writer = BitWriter()
    lengths = []
    for rank in ranks.tolist():
        width = _rank_code_width(rank)
        rank_writer.write(rank, width)
        lengths.append(width)
    _, lengths_bytes, samples_bytes = PrefixSumIndex.build(lengths or [1],
                                                           sample_interval)
    if not lengths:
        lengths_bytes, samples_bytes = b"", b""
    rank_width = max((length.bit_length() for length in lengths), default=1)

    # Signatures (or full fingerprints for temporary segments).
    sig_width = 32 if temporary else signature_bits
    sig_writer = BitWriter()
    if n and sig_width:
        sig_mask = (1 << sig_width) - 1
        order = np.zeros(n, dtype=np.uint64)
        order[indices] = fps
        for fp in order.tolist():
            sig_writer.write(fp & sig_mask, sig_width)

    # Unique lists: directory plus one BIC encoding each.
    list_writer = BitWriter()
    directory = bytearray()
    for _, postings, _handle in universe:
        directory += _DIR_ENTRY.pack(list_writer.bit_length, len(postings))
        bic_encode(postings, 0, sketch.capacity - 1, list_writer)

    sections = [
        mphf.serialize(),
        sig_writer.getvalue(),
        lengths_bytes,
        samples_bytes,
        rank_writer.getvalue(),
        bytes(directory),
        list_writer.getvalue(),
    ]
    offsets = []
    pos = HEADER_SIZE
    for payload in sections:
        offsets.append((pos, len(payload)))
        pos += len(payload)

    flags = FLAG_TEMPORARY if temporary else 0
    header_fields = [MAGIC, VERSION, flags, n, n_lists, sketch.capacity,
                     signature_bits, rank_width, sample_interval]
    for off, length in offsets:
        header_fields += [off, length]
    header_fields.append(0)
    header = bytearray(struct.pack(_HEADER_FMT, *header_fields))
    checksum = _fnv1a64(bytes(header[:-8]))
    header[-8:] = struct.pack("<Q", checksum)
    return bytes(header) + b"".join(sections)


class SketchReader:
    """Random-access reader over one immutable sketch file.

    Accepts anything supporting byte slicing (bytes, memoryview, mmap).
    Opening validates the header and touches nothing else.
    """

    def __init__(self, buf) -> None:
        if len(buf) < HEADER_SIZE:
            raise BoundsError(f"file shorter than the {HEADER_SIZE}-byte header")
        header = bytes(buf[:HEADER_SIZE])
        fields = struct.unpack(_HEADER_FMT, header)
        if fields[0] != MAGIC:
            raise MagicError(f"bad magic {fields[0]!r}")
        if fields[1] != VERSION:
            raise VersionError(f"unsupported version {fields[1]}")
        if struct.unpack("<Q", header[-8:])[0] != _fnv1a64(header[:-8]):
            raise ChecksumError("header checksum mismatch")
        self.flags = fields[2]
        self.n_tokens = fields[3]
        self.n_lists = fields[4]
        self.capacity = fields[5]
        self.signature_bits = fields[6]
        self.rank_length_width = fields[7]
        self.sample_interval = fields[8]
        self._sections = [(fields[9 + 2 * i], fields[10 + 2 * i])
                          for i in range(_SECTIONS)]
        last = HEADER_SIZE
        for off, length in self._sections:
            if off < last or off + length > len(buf):
                raise BoundsError("section table out of bounds")
            last = off + length
        self._buf = buf
        self._mphf = MphfView(buf, self._sections[0][0])
        self._sig = _Window(buf, self._sections[1][0])
        self._prefix = PrefixSumIndex(
            _Window(buf, self._sections[2][0]), _Window(buf, self._sections[3][0]),
            self.n_tokens, self.rank_length_width, self.sample_interval)
        self._rank_bits = _Window(buf, self._sections[4][0])
        self._list_bits = _Window(buf, self._sections[6][0])

    @property
    def temporary(self) -> bool:
        return bool(self.flags & FLAG_TEMPORARY)

    @property
    def _sig_width(self) -> int:
        return 32 if self.temporary else self.signature_bits

    def section_sizes(self) -> list[int]:
        return [length for _, length in self._sections]

    def _rank_at(self, index: int) -> int:
        off, length = self._prefix.offset(index)
        return read_bits(self._rank_bits, off, length)

    def fingerprint_at(self, index: int) -> int:
        if not self.temporary:
            raise ValueError("full fingerprints are only stored in temporary segments")
        return read_bits(self._sig, index * 32, 32)

    def is_present(self, fingerprint: int):
        """List id (the list's rank) of a fingerprint, or None.

        Ingested fingerprints always resolve; alien fingerprints slip
        through with probability about 2^-signature_bits.
        """
        index = self._mphf.evaluate(fingerprint)
        if index is None or index >= self.n_tokens:
            return None
        width = self._sig_width
        if width:
            stored = read_bits(self._sig, index * width, width)
            if stored != fingerprint & ((1 << width) - 1):
                return None
        return self._rank_at(index)

    def decode_list(self, list_id: int) -> list[int]:
        if not 0 <= list_id < self.n_lists:
            raise IndexError(f"list id {list_id} out of range [0, {self.n_lists})")
        base = self._sections[5][0]
        bit_offset, cardinality = _DIR_ENTRY.unpack(
            bytes(self._buf[base + 12 * list_id:base + 12 * list_id + 12]))
        postings, _ = bic_decode(self._list_bits, bit_offset, cardinality,
                                 0, self.capacity - 1)
        return postings

    def list_cardinality(self, list_id: int) -> int:
        if not 0 <= list_id < self.n_lists:
            raise IndexError(f"list id {list_id} out of range [0, {self.n_lists})")
        base = self._sections[5][0]
        return _DIR_ENTRY.unpack(
            bytes(self._buf[base + 12 * list_id:base + 12 * list_id + 12]))[1]

    def ranks(self):
        """Stream every stored rank in minimal-hash order.

        Reads the rank lengths and codes sequentially instead of going
        through the sampled prefix sums for every entry.
        """
        width = self.rank_length_width
        bit_off = 0
        for index in range(self.n_tokens):
            length = read_bits(self._prefix._lengths, index * width, width)
            yield read_bits(self._rank_bits, bit_off, length)
            bit_off += length

    def token_entries(self):
        """(fingerprint, rank) per minimal hash; temporary segments only."""
        if not self.temporary:
            raise ValueError("token iteration requires a temporary segment")
        for index, rank in enumerate(self.ranks()):
            yield read_bits(self._sig, index * 32, 32), rank


def merge_segments(readers: Sequence[SketchReader],
                   promotion_threshold: int | None = None) -> MutableSketch:
    """Replay temporary segments into one fresh mutable sketch.

    The result answers every query as if no internal segmentation had
    happened during ingest.
    """
    if not readers:
        raise ValueError("no segments to merge")
    capacity = readers[0].capacity
    for reader in readers:
        if not reader.temporary:
            raise ValueError("merge requires temporary segments with full fingerprints")
        if reader.capacity != capacity:
            raise ValueError("capacity mismatch across segments")
    merged = MutableSketch(capacity, promotion_threshold)
    for reader in readers:
        by_rank: dict[int, list[int]] = {}
        for fp, rank in reader.token_entries():
            by_rank.setdefault(rank, []).append(fp)
        for rank, fps in by_rank.items():
            postings = reader.decode_list(rank)
            for fp in fps:
                for p in postings:
                    merged.add(fp, p)
    return merged
