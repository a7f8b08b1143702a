"""Segment-based log store built around the membership sketch.

A segment is one directory: ``batches.dwb`` (concatenated compressed
frames), ``manifest.dwm`` (batch directory) and ``sketch.dwsk``. One
sealed batch of log lines is one posting; queries prune batches through
the sketch and post-filter the survivors exactly.
"""

from __future__ import annotations

import mmap
import struct
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

from . import zstd
from .bmh import bad_character_table, find_all
from .hashing import fingerprint
from .mutable import MutableSketch
from .query import ImmutableSketchView, intersect_all
from .sketchfile import SketchReader, build_sketch, merge_segments
from .tokenizer import (ascii_lower, ascii_lower_bytes, contains_grams,
                        decode_line, tokenize, top_level_tokens)

MANIFEST_MAGIC = b"DWSM"
MANIFEST_VERSION = 1
CODEC_NONE = 0
CODEC_ZSTD = 1

_MANIFEST_HEADER = struct.Struct("<4sHBBII")
_BATCH_RECORD = struct.Struct("<QQQI")

MANIFEST_NAME = "manifest.dwm"
BATCHES_NAME = "batches.dwb"
SKETCH_NAME = "sketch.dwsk"


class SegmentFullError(RuntimeError):
    """The segment's posting capacity is exhausted; roll to a new one."""


@dataclass
class LogRecord:
    line: bytes
    source_id: str | None = None


@dataclass
class StoreConfig:
    capacity: int = 4096
    batch_lines: int = 1024
    batch_bytes: int = 256 * 1024
    signature_bits: int = 8
    sample_interval: int = 64
    memory_limit: int | None = None
    group_by_source: bool = False
    max_open_groups: int = 64
    codec: str = "zstd"
    zstd_level: int = 3
    promotion_threshold: int | None = None

    def codec_id(self) -> int:
        if self.codec == "zstd":
            return CODEC_ZSTD
        if self.codec == "none":
            return CODEC_NONE
        raise ValueError(f"unknown codec {self.codec!r}")


@dataclass
class BatchMeta:
    offset: int
    compressed_size: int
    uncompressed_size: int
    line_count: int


class _OpenBatch:
    __slots__ = ("lines", "nbytes", "tokens")

    def __init__(self) -> None:
        self.lines: list[bytes] = []
        self.nbytes = 0
        self.tokens: set[str] = set()


class SegmentWriter:
    """Single-writer ingest side of one segment."""

    def __init__(self, directory: str | Path, config: StoreConfig | None = None) -> None:
        self.config = config or StoreConfig()
        if not 0 < self.config.capacity <= (1 << 16):
            raise ValueError("capacity must be in (0, 2^16]")
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._data = open(self.directory / BATCHES_NAME, "wb")
        self._batches: list[BatchMeta] = []
        self._open: OrderedDict[str, _OpenBatch] = OrderedDict()
        self._sketch = MutableSketch(self.config.capacity,
                                     self.config.promotion_threshold)
        self._fp_memo: dict[str, int] = {}
        self._temp_sketches: list[Path] = []
        self._finished = False
        self.line_count = 0
        self.timings = {"sketch_finish": 0.0, "data_finish": 0.0}

    # -- ingest --------------------------------------------------------------

    def ingest(self, record: LogRecord) -> None:
        self.ingest_line(record.line, record.source_id)

    def ingest_line(self, line: bytes | str, source_id: str | None = None) -> None:
        if self._finished:
            raise RuntimeError("segment is finished")
        if isinstance(line, str):
            line = line.encode("utf-8")
        group = source_id if (self.config.group_by_source and source_id) else ""
        batch = self._open.get(group)
        if batch is None:
            self._reserve_posting_room()
            batch = _OpenBatch()
            self._open[group] = batch
            if len(self._open) > self.config.max_open_groups:
                lru = next(iter(self._open))
                self._seal(lru)
        elif (len(batch.lines) >= self.config.batch_lines
              or batch.nbytes + len(line) + 1 > self.config.batch_bytes):
            self._seal(group)
            self._reserve_posting_room()
            batch = _OpenBatch()
            self._open[group] = batch
        self._open.move_to_end(group)
        batch.lines.append(line)
        batch.nbytes += len(line) + 1
        if line:
            batch.tokens.update(tokenize(line))
        self.line_count += 1

    def _reserve_posting_room(self) -> None:
        if len(self._batches) + len(self._open) >= self.config.capacity:
            raise SegmentFullError(
                f"segment capacity {self.config.capacity} exhausted")

    def _seal(self, group: str) -> None:
        batch = self._open.pop(group)
        posting = len(self._batches)
        payload = b"\n".join(batch.lines) + b"\n" if batch.lines else b""
        if self.config.codec_id() == CODEC_ZSTD:
            frame = zstd.compress(payload, self.config.zstd_level)
        else:
            frame = payload
        offset = self._data.tell()
        self._data.write(frame)
        self._batches.append(BatchMeta(offset, len(frame), len(payload),
                                       len(batch.lines)))
        memo = self._fp_memo
        add = self._sketch.add
        for token in batch.tokens:
            fp = memo.get(token)
            if fp is None:
                fp = memo[token] = fingerprint(token)
            add(fp, posting)
        limit = self.config.memory_limit
        if limit is not None and self._sketch.estimate_memory() > limit:
            self._flush_sketch()

    def _flush_sketch(self) -> None:
        if self._sketch.token_count == 0:
            return
        path = self.directory / f"tmp-sketch-{len(self._temp_sketches):04d}.dwsk"
        path.write_bytes(build_sketch(self._sketch,
                                      signature_bits=self.config.signature_bits,
                                      sample_interval=self.config.sample_interval,
                                      temporary=True))
        self._temp_sketches.append(path)
        self._sketch = MutableSketch(self.config.capacity,
                                     self.config.promotion_threshold)

    @property
    def flush_count(self) -> int:
        return len(self._temp_sketches)

    # -- finish ----------------------------------------------------------------

    def finish(self) -> "Segment":
        if self._finished:
            raise RuntimeError("segment already finished")
        self._finished = True
        t0 = time.perf_counter()
        for group in list(self._open):
            self._seal(group)
        self.timings["data_finish"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        if self._temp_sketches:
            self._flush_sketch()
            buffers = [path.read_bytes() for path in self._temp_sketches]
            sketch = merge_segments([SketchReader(buf) for buf in buffers],
                                    self.config.promotion_threshold)
        else:
            sketch = self._sketch
        sketch_bytes = build_sketch(sketch,
                                    signature_bits=self.config.signature_bits,
                                    sample_interval=self.config.sample_interval)
        (self.directory / SKETCH_NAME).write_bytes(sketch_bytes)
        for path in self._temp_sketches:
            path.unlink()
        self.timings["sketch_finish"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        self._data.close()
        self._write_manifest()
        self.timings["data_finish"] += time.perf_counter() - t0
        return Segment.open(self.directory)

    def _write_manifest(self) -> None:
        with open(self.directory / MANIFEST_NAME, "wb") as fh:
            fh.write(_MANIFEST_HEADER.pack(MANIFEST_MAGIC, MANIFEST_VERSION,
                                           self.config.codec_id(), 0,
                                           self.config.capacity,
                                           len(self._batches)))
            for meta in self._batches:
                fh.write(_BATCH_RECORD.pack(meta.offset, meta.compressed_size,
                                            meta.uncompressed_size,
                                            meta.line_count))


class Segment:
    """Read side of one finished segment."""

    def __init__(self, directory: Path, codec: int, capacity: int,
                 batches: list[BatchMeta], data, reader: SketchReader) -> None:
        self.directory = directory
        self.codec = codec
        self.capacity = capacity
        self.batches = batches
        self._data = data
        self.reader = reader
        self.view = ImmutableSketchView(reader)

    @classmethod
    def open(cls, directory: str | Path) -> "Segment":
        directory = Path(directory)
        raw = (directory / MANIFEST_NAME).read_bytes()
        magic, version, codec, _flags, capacity, n_batches = \
            _MANIFEST_HEADER.unpack_from(raw, 0)
        if magic != MANIFEST_MAGIC:
            raise ValueError(f"bad manifest magic {magic!r}")
        if version != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version {version}")
        batches = []
        pos = _MANIFEST_HEADER.size
        for _ in range(n_batches):
            batches.append(BatchMeta(*_BATCH_RECORD.unpack_from(raw, pos)))
            pos += _BATCH_RECORD.size
        data_fh = open(directory / BATCHES_NAME, "rb")
        try:
            data = mmap.mmap(data_fh.fileno(), 0, access=mmap.ACCESS_READ)
        except ValueError:  # empty file cannot be mapped
            data = b""
        data_fh.close()
        sketch_fh = open(directory / SKETCH_NAME, "rb")
        sketch = mmap.mmap(sketch_fh.fileno(), 0, access=mmap.ACCESS_READ)
        sketch_fh.close()
        return cls(directory, codec, capacity, batches, data,
                   SketchReader(sketch))

    @property
    def n_batches(self) -> int:
        return len(self.batches)

    @property
    def line_count(self) -> int:
        return sum(meta.line_count for meta in self.batches)

    def data_bytes(self) -> int:
        return sum(meta.compressed_size for meta in self.batches)

    def sketch_bytes(self) -> int:
        return (self.directory / SKETCH_NAME).stat().st_size

    def batch_payload(self, posting: int) -> bytes:
        meta = self.batches[posting]
        frame = bytes(self._data[meta.offset:meta.offset + meta.compressed_size])
        if self.codec == CODEC_ZSTD:
            return zstd.decompress(frame, meta.uncompressed_size)
        return frame

    def batch_lines(self, posting: int) -> list[bytes]:
        payload = self.batch_payload(posting)
        if not payload:
            return []
        return payload[:-1].split(b"\n")


# -- query planning and execution -----------------------------------------------

MODE_TERM = "TERM"
MODE_CONTAINS = "CONTAINS"
MODE_SCAN = "SCAN"


@dataclass
class QueryPlan:
    mode: str
    grams: list[str]
    needle: str


@dataclass
class QueryStats:
    mode: str = MODE_SCAN
    grams: list[str] = field(default_factory=list)
    candidate_batches: int = 0
    decompressed_batches: int = 0
    matching_batches: int = 0
    false_positive_batches: int = 0
    total_batches: int = 0


def plan_contains(needle: bytes | str) -> QueryPlan:
    text = ascii_lower(decode_line(needle))
    if not text:
        raise ValueError("empty needle")
    grams = contains_grams(text)
    if not grams:
        return QueryPlan(MODE_SCAN, [], text)
    return QueryPlan(MODE_CONTAINS, grams, text)


def _term_matches(lines: list[bytes], term: str) -> list[bytes]:
    # Tokens are contiguous in the line, so a substring check screens out
    # most lines before the tokenizer runs.
    needle = term.encode("utf-8")
    return [line for line in lines
            if needle in ascii_lower_bytes(line) and term in top_level_tokens(line)]


def _substring_matches(lines: list[bytes], payload: bytes, needle: bytes,
                       table: list[int]) -> list[bytes]:
    hay = ascii_lower_bytes(payload)
    positions = find_all(hay, needle, table)
    if not positions:
        return []
    starts = []
    pos = 0
    for line in lines:
        starts.append(pos)
        pos += len(line) + 1
    out = []
    idx = 0
    for p in positions:
        while idx + 1 < len(starts) and starts[idx + 1] <= p:
            idx += 1
        # Skip occurrences that straddle the newline separator.
        if p + len(needle) <= starts[idx] + len(lines[idx]):
            if not out or out[-1] is not lines[idx]:
                out.append(lines[idx])
    return out


def run_term(segment: Segment, term: bytes | str) -> tuple[list[bytes], QueryStats]:
    term_text = ascii_lower(decode_line(term))
    if not term_text:
        raise ValueError("empty term")
    tokens = sorted(top_level_tokens(term_text))
    stats = QueryStats(mode=MODE_TERM, grams=tokens,
                       total_batches=segment.n_batches)
    candidates = intersect_all(segment.view, tokens)
    stats.candidate_batches = len(candidates)
    results = []
    for posting in candidates:
        lines = segment.batch_lines(posting)
        stats.decompressed_batches += 1
        matched = _term_matches(lines, term_text)
        if matched:
            stats.matching_batches += 1
            results.extend(matched)
        else:
            stats.false_positive_batches += 1
    return results, stats


def run_contains(segment: Segment, needle: bytes | str) -> tuple[list[bytes], QueryStats]:
    plan = plan_contains(needle)
    stats = QueryStats(mode=plan.mode, grams=plan.grams,
                       total_batches=segment.n_batches)
    if plan.mode == MODE_SCAN:
        candidates = list(range(segment.n_batches))
    else:
        candidates = intersect_all(segment.view, plan.grams)
    stats.candidate_batches = len(candidates)
    needle_bytes = plan.needle.encode("utf-8")
    table = bad_character_table(needle_bytes)
    results = []
    for posting in candidates:
        payload = segment.batch_payload(posting)
        stats.decompressed_batches += 1
        lines = payload[:-1].split(b"\n") if payload else []
        matched = _substring_matches(lines, payload, needle_bytes, table)
        if matched:
            stats.matching_batches += 1
            results.extend(matched)
        else:
            stats.false_positive_batches += 1
    return results, stats


def run_scan(segment: Segment, needle: bytes | str) -> tuple[list[bytes], QueryStats]:
    text = ascii_lower(decode_line(needle))
    if not text:
        raise ValueError("empty needle")
    stats = QueryStats(mode=MODE_SCAN, total_batches=segment.n_batches,
                       candidate_batches=segment.n_batches)
    needle_bytes = text.encode("utf-8")
    table = bad_character_table(needle_bytes)
    results = []
    for posting in range(segment.n_batches):
        payload = segment.batch_payload(posting)
        stats.decompressed_batches += 1
        lines = payload[:-1].split(b"\n") if payload else []
        matched = _substring_matches(lines, payload, needle_bytes, table)
        if matched:
            stats.matching_batches += 1
            results.extend(matched)
        else:
            stats.false_positive_batches += 1
    return results, stats


def query_term(segment: Segment, term: bytes | str) -> list[bytes]:
    return run_term(segment, term)[0]


def query_contains(segment: Segment, needle: bytes | str) -> list[bytes]:
    return run_contains(segment, needle)[0]


def scan_query(segment: Segment, needle: bytes | str) -> list[bytes]:
    return run_scan(segment, needle)[0]


def error_rate(segment: Segment, needle: bytes | str, mode: str = "contains") -> float:
    """False-positive candidate batches over total batches."""
    if segment.n_batches == 0:
        return 0.0
    if mode == "term":
        _, stats = run_term(segment, needle)
    elif mode == "contains":
        _, stats = run_contains(segment, needle)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if stats.mode == MODE_SCAN:
        return 0.0
    return stats.false_positive_batches / stats.total_batches
