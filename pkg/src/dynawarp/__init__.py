"""DynaWarp: a segmented compressed log store with a deduplicating
multi-membership sketch index.

The sketch answers "which compressed batches may contain this token"
with no false negatives, so queries only decompress a handful of
candidate batches and post-filter them exactly.
"""

from .mutable import MutableSketch
from .sketchfile import SketchReader, build_sketch, merge_segments
from .store import (LogRecord, Segment, SegmentFullError, SegmentWriter,
                    StoreConfig, plan_contains, query_contains, query_term,
                    scan_query)

__all__ = [
    "LogRecord", "MutableSketch", "Segment", "SegmentFullError",
    "SegmentWriter", "SketchReader", "StoreConfig", "build_sketch",
    "merge_segments", "plan_contains", "query_contains", "query_term",
    "scan_query",
]

__version__ = "0.1.0"
