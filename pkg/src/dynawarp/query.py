"""Query execution over mutable and immutable sketches.

Both sketch forms expose the same two capabilities — is this fingerprint
present (returning a stable list id), and decode a list id — so the
executor, list-id dedup and early-stop logic are shared.
"""

from __future__ import annotations

from typing import Iterable, Optional, Protocol

from .hashing import fingerprint
from .mutable import MutableSketch, PAYLOAD_BITS, PAYLOAD_MASK, TAG_DIRECT
from .sketchfile import SketchReader

_DIRECT_ID_BASE = 1 << 32


class SketchView(Protocol):
    def present(self, fp: int) -> Optional[int]: ...
    def decode(self, list_id: int) -> list[int]: ...


class MutableSketchView:
    """Uniform reader over a mutable sketch between completed writes."""

    def __init__(self, sketch: MutableSketch) -> None:
        self._sketch = sketch

    def present(self, fp: int) -> Optional[int]:
        raw = self._sketch._tokens.get(fp)
        if raw is None:
            return None
        payload = raw & PAYLOAD_MASK
        if raw >> PAYLOAD_BITS == TAG_DIRECT:
            # Singleton sets are always DIRECT, so the posting itself is a
            # stable identity for the set.
            return payload
        return _DIRECT_ID_BASE + payload

    def decode(self, list_id: int) -> list[int]:
        if list_id < _DIRECT_ID_BASE:
            return [list_id]
        return self._sketch.list_at(list_id - _DIRECT_ID_BASE).postings()


class ImmutableSketchView:
    def __init__(self, reader: SketchReader) -> None:
        self._reader = reader

    def present(self, fp: int) -> Optional[int]:
        return self._reader.is_present(fp)

    def decode(self, list_id: int) -> list[int]:
        return self._reader.decode_list(list_id)


class PostingsConsumer(Protocol):
    def accept(self, postings: list[int]) -> None: ...
    def should_stop(self) -> bool: ...


def execute(view: SketchView, tokens: Iterable[bytes | str],
            consumer: PostingsConsumer) -> None:
    """Feed each distinct posting list of the query tokens to the consumer.

    Absent tokens are reported immediately as empty lists (interleaved with
    token processing); each distinct list id among present tokens is decoded
    exactly once afterwards. The consumer may stop execution after any
    callback.
    """
    list_ids: dict[int, None] = {}
    for token in tokens:
        list_id = view.present(fingerprint(token))
        if list_id is None:
            consumer.accept([])
            if consumer.should_stop():
                return
        else:
            list_ids[list_id] = None
    for list_id in list_ids:
        consumer.accept(view.decode(list_id))
        if consumer.should_stop():
            return


def _intersect_sorted(a: list[int], b: list[int]) -> list[int]:
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        if a[i] == b[j]:
            out.append(a[i])
            i += 1
            j += 1
        elif a[i] < b[j]:
            i += 1
        else:
            j += 1
    return out


class _IntersectConsumer:
    def __init__(self) -> None:
        self.result: list[int] | None = None
        self._stop = False

    def accept(self, postings: list[int]) -> None:
        if self.result is None:
            self.result = postings
        else:
            self.result = _intersect_sorted(self.result, postings)
        if not self.result:
            self._stop = True

    def should_stop(self) -> bool:
        return self._stop


def intersect_all(view: SketchView, tokens) -> list[int]:
    """AND over the tokens' posting sets; empties short-circuit."""
    tokens = list(tokens)
    if not tokens:
        raise ValueError("intersection of zero tokens is ambiguous")
    consumer = _IntersectConsumer()
    execute(view, tokens, consumer)
    return consumer.result or []


class _UnionConsumer:
    def __init__(self) -> None:
        self.seen: set[int] = set()

    def accept(self, postings: list[int]) -> None:
        self.seen.update(postings)

    def should_stop(self) -> bool:
        return False


def union_all(view: SketchView, tokens) -> list[int]:
    """OR over the tokens' posting sets; empty input yields the empty set."""
    consumer = _UnionConsumer()
    execute(view, list(tokens), consumer)
    return sorted(consumer.seen)
