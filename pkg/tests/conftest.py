import random

import pytest

from dynawarp.hashing import fingerprint
from dynawarp.mutable import MutableSketch

# Four-line example used throughout: one line per posting, word-level
# tokens. "connection" and "host" share the set {0, 2}; "info" owns
# {0, 1, 3}; every other word occurs in a single posting.
EXAMPLE_LINES = [
    "INFO: Connection to host established",
    "INFO: Start processing",
    "ERROR: Host connection terminated",
    "INFO: Restart triggered",
]


def example_word_postings() -> dict[str, set[int]]:
    out: dict[str, set[int]] = {}
    for posting, line in enumerate(EXAMPLE_LINES):
        for word in line.lower().replace(":", "").split():
            out.setdefault(word, set()).add(posting)
    return out


def build_example_sketch(capacity: int = 4) -> MutableSketch:
    sketch = MutableSketch(capacity)
    for word, postings in example_word_postings().items():
        for posting in sorted(postings):
            sketch.add(fingerprint(word), posting)
    return sketch


def random_token_postings(n_tokens: int, capacity: int, seed: int,
                          max_card: int = 8) -> dict[int, set[int]]:
    """Random fingerprint -> posting-set mapping for roundtrip tests."""
    rng = random.Random(seed)
    out: dict[int, set[int]] = {}
    while len(out) < n_tokens:
        fp = rng.getrandbits(32)
        card = rng.randint(1, max_card)
        out[fp] = {rng.randrange(capacity) for _ in range(card)}
    return out


def sketch_from_mapping(mapping: dict[int, set[int]], capacity: int) -> MutableSketch:
    sketch = MutableSketch(capacity)
    for fp, postings in mapping.items():
        for posting in sorted(postings):
            sketch.add(fp, posting)
    return sketch


@pytest.fixture(scope="session")
def example_sketch() -> MutableSketch:
    return build_example_sketch()
