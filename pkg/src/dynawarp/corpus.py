"""Deterministic synthetic log corpus for tests and benchmarks.

Mimics the shape of real service logs: a fixed template pool per source,
variable fields (addresses, identifiers, sizes, latencies) drawn from a
seeded generator. Identifier fields are sampled log-uniformly, giving the
skewed few-hot-many-rare frequency profile of production identifiers.
The same seed and line count always produce the same corpus, so expected
query results can be recomputed independently.
"""

from __future__ import annotations

import random
from typing import Iterator

_LEVELS = ["INFO", "INFO", "INFO", "WARN", "ERROR", "DEBUG"]

_TEMPLATES = {
    "gateway": [
        "connection from 10.0.{a}.{b}:{port} accepted rx={rx} tx={tx}",
        "connection from 10.0.{a}.{b}:{port} closed after {ms}ms rx={rx}",
        "TLS handshake failed with 10.0.{a}.{b}: unknown ca",
        "route /api/v{v}/items/{item} -> backend-{bk} in {ms}ms",
        "rate limit exceeded for client c-{client} ({rx} reqs)",
    ],
    "auth": [
        "user u{user} login ok from 10.0.{a}.{b} in {ms}ms",
        "user u{user} login failed: bad password (attempt {retry})",
        "token t{token:04x} issued for u{user} ttl={ttl}s",
        "token t{token:04x} expired after {ttl}s",
        "session s-{sess} revoked by admin",
    ],
    "worker": [
        "job j{job} started on thread-{th} prio={retry}",
        "job j{job} finished in {ms}ms rss={mb}MB",
        "job j{job} retried ({retry}/5): upstream timeout after {ms}ms",
        "queue depth {depth} on shard-{shard} lag={ms}ms",
        "gc pause {ms}ms heap {mb}MB live={pct}%",
    ],
    "storage": [
        "wrote {mb}MB to /data/shard-{shard}/seg-{item:05d}.log in {ms}ms",
        "compaction of shard-{shard} finished, {mb}MB reclaimed in {ms}ms",
        "checksum mismatch in /data/shard-{shard}/seg-{item:05d}.log",
        "disk usage {pct}% on /dev/sd{dsk}1 ({mb}MB free)",
        "replica lag {ms}ms on shard-{shard} depth={depth}",
    ],
}

_SOURCES = sorted(_TEMPLATES)


def _skewed(rng: random.Random, n: int) -> int:
    """Log-uniform value in [0, n): small ids hot, large ids rare."""
    return int(n ** rng.random()) - 1 if n > 1 else 0


def generate(count: int, seed: int = 0) -> Iterator[tuple[str, str]]:
    """Yield ``(source, line)`` pairs, deterministically from the seed."""
    rng = random.Random(seed)
    for i in range(count):
        source = _SOURCES[rng.randrange(len(_SOURCES))]
        template = _TEMPLATES[source][rng.randrange(len(_TEMPLATES[source]))]
        line = template.format(
            a=rng.randrange(16), b=rng.randrange(256),
            port=40000 + _skewed(rng, 512), ms=rng.randrange(1, 2000),
            v=rng.randrange(1, 4), item=_skewed(rng, 8192),
            bk=rng.randrange(8), client=_skewed(rng, 2048),
            user=_skewed(rng, 8192), token=_skewed(rng, 1 << 16),
            sess=_skewed(rng, 8192), job=_skewed(rng, 16384),
            th=rng.randrange(64), retry=rng.randrange(1, 6),
            depth=rng.randrange(1000), shard=rng.randrange(16),
            mb=rng.randrange(1, 2048), pct=rng.randrange(100),
            dsk="abcd"[rng.randrange(4)],
            rx=rng.randrange(1, 9000), tx=rng.randrange(1, 9000),
            ttl=rng.randrange(60, 3600),
        )
        stamp = (f"2023-06-{1 + (i % 28):02d}T{(i // 28) % 24:02d}"
                 f":{i % 60:02d}:{(i * 7) % 60:02d}.{(i * 131) % 1000:03d}")
        yield source, f"{stamp} {_LEVELS[rng.randrange(len(_LEVELS))]} {source} {line}"


def generate_lines(count: int, seed: int = 0) -> Iterator[str]:
    for _, line in generate(count, seed):
        yield line


# Query mixes exercised by the benchmark, grouped by expected selectivity.
SAMPLE_TERMS = ["error", "login", "shard-3", "thread-17", "compaction",
                "u1234", "backend-5", "nosuchtoken"]
SAMPLE_NEEDLES = ["login failed", "unknown ca", "checksum mismatch",
                  "10.0.7.", "gc pause", "revoked by admin", "xqzv"]
