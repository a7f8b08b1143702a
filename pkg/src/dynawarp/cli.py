"""Command-line front end: ingest, query, verify, stats, bench, gen.

Results go to stdout (tab-separated tables, or JSON with ``--json``);
diagnostics go to stderr via logging, controlled by the ``DYNAWARP_LOG``
environment variable. Exit codes: 0 success, 1 failure, 2 bad usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import corpus as corpus_mod
from .hashing import fingerprint
from .store import (BATCHES_NAME, MANIFEST_NAME, Segment, SegmentFullError,
                    SegmentWriter, StoreConfig, run_contains, run_scan,
                    run_term)
from .tokenizer import tokenize

log = logging.getLogger("dynawarp")

_CONFIG_KEYS = {
    "capacity": int, "batch_lines": int, "batch_bytes": int,
    "signature_bits": int, "memory_limit": int, "sample_interval": int,
    "group_by_source": lambda v: v.lower() in ("1", "true", "yes"),
    "codec": str, "zstd_level": int,
}


def _setup_logging() -> None:
    level = os.environ.get("DYNAWARP_LOG", "warning").upper()
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_config_file(path: str) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _CONFIG_KEYS[key](value.strip())
    return values


def _store_config(args) -> StoreConfig:
    cfg = StoreConfig()
    if getattr(args, "config", None):
        for key, value in _load_config_file(args.config).items():
            setattr(cfg, key, value)
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    cfg.codec_id()  # reject unknown codec names before any work
    if cfg.batch_lines < 1 or cfg.batch_bytes < 1:
        raise ValueError("batch seal limits must be positive")
    if not 0 <= cfg.signature_bits <= 32:
        raise ValueError("signature_bits must be in [0, 32]")
    return cfg


def _segment_dirs(path: Path) -> list[Path]:
    if (path / MANIFEST_NAME).exists():
        return [path]
    segments = sorted(p for p in path.glob("segment-*") if (p / MANIFEST_NAME).exists())
    if not segments:
        raise FileNotFoundError(f"no segments under {path}")
    return segments


def _open_segments(path: str) -> list[Segment]:
    return [Segment.open(p) for p in _segment_dirs(Path(path))]


def _read_records(path: str, with_sources: bool):
    stream = sys.stdin.buffer if path == "-" else open(path, "rb")
    try:
        for raw in stream:
            line = raw.rstrip(b"\n")
            if with_sources:
                source, _, line = line.partition(b"\t")
                yield source.decode("utf-8", "replace"), line
            else:
                yield None, line
    finally:
        if stream is not sys.stdin.buffer:
            stream.close()


def _emit(rows: list[dict], columns: list[str], as_json: bool) -> None:
    if as_json:
        json.dump(rows, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return
    print("\t".join(columns))
    for row in rows:
        print("\t".join(str(row[c]) for c in columns))


# -- ingest -------------------------------------------------------------------

def cmd_ingest(args) -> int:
    cfg = _store_config(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    writer = None
    seg_index = 0
    ingest_start = time.perf_counter()

    def close_segment(w: SegmentWriter) -> None:
        nonlocal ingest_start
        ingest_seconds = time.perf_counter() - ingest_start
        segment = w.finish()
        stats = segment.reader
        rows.append({
            "segment": w.directory.name,
            "lines": w.line_count,
            "batches": segment.n_batches,
            "compressed_bytes": segment.data_bytes(),
            "sketch_bytes": segment.sketch_bytes(),
            "tokens": stats.n_tokens,
            "posting_lists": stats.n_lists,
            "dedup_ratio": round(stats.n_lists / stats.n_tokens, 4) if stats.n_tokens else 0.0,
            "ingest_s": round(ingest_seconds, 3),
            "sketch_finish_s": round(w.timings["sketch_finish"], 3),
            "data_finish_s": round(w.timings["data_finish"], 3),
        })
        ingest_start = time.perf_counter()

    try:
        for source, line in _read_records(args.input, args.sources):
            if writer is None:
                writer = SegmentWriter(out / f"segment-{seg_index:04d}", cfg)
                seg_index += 1
            try:
                writer.ingest_line(line, source)
            except SegmentFullError:
                close_segment(writer)
                writer = SegmentWriter(out / f"segment-{seg_index:04d}", cfg)
                seg_index += 1
                writer.ingest_line(line, source)
        if writer is None:
            writer = SegmentWriter(out / f"segment-{seg_index:04d}", cfg)
        close_segment(writer)
    except OSError as exc:
        log.error("ingest failed: %s", exc)
        return 1
    _emit(rows, ["segment", "lines", "batches", "compressed_bytes", "sketch_bytes",
                 "tokens", "posting_lists", "dedup_ratio", "ingest_s",
                 "sketch_finish_s", "data_finish_s"], args.json)
    return 0


# -- query --------------------------------------------------------------------

def _run_query(segment: Segment, args):
    if args.term is not None:
        if args.mode == "scan":
            return run_scan(segment, args.term)
        return run_term(segment, args.term)
    if args.mode == "scan":
        return run_scan(segment, args.contains)
    return run_contains(segment, args.contains)


def cmd_query(args) -> int:
    try:
        segments = _open_segments(args.segment)
    except (FileNotFoundError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    total = 0
    out = sys.stdout.buffer
    for segment in segments:
        try:
            lines, stats = _run_query(segment, args)
        except ValueError as exc:
            log.error("%s", exc)
            return 1
        total += len(lines)
        if args.explain:
            print(f"# segment={segment.directory.name} mode={stats.mode} "
                  f"grams={','.join(stats.grams)} "
                  f"candidates={stats.candidate_batches} "
                  f"decompressed={stats.decompressed_batches} "
                  f"false_positive_batches={stats.false_positive_batches} "
                  f"total_batches={stats.total_batches}", file=sys.stderr)
        if not args.count_only:
            for line in lines:
                out.write(line)
                out.write(b"\n")
    if args.count_only:
        print(total)
    return 0


# -- verify -------------------------------------------------------------------

def _verify_segment(segment: Segment) -> list[dict]:
    """Rebuild the token -> batch oracle from the stored batches themselves."""
    oracle: dict[str, set[int]] = {}
    for posting in range(segment.n_batches):
        for line in segment.batch_lines(posting):
            if not line:
                continue
            for token in tokenize(line):
                oracle.setdefault(token, set()).add(posting)
    failures = []
    view = segment.view
    distinct_sets = {frozenset(v) for v in oracle.values()}
    for token, want in oracle.items():
        list_id = view.present(fingerprint(token))
        if list_id is None:
            failures.append({"check": "no_false_negatives", "token": token,
                             "detail": "token absent from sketch"})
            continue
        got = set(view.decode(list_id))
        if not want <= got:
            failures.append({"check": "no_false_negatives", "token": token,
                             "detail": f"missing postings {sorted(want - got)}"})
        if got != want:
            failures.append({"check": "exact_postings", "token": token,
                             "detail": f"decoded {sorted(got)} expected {sorted(want)}"})
        if failures:
            break
    checks = [{"check": "no_false_negatives", "tokens": len(oracle),
               "status": "fail" if failures else "pass"}]
    n_lists = segment.reader.n_lists
    if not failures and n_lists != len(distinct_sets):
        failures.append({"check": "dedup_exact", "token": "",
                         "detail": f"{n_lists} lists, oracle has {len(distinct_sets)}"})
    checks.append({"check": "dedup_exact", "tokens": len(distinct_sets),
                   "status": "fail" if any(f["check"] == "dedup_exact" for f in failures) else "pass"})
    return checks if not failures else checks + [dict(f, status="fail") for f in failures[:1]]


def cmd_verify(args) -> int:
    try:
        segments = _open_segments(args.segment)
    except (FileNotFoundError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    rows = []
    failed = False
    for segment in segments:
        for row in _verify_segment(segment):
            row = dict(row, segment=segment.directory.name)
            rows.append(row)
            failed = failed or row.get("status") == "fail"
    columns = sorted({k for row in rows for k in row})
    for row in rows:
        for c in columns:
            row.setdefault(c, "")
    _emit(rows, columns, args.json)
    return 1 if failed else 0


# -- stats --------------------------------------------------------------------

_SECTION_NAMES = ["mphf", "signatures", "rank_lengths", "rank_samples",
                  "rank_bits", "list_directory", "list_bits"]


def cmd_stats(args) -> int:
    try:
        segments = _open_segments(args.segment)
    except (FileNotFoundError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    rows = []
    for segment in segments:
        reader = segment.reader
        data_bytes = segment.data_bytes()
        sketch_bytes = segment.sketch_bytes()
        rank_hist: dict[int, int] = {}
        for rank in reader.ranks():
            rank_hist[rank] = rank_hist.get(rank, 0) + 1
        rows.append({
            "segment": segment.directory.name,
            "lines": segment.line_count,
            "batches": segment.n_batches,
            "data_bytes": data_bytes,
            "sketch_bytes": sketch_bytes,
            "sketch_data_ratio": round(sketch_bytes / data_bytes, 4) if data_bytes else 0.0,
            "tokens": reader.n_tokens,
            "posting_lists": reader.n_lists,
            "bits_per_token": round(sketch_bytes * 8 / reader.n_tokens, 2) if reader.n_tokens else 0.0,
            "rank_histogram": " ".join(f"{r}:{c}" for r, c in sorted(rank_hist.items())[:16]),
        })
        if args.figures:
            from .report import render_stats_figure
            figdir = Path(args.figures)
            figdir.mkdir(parents=True, exist_ok=True)
            cards = [reader.list_cardinality(i) for i in range(reader.n_lists)]
            sections = dict(zip(_SECTION_NAMES, reader.section_sizes()))
            path = render_stats_figure(cards, sections,
                                       figdir / f"stats-{segment.directory.name}.png")
            log.info("wrote %s", path)
    _emit(rows, ["segment", "lines", "batches", "data_bytes", "sketch_bytes",
                 "sketch_data_ratio", "tokens", "posting_lists", "bits_per_token",
                 "rank_histogram"], args.json)
    return 0


# -- bench --------------------------------------------------------------------

def _load_queries(path: str) -> list[tuple[str, str, str]]:
    queries = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        if not raw.strip() or raw.startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) != 3 or parts[1] not in ("term", "contains"):
            raise ValueError(f"{path}:{lineno}: expected class<TAB>term|contains<TAB>query")
        queries.append((parts[0], parts[1], parts[2]))
    return queries


def _bench_once(segments: list[Segment], kind: str, query: str, mode: str,
                pool: ThreadPoolExecutor | None):
    def one(segment):
        if mode == "scan":
            return run_scan(segment, query)
        if kind == "term":
            return run_term(segment, query)
        return run_contains(segment, query)
    if pool is not None and len(segments) > 1:
        results = list(pool.map(one, segments))
    else:
        results = [one(s) for s in segments]
    lines = sum(len(r[0]) for r in results)
    fp = sum(r[1].false_positive_batches for r in results if r[1].mode != "SCAN")
    total = sum(r[1].total_batches for r in results)
    return lines, fp, total


def cmd_bench(args) -> int:
    try:
        segments = _open_segments(args.segment)
        queries = _load_queries(args.queries)
    except (FileNotFoundError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    pool = ThreadPoolExecutor(args.parallel) if args.parallel > 1 else None
    classes: dict[str, list[tuple[str, str]]] = {}
    for cls, kind, query in queries:
        classes.setdefault(cls, []).append((kind, query))
    rows = []
    fig_rows = []
    for cls, members in sorted(classes.items()):
        stats = {}
        for mode in ("sketch", "scan"):
            # warm-up pass, then the measured iterations
            for kind, query in members:
                _bench_once(segments, kind, query, mode, pool)
            elapsed = 0.0
            count = 0
            fp_total = 0
            batch_total = 0
            for _ in range(args.iterations):
                for kind, query in members:
                    t0 = time.perf_counter()
                    _, fp, total = _bench_once(segments, kind, query, mode, pool)
                    elapsed += time.perf_counter() - t0
                    count += 1
                    fp_total += fp
                    batch_total += total
            stats[mode] = (count / elapsed if elapsed else 0.0, elapsed / count,
                           fp_total / batch_total if batch_total else 0.0)
        sketch_qps, sketch_s, err = stats["sketch"]
        scan_qps, scan_s, _ = stats["scan"]
        rows.append({
            "class": cls,
            "queries": len(members),
            "sketch_qps": round(sketch_qps, 2),
            "scan_qps": round(scan_qps, 2),
            "speedup": round(sketch_qps / scan_qps, 2) if scan_qps else 0.0,
            "error_rate": round(err, 6),
        })
        fig_rows.append({"query": cls, "sketch_ms": sketch_s * 1000,
                         "scan_ms": scan_s * 1000})
    if pool is not None:
        pool.shutdown()
    if args.figures:
        from .report import render_bench_figure
        figdir = Path(args.figures)
        figdir.mkdir(parents=True, exist_ok=True)
        path = render_bench_figure(fig_rows, figdir / "bench.png")
        log.info("wrote %s", path)
    _emit(rows, ["class", "queries", "sketch_qps", "scan_qps", "speedup",
                 "error_rate"], args.json)
    return 0


# -- gen ----------------------------------------------------------------------

def cmd_gen(args) -> int:
    out = sys.stdout if args.output == "-" else open(args.output, "w")
    try:
        if args.queries:
            import random
            rng = random.Random(args.seed + 1)
            lines = list(corpus_mod.generate_lines(min(args.lines, 5000), args.seed))
            for term in corpus_mod.SAMPLE_TERMS:
                out.write(f"term\tterm\t{term}\n")
            for needle in corpus_mod.SAMPLE_NEEDLES:
                out.write(f"contains\tcontains\t{needle}\n")
            for _ in range(8):
                alien = "".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(16))
                out.write(f"id\tcontains\t{alien}\n")
            for _ in range(8):
                line = rng.choice(lines)
                start = rng.randrange(max(1, len(line) - 12))
                out.write(f"extract\tcontains\t{line[start:start + 10]}\n")
        else:
            for source, line in corpus_mod.generate(args.lines, args.seed):
                if args.sources:
                    out.write(f"{source}\t{line}\n")
                else:
                    out.write(line + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


# -- entry point ----------------------------------------------------------------

def _add_store_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags take precedence")
    p.add_argument("--capacity", type=int)
    p.add_argument("--batch-lines", dest="batch_lines", type=int)
    p.add_argument("--batch-bytes", dest="batch_bytes", type=int)
    p.add_argument("--signature-bits", dest="signature_bits", type=int)
    p.add_argument("--memory-limit", dest="memory_limit", type=int)
    p.add_argument("--sample-interval", dest="sample_interval", type=int)
    p.add_argument("--group-by-source", dest="group_by_source",
                   action="store_const", const=True)
    p.add_argument("--codec", choices=["zstd", "none"])
    p.add_argument("--zstd-level", dest="zstd_level", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynawarp",
                                     description="segmented log store with a "
                                                 "multi-membership sketch index")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build segments from newline-delimited logs")
    p.add_argument("input", help="log file, or - for stdin")
    p.add_argument("output", help="directory for segment-NNNN subdirectories")
    p.add_argument("--sources", action="store_true",
                   help="input lines are source_id<TAB>line")
    _add_store_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("query", help="search a segment or segment directory")
    p.add_argument("segment")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--term", help="whole-token query")
    g.add_argument("--contains", help="substring query")
    p.add_argument("--mode", choices=["sketch", "scan"], default="sketch")
    p.add_argument("--count-only", action="store_true")
    p.add_argument("--explain", action="store_true",
                   help="print plan and candidate stats to stderr")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("verify", help="check sketch soundness and dedup against "
                                      "an oracle rebuilt from the stored batches")
    p.add_argument("segment")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("stats", help="report segment sizes and sketch metrics")
    p.add_argument("segment")
    p.add_argument("--figures", help="directory for rendered PNG figures")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench", help="measure sketch vs scan query throughput")
    p.add_argument("segment")
    p.add_argument("--queries", required=True,
                   help="query file: class<TAB>term|contains<TAB>query")
    p.add_argument("--iterations", type=int, default=3)
    p.add_argument("--parallel", type=int, default=1,
                   help="query up to K segments concurrently")
    p.add_argument("--figures", help="directory for rendered PNG figures")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="emit a deterministic synthetic corpus")
    p.add_argument("output", help="file path, or - for stdout")
    p.add_argument("--lines", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sources", action="store_true",
                   help="emit source_id<TAB>line")
    p.add_argument("--queries", action="store_true",
                   help="emit a benchmark query file instead of log lines")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
