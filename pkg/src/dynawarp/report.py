"""Figure rendering for benchmark and stats reports.

Matplotlib is imported lazily with the Agg backend so the CLI works on
headless machines and pays nothing when figures are not requested.
"""

from __future__ import annotations

from pathlib import Path


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_bench_figure(rows: list[dict], path: str | Path) -> Path:
    """Bar chart of per-query latency, sketch path vs full scan."""
    plt = _pyplot()
    path = Path(path)
    labels = [r["query"] for r in rows]
    sketch_ms = [r["sketch_ms"] for r in rows]
    scan_ms = [r["scan_ms"] for r in rows]
    x = range(len(rows))
    fig, ax = plt.subplots(figsize=(max(6, len(rows) * 0.9), 4.5))
    ax.bar([i - 0.2 for i in x], sketch_ms, width=0.4, label="sketch")
    ax.bar([i + 0.2 for i in x], scan_ms, width=0.4, label="scan")
    ax.set_yscale("log")
    ax.set_ylabel("latency (ms, log scale)")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=35, ha="right", fontsize=8)
    ax.legend()
    ax.set_title("query latency: sketch pruning vs full scan")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_stats_figure(cardinalities: list[int], section_sizes: dict[str, int],
                        path: str | Path) -> Path:
    """Posting-list cardinality histogram plus on-disk section breakdown."""
    plt = _pyplot()
    path = Path(path)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.5))
    if cardinalities:
        ax1.hist(cardinalities, bins=min(50, max(cardinalities)), log=True)
    ax1.set_xlabel("postings per list")
    ax1.set_ylabel("lists (log scale)")
    ax1.set_title("posting list cardinality")
    names = list(section_sizes)
    sizes = [section_sizes[n] for n in names]
    ax2.barh(names, sizes)
    ax2.set_xlabel("bytes")
    ax2.set_title("sketch section sizes")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
