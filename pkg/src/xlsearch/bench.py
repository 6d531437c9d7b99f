"""Index benchmark: memory growth and query latency on a synthetic corpus.

Generates templated arithmetic formulas over a fixed 50-function
vocabulary (seeded, so the corpus for a smaller size is a prefix of the
corpus for a larger one), builds indexes at several sizes, and measures
the memory estimate plus the latency of a fixed query set at each size.
Results go to CSV files and matplotlib figures under an output
directory; the returned summary carries the linear-fit R-squared and
the latency medians.
"""

from __future__ import annotations

import csv
import statistics
import time
from pathlib import Path
from random import Random

from .index import SubstitutionIndex
from .terms import (Apply, IndexVar, Num, QVar, SymbolTable,
                    load_symbol_table, renumber_vars)

__all__ = [
    "FUNCTION_VOCAB",
    "synth_corpus",
    "queries_from_corpus",
    "run_benchmark",
]

# Fifty common functions; heads for the synthetic call templates.
FUNCTION_VOCAB = (
    "SUM", "AVERAGE", "MIN", "MAX", "COUNT", "COUNTA", "COUNTIF", "SUMIF",
    "PRODUCT", "ABS", "SQRT", "POWER", "EXP", "LN", "LOG", "LOG10", "MOD",
    "ROUND", "ROUNDUP", "ROUNDDOWN", "INT", "TRUNC", "CEILING", "FLOOR",
    "MEDIAN", "STDEV", "VAR", "LARGE", "SMALL", "RANK", "IF", "AND", "OR",
    "NOT", "VLOOKUP", "HLOOKUP", "MATCH", "INDEX", "OFFSET", "CHOOSE",
    "LEFT", "RIGHT", "MID", "LEN", "CONCATENATE", "NPV", "PMT", "FV", "PV",
    "RATE",
)

_BINARY_OPS = ("+", "-", "*", "/", "^")


def _rand_node(rng: Random, table: SymbolTable, depth: int):
    if depth <= 0 or rng.random() < 0.3:
        if rng.random() < 0.7:
            return IndexVar(rng.randrange(6))
        return Num(str(rng.randrange(1, 100)))
    if rng.random() < 0.55:
        head = table.lookup(rng.choice(_BINARY_OPS))
        return Apply(head, (_rand_node(rng, table, depth - 1),
                            _rand_node(rng, table, depth - 1)))
    head = table.lookup(rng.choice(FUNCTION_VOCAB))
    arity = rng.randrange(1, 4)
    return Apply(head, tuple(_rand_node(rng, table, depth - 1)
                             for _ in range(arity)))


def _selector(rng: Random, table: SymbolTable):
    # two bounded constants under one operator: selective enough to keep
    # answer sets small, common enough that some terms still intern
    head = table.lookup(rng.choice(_BINARY_OPS))
    return Apply(head, (Num(str(rng.randrange(1, 61))),
                        Num(str(rng.randrange(1, 61)))))


def synth_corpus(n: int, seed: int, table: SymbolTable) -> list:
    """n synthetic variablized terms; generation is sequential and
    seeded, so corpora of different sizes share a prefix.

    Every term is a vocabulary call whose first argument is a concrete
    arithmetic selector. A query derived from a term therefore keeps a
    concrete spine and its answer set stays small as the corpus grows,
    which lets the latency benchmark measure index scale rather than
    answer-set materialization."""
    rng = Random(seed)
    terms = []
    for _ in range(n):
        head = table.lookup(rng.choice(FUNCTION_VOCAB))
        args = [_selector(rng, table)]
        for _ in range(rng.randrange(0, 3)):
            args.append(_rand_node(rng, table, 2))
        terms.append(renumber_vars(Apply(head, tuple(args))))
    return terms


def queries_from_corpus(terms, count: int, seed: int, pool: int = 10_000) -> list:
    """Fixed query set: sampled corpus terms with index variables turned
    into query variables; concrete leaves are kept."""
    rng = Random(seed)
    pool = min(pool, len(terms))
    queries = []
    for _ in range(count):
        term = terms[rng.randrange(pool)]

        def generalize(t):
            if isinstance(t, IndexVar):
                return QVar(f"v{t.id}")
            if isinstance(t, Apply):
                return Apply(t.head, tuple(generalize(a) for a in t.args))
            return t

        queries.append(generalize(term))
    return queries


def _fit_r_squared(xs, ys) -> float:
    import numpy as np

    if len(xs) < 2:
        return 1.0  # a line through one point is exact
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    ss_res = float(np.sum(residuals ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0
    return 1.0 - ss_res / ss_tot


def _save_memory_figure(rows, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    sizes = [r["insertions"] for r in rows]
    mbytes = [r["approxBytes"] / 1e6 for r in rows]

    fig, ax = plt.subplots(figsize=(6, 4))
    if len(sizes) >= 2:
        slope, intercept = np.polyfit(sizes, mbytes, 1)
        grid = np.linspace(0, max(sizes) * 1.05, 50)
        ax.plot(grid, slope * grid + intercept, "--", color="gray", label="linear fit")
    ax.plot(sizes, mbytes, "o", color="tab:blue", label="measured")
    ax.set_xlabel("insertions")
    ax.set_ylabel("estimated size (MB)")
    ax.set_title("Index memory vs. corpus size")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _save_latency_figure(latencies, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    sizes = sorted(latencies)
    data = [latencies[s] for s in sizes]

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.boxplot(data, tick_labels=[f"{s:,}" for s in sizes], showfliers=False)
    ax.set_xlabel("index size (terms inserted)")
    ax.set_ylabel("query latency (ms)")
    ax.set_title("Query latency by index size")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def run_benchmark(sizes=(10_000, 50_000, 100_000), query_count: int = 100,
                  seed: int = 7, out_dir=None, table: SymbolTable | None = None) -> dict:
    """Build indexes at each size, run the shared query set, and
    summarize. With `out_dir` set, writes bench_sizes.csv,
    bench_queries.csv, fig_memory.png, and fig_latency.png there."""
    if table is None:
        table = load_symbol_table(dialect="excel")
    sizes = tuple(sorted(sizes))
    corpus = synth_corpus(max(sizes), seed, table)
    queries = queries_from_corpus(corpus, query_count, seed + 1)

    rows = []
    latencies: dict[int, list[float]] = {}
    for size in sizes:
        index = SubstitutionIndex()
        for i in range(size):
            index.insert(corpus[i], f"synthetic://corpus/{i}")
        stats = index.stats()
        lat = []
        for q in queries:
            t0 = time.perf_counter()
            index.query(q)
            lat.append((time.perf_counter() - t0) * 1000.0)
        latencies[size] = lat
        rows.append({
            "insertions": size,
            "termCount": stats["termCount"],
            "postingCount": stats["postingCount"],
            "tokenCount": stats["tokenCount"],
            "approxBytes": stats["approxBytes"],
            "medianMs": round(statistics.median(lat), 4),
            "meanMs": round(statistics.fmean(lat), 4),
        })

    r_squared = _fit_r_squared([r["insertions"] for r in rows],
                               [r["approxBytes"] for r in rows])
    medians = {size: statistics.median(lats) for size, lats in latencies.items()}
    ratio = medians[max(sizes)] / medians[min(sizes)] if medians[min(sizes)] > 0 else 0.0

    summary = {
        "sizes": list(sizes),
        "queryCount": query_count,
        "seed": seed,
        "memoryFitRSquared": round(r_squared, 6),
        "medianLatencyMs": {str(s): round(m, 4) for s, m in medians.items()},
        "latencyRatioLargestToSmallest": round(ratio, 4),
        "rows": rows,
    }

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "bench_sizes.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        with open(out / "bench_queries.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["indexSize", "queryNumber", "latencyMs"])
            for size in sizes:
                for qnum, ms in enumerate(latencies[size]):
                    writer.writerow([size, qnum, round(ms, 4)])
        _save_memory_figure(rows, out / "fig_memory.png")
        _save_latency_figure(latencies, out / "fig_latency.png")
        summary["files"] = sorted(p.name for p in out.iterdir())

    return summary
