"""Wall-clock scaling of transition precompute + walk generation on ER graphs."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from txembed import walker
from txembed.evalbench.synth import gen_er_graph


@dataclass(frozen=True)
class BenchRow:
    n: int
    edges: int
    mean_seconds: float
    median_seconds: float
    trials: int


@dataclass(frozen=True)
class BenchResult:
    rows: list[BenchRow]
    slope: float

    def to_csv(self) -> str:
        lines = ["n,edges,mean_seconds,median_seconds,trials"]
        lines += [f"{r.n},{r.edges},{r.mean_seconds!r},{r.median_seconds!r},{r.trials}" for r in self.rows]
        return "\n".join(lines) + "\n"


def loglog_slope(sizes, seconds) -> float:
    """Least-squares slope of log(seconds) against log(size)."""
    return float(np.polyfit(np.log(np.asarray(sizes, float)), np.log(np.asarray(seconds, float)), 1)[0])


def scalability_bench(sizes: Sequence[int], trials: int = 3, avg_degree: float = 6.0,
                      cfg: walker.WalkConfig | None = None, seed: int = 0,
                      threads: int = 1) -> BenchResult:
    """Time precompute + corpus generation per size; graph generation is not timed."""
    sizes = [int(n) for n in sizes]
    if len(sizes) < 2 or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be ascending with at least two entries")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    cfg = cfg or walker.WalkConfig()
    # compile the kernels outside the timed region
    warm = gen_er_graph(20, 3, seed)
    walker.generate_corpus(warm, cfg, walker.precompute_transitions(warm, cfg), threads)
    rows = []
    for n in sizes:
        times = []
        edges = 0
        for t in range(trials):
            g = gen_er_graph(n, avg_degree, seed + t)
            edges = g.num_edges
            t0 = time.perf_counter()
            table = walker.precompute_transitions(g, cfg)
            walker.generate_corpus(g, cfg, table, threads)
            times.append(time.perf_counter() - t0)
        rows.append(BenchRow(n, edges, float(np.mean(times)), float(np.median(times)), trials))
    return BenchResult(rows, loglog_slope(sizes, [r.mean_seconds for r in rows]))
