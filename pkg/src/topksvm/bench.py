"""Projection scaling benchmark.

Times the plain knapsack projection (standard simplex: bounds [0, 1], sum 1)
against the top-k simplex projection on standard normal inputs, per
(dimension, k) pair.  Reported seconds are totals over all samples; input
generation happens outside the timed sections and is chunked so the largest
dimensions never materialise the full sample set at once.
"""

import time
from dataclasses import dataclass

import numpy as np

from .projections import TopKSimplexSpec, project_knapsack, project_topk_simplex

METHODS = ("knapsack", "topk_simplex")


@dataclass(frozen=True)
class BenchRow:
    dim: int
    k: int
    method: str
    seconds: float


def run_projection_benchmark(dims, ks, samples, seed, progress=None):
    """Time both projections on ``samples`` standard normal vectors per config.

    Returns a list of :class:`BenchRow`, two per (dim, k) pair.  ``progress``
    is an optional callable receiving status strings.
    """
    dims = [int(d) for d in dims]
    ks = [int(k) for k in ks]
    if any(d < 1 for d in dims) or any(k < 1 for k in ks):
        raise ValueError("dims and ks must be positive")
    if samples < 1:
        raise ValueError("samples must be positive")
    rows = []
    for dim in dims:
        for k in ks:
            if k > dim:
                continue
            spec = TopKSimplexSpec(k, 1.0, 0.0)
            rng = np.random.default_rng(seed)
            chunk = max(1, min(samples, 8_000_000 // dim))
            knap_total = 0.0
            simplex_total = 0.0
            done = 0
            while done < samples:
                cols = min(chunk, samples - done)
                A = rng.standard_normal((dim, cols))
                for j in range(cols):
                    a = A[:, j]
                    t0 = time.perf_counter()
                    project_knapsack(a, 0.0, 1.0, 1.0)
                    t1 = time.perf_counter()
                    project_topk_simplex(a, spec)
                    t2 = time.perf_counter()
                    knap_total += t1 - t0
                    simplex_total += t2 - t1
                done += cols
            rows.append(BenchRow(dim, k, "knapsack", knap_total))
            rows.append(BenchRow(dim, k, "topk_simplex", simplex_total))
            if progress is not None:
                progress(
                    f"dim={dim} k={k}: knapsack {knap_total:.3f}s, "
                    f"topk_simplex {simplex_total:.3f}s"
                )
    return rows


def rows_to_csv(rows):
    """Render benchmark rows as CSV text with a stable header."""
    lines = ["dim,k,method,seconds"]
    lines += [f"{r.dim},{r.k},{r.method},{r.seconds:.9f}" for r in rows]
    return "\n".join(lines) + "\n"
