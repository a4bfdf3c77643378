"""Load a large synthetic graph and time a batch of bounded shortest-path queries.

    python3 scripts/scale_check.py --nodes 1000000 --edges 4000000 --queries 10000
"""

from __future__ import annotations

import argparse
import resource
import tempfile
import time
from pathlib import Path

import numpy as np

from medikal.kg import load_graph
from medikal.synthetic import write_synthetic_graph


def run(n_nodes: int, n_edges: int, n_queries: int, cutoff: int = 4, workdir: str | None = None,
        seed: int = 0) -> dict:
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        t0 = time.perf_counter()
        nodes, edges = write_synthetic_graph(Path(tmp), n_nodes, n_edges, seed)
        gen_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        graph = load_graph(nodes, edges)
        load_s = time.perf_counter() - t0
    rng = np.random.default_rng(seed + 1)
    pairs = rng.integers(0, n_nodes, size=(n_queries, 2)).tolist()
    t0 = time.perf_counter()
    found = sum(graph.hop_distance(a, b, cutoff) is not None for a, b in pairs)
    query_s = time.perf_counter() - t0
    return {
        "nodes": len(graph), "edges": graph.edge_count, "generate_s": gen_s, "load_s": load_s,
        "queries": n_queries, "query_s": query_s, "reachable": found,
        "peak_rss_mb": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024,
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=1_000_000)
    ap.add_argument("--edges", type=int, default=4_000_000)
    ap.add_argument("--queries", type=int, default=10_000)
    ap.add_argument("--cutoff", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    stats = run(args.nodes, args.edges, args.queries, args.cutoff, seed=args.seed)
    for k, v in stats.items():
        print(f"{k:>12}: {v:.2f}" if isinstance(v, float) else f"{k:>12}: {v}")


if __name__ == "__main__":
    main()
