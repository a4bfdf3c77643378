"""Random graph files for load and query benchmarks."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .types import EntityType

_TAGS = [t.value for t in EntityType]


def write_synthetic_graph(directory: str | os.PathLike, n_nodes: int, n_edges: int,
                          seed: int = 0, n_labels: int = 40, chunk: int = 500_000) -> tuple[Path, Path]:
    """Write ``nodes.tsv``/``edges.tsv`` with uniformly random types and endpoints."""
    rng = np.random.default_rng(seed)
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    nodes, edges = out / "nodes.tsv", out / "edges.tsv"
    with open(nodes, "w", encoding="utf-8") as fh:
        for lo in range(0, n_nodes, chunk):
            hi = min(lo + chunk, n_nodes)
            tags = rng.integers(0, len(_TAGS), hi - lo).tolist()
            fh.write("".join(f"n{i}\tname {i}\t{_TAGS[t]}\n" for i, t in zip(range(lo, hi), tags)))
    with open(edges, "w", encoding="utf-8") as fh:
        for lo in range(0, n_edges, chunk):
            k = min(chunk, n_edges - lo)
            h = rng.integers(0, n_nodes, k).tolist()
            t = rng.integers(0, n_nodes, k).tolist()
            lab = rng.integers(0, n_labels, k).tolist()
            fh.write("".join(f"n{a}\trel{l}\tn{b}\n" for a, l, b in zip(h, lab, t)))
    return nodes, edges
