"""Path-based reranking: score candidates by summed inverse hop distance to the query entities."""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Optional, Sequence

from .kg import DEFAULT_CUTOFF, KnowledgeGraph
from .linking import QuerySet
from .localization import LLM, CandidateDisease

SELF_CONTRIBUTION = 2.0


def contribution(dist: Optional[int]) -> float:
    """1/dist; unreachable -> 0; dist 0 (the disease is itself a query entity) -> 2."""
    if dist is None:
        return 0.0
    if dist == 0:
        return SELF_CONTRIBUTION
    return 1.0 / dist


class DistanceCache:
    """Memo of (disease node, entity node) hop distances for one cutoff.

    ``computed`` counts actual graph searches. Reconstruction checks that it
    stays flat when rerank has already filled the cache.
    """

    def __init__(self, graph: KnowledgeGraph, cutoff: int = DEFAULT_CUTOFF):
        self.graph = graph
        self.cutoff = cutoff
        self._d: dict[tuple[str, str], Optional[int]] = {}
        self._lock = threading.Lock()
        self.computed = 0

    def __contains__(self, pair: tuple[str, str]) -> bool:
        return pair in self._d

    def get(self, disease: str, entity: str) -> Optional[int]:
        key = (disease, entity)
        if key in self._d:
            return self._d[key]
        g = self.graph
        dist = g.hop_distance(g.index_of(disease), g.index_of(entity), self.cutoff)
        with self._lock:
            self._d[key] = dist
            self.computed += 1
        return dist


def path_score(
    disease_node: str,
    query_set: QuerySet,
    graph: KnowledgeGraph,
    cutoff: int = DEFAULT_CUTOFF,
    cache: Optional[DistanceCache] = None,
) -> float:
    graph.index_of(disease_node)  # raises UnknownNode
    if cache is None:
        cache = DistanceCache(graph, cutoff)
    return math.fsum(contribution(cache.get(disease_node, e.node)) for e in query_set)


def rerank_candidates(
    d_can: Sequence[CandidateDisease],
    query_set: QuerySet,
    graph: KnowledgeGraph,
    topn: int = 3,
    cutoff: int = DEFAULT_CUTOFF,
    *,
    enabled: bool = True,
    cache: Optional[DistanceCache] = None,
    workers: int = 1,
) -> list[CandidateDisease]:
    """Keep the ``topn`` node-linked candidates, then append LLM predictions that missed the cut.

    Linked candidates sort by path score, then kg_score, then name. With
    ``enabled=False`` they sort by kg_score alone and no path scores are
    computed. LLM-origin candidates outside the top ``topn`` follow in rank
    order, and node-less LLM candidates come last with path score 0.
    """
    if topn < 1:
        raise ValueError("topn must be >= 1")
    if cache is None:
        cache = DistanceCache(graph, cutoff)
    linked = [c for c in d_can if c.node is not None]
    nodeless = [replace(c, path_score=0.0) for c in d_can if c.node is None]

    if enabled:
        def score(c: CandidateDisease) -> CandidateDisease:
            return replace(c, path_score=path_score(c.node, query_set, graph, cutoff, cache))

        if workers > 1 and len(linked) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                scored = list(pool.map(score, linked))
        else:
            scored = [score(c) for c in linked]
        ranked = sorted(scored, key=lambda c: (-c.path_score, -c.kg_score, c.name, c.node))
    else:
        ranked = sorted(linked, key=lambda c: (-c.kg_score, c.name, c.node))

    head = ranked[:topn]
    spill = [c for c in ranked[topn:] if LLM in c.origin]
    return head + spill + nodeless
