"""Entity-type-weighted candidate disease localization and residual merge."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

from .errors import ConfigError, MalformedRow
from .kg import KnowledgeGraph, normalize_name, one_hop_diseases
from .linking import DEFAULT_MIN_SIM, QuerySet, link_name
from .retrieval import Retriever
from .types import EntityType

KG = "KG"
LLM = "LLM"

DEFAULT_TOPM = 10

# Proportions of entity types in diagnostic evidence text.
DEFAULT_WEIGHTS = {
    EntityType.DIS: 0.1638,
    EntityType.PRO: 0.0043,
    EntityType.SYM: 0.6297,
    EntityType.DRU: 0.1391,
    EntityType.BOD: 0.0212,
    EntityType.ITE: 0.0372,
    EntityType.EQU: 0.0029,
    EntityType.MIC: 0.0009,
    EntityType.DEP: 0.0004,
}


@dataclass(frozen=True)
class TypeWeights:
    weights: Mapping[EntityType, float] = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))

    def __post_init__(self):
        missing = set(EntityType) - set(self.weights)
        if missing:
            raise ConfigError(f"missing weights for {sorted(t.value for t in missing)}")
        for t, w in self.weights.items():
            if not math.isfinite(w) or w < 0:
                raise ConfigError(f"weight for {t.value} must be finite and >= 0, got {w}")

    def __getitem__(self, etype: EntityType) -> float:
        return self.weights[etype]

    @classmethod
    def uniform(cls, value: float = 1.0) -> "TypeWeights":
        return cls({t: value for t in EntityType})

    @classmethod
    def load(cls, path: str | os.PathLike) -> "TypeWeights":
        """Read a ``type<TAB>weight`` file; all nine types are required."""
        weights: dict[EntityType, float] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                try:
                    weights[EntityType.parse(parts[0])] = float(parts[1])
                except (IndexError, ValueError):
                    raise MalformedRow(os.fspath(path), lineno, "expected type<TAB>weight") from None
        return cls(weights)

    def to_dict(self) -> dict[str, float]:
        return {t.value: self.weights[t] for t in EntityType}


@dataclass(frozen=True)
class CandidateDisease:
    name: str
    node: Optional[str] = None
    kg_score: float = 0.0
    path_score: float = 0.0
    origin: frozenset[str] = frozenset({KG})

    def __post_init__(self):
        if not self.origin or not self.origin <= {KG, LLM}:
            raise ValueError(f"bad origin {set(self.origin)}")
        if KG in self.origin and self.node is None:
            raise ValueError("KG-origin candidates need a node")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "node": self.node,
            "kg_score": self.kg_score,
            "path_score": self.path_score,
            "origin": sorted(self.origin),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CandidateDisease":
        return cls(d["name"], d.get("node"), float(d["kg_score"]), float(d["path_score"]),
                   frozenset(d["origin"]))


def disease_neighborhood(graph: KnowledgeGraph, node: str) -> set[str]:
    """Diseases one hop from ``node``, plus the node itself when it is a disease."""
    found = one_hop_diseases(graph, node)
    if graph.etype(node) is EntityType.DIS:
        found.add(node)
    return found


def kg_scores(query_set: QuerySet, graph: KnowledgeGraph, weights: TypeWeights) -> dict[str, float]:
    """Accumulated type weight per disease node over the whole query set."""
    credits: dict[str, list[float]] = {}
    for ent in query_set:
        w = weights[ent.etype]
        for d in disease_neighborhood(graph, ent.node):
            credits.setdefault(d, []).append(w)
    # fsum is correctly rounded, so scores do not depend on query order
    return {d: math.fsum(ws) for d, ws in credits.items()}


def localize_candidates(
    query_set: QuerySet,
    graph: KnowledgeGraph,
    weights: TypeWeights,
    topm: int = DEFAULT_TOPM,
) -> list[CandidateDisease]:
    """Top-``topm`` diseases by summed entity-type weight.

    Each linked entity credits its weight once to every disease in its 1-hop
    neighbourhood. Ties are broken by disease name, then node id.
    """
    if topm < 1:
        raise ValueError("topm must be >= 1")
    scores = kg_scores(query_set, graph, weights)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], graph.name(kv[0]), kv[0]))
    return [CandidateDisease(graph.name(d), d, s, 0.0, frozenset({KG})) for d, s in ranked[:topm]]


def merge_candidates(
    d_llm: Sequence[str],
    d_g: Iterable[CandidateDisease],
    graph: KnowledgeGraph,
    retriever: Retriever,
    min_sim: float = DEFAULT_MIN_SIM,
) -> list[CandidateDisease]:
    """Union of graph candidates and the LLM's direct predictions.

    Each predicted name is linked to a disease node if one clears ``min_sim``.
    A prediction landing on an existing graph candidate only adds the LLM flag.
    Otherwise it becomes a new candidate with ``kg_score`` 0, with or without
    a node. No prediction is dropped.
    """
    merged: list[CandidateDisease] = list(d_g)
    by_node = {c.node: i for i, c in enumerate(merged) if c.node is not None}
    by_name = {normalize_name(c.name): i for i, c in enumerate(merged) if c.node is None}
    for name in d_llm:
        if not name.strip():
            continue
        hit = link_name(name, graph, retriever, min_sim, etype=EntityType.DIS, strict_type=True)
        if hit is not None:
            node = hit[0]
            if node in by_node:
                i = by_node[node]
                merged[i] = replace(merged[i], origin=merged[i].origin | {LLM})
            else:
                by_node[node] = len(merged)
                merged.append(CandidateDisease(graph.name(node), node, 0.0, 0.0, frozenset({LLM})))
        else:
            key = normalize_name(name)
            if key not in by_name:
                by_name[key] = len(merged)
                merged.append(CandidateDisease(name.strip(), None, 0.0, 0.0, frozenset({LLM})))
    return merged
