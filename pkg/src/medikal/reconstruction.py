"""Regroup per-disease graph findings into aspect buckets and render them as prompt text."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .kg import DEFAULT_CUTOFF, KnowledgeGraph
from .linking import QuerySet
from .localization import CandidateDisease
from .rerank import DistanceCache
from .types import AspectCategory

NO_FINDINGS = "no related findings"


@dataclass(frozen=True)
class EvidenceItem:
    surface: str
    node: str
    distance: Optional[int]
    relation: Optional[str] = None
    similarity: float = 1.0

    def to_dict(self) -> dict:
        return {
            "surface": self.surface,
            "node": self.node,
            "distance": self.distance,
            "relation": self.relation,
            "similarity": self.similarity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvidenceItem":
        return cls(d["surface"], d["node"], d["distance"], d.get("relation"), d.get("similarity", 1.0))


@dataclass(frozen=True)
class DiseaseEvidence:
    disease: CandidateDisease
    per_aspect: dict[AspectCategory, tuple[EvidenceItem, ...]]

    def items(self) -> list[EvidenceItem]:
        return [it for a in AspectCategory for it in self.per_aspect[a]]

    def to_dict(self) -> dict:
        return {
            "disease": self.disease.to_dict(),
            "per_aspect": {a.value: [it.to_dict() for it in self.per_aspect[a]] for a in AspectCategory},
        }


def collect_evidence(
    candidate: CandidateDisease,
    query_set: QuerySet,
    graph: KnowledgeGraph,
    cutoff: int = DEFAULT_CUTOFF,
    cache: Optional[DistanceCache] = None,
) -> DiseaseEvidence:
    """Bucket every query entity by aspect with its hop distance to the candidate.

    Distances come from ``cache`` when rerank has already computed them. For
    one-hop pairs the alphabetically first connecting relation label is kept.
    Node-less candidates get ``None`` (unreachable) everywhere.
    """
    if cache is None:
        cache = DistanceCache(graph, cutoff)
    buckets: dict[AspectCategory, list[EvidenceItem]] = {a: [] for a in AspectCategory}
    for ent in query_set:
        aspect = ent.aspect or AspectCategory.MAIN_SYMPTOMS
        if candidate.node is None:
            dist, rel = None, None
        else:
            dist = cache.get(candidate.node, ent.node)
            rel = None
            if dist == 1:
                labels = graph.relation_labels(candidate.node, ent.node)
                rel = labels[0] if labels else None
        buckets[aspect].append(EvidenceItem(ent.surface, ent.node, dist, rel, ent.similarity))
    return DiseaseEvidence(candidate, {a: tuple(v) for a, v in buckets.items()})


def render_item(item: EvidenceItem, disease: str) -> str:
    if item.distance == 1 and item.relation:
        link = item.relation
    elif item.distance is None:
        link = "dist=inf"
    else:
        link = f"dist={item.distance}"
    return f"{item.surface} --{link}--> {disease}"


def render_evidence(evidence: DiseaseEvidence) -> dict[AspectCategory, str]:
    """One text block per aspect, one arrow line per item."""
    name = evidence.disease.name
    out = {}
    for aspect in AspectCategory:
        items = evidence.per_aspect.get(aspect, ())
        out[aspect] = "\n".join(render_item(it, name) for it in items) if items else NO_FINDINGS
    return out
