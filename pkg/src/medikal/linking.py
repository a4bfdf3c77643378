"""Entity extraction and entity-to-node linking."""

from __future__ import annotations

import logging
import os
import urllib.error
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Mapping, Optional, Protocol

import numpy as np

from .errors import ExtractorUnavailable, MalformedRow
from .kg import KnowledgeGraph, normalize_name
from .records import SummaryReport, is_none_text
from .retrieval import Retriever, post_json
from .types import FIELD_ASPECTS, TYPE_CODES, AspectCategory, EntityType

log = logging.getLogger(__name__)

DEFAULT_MIN_SIM = 0.5


@dataclass(frozen=True)
class ExtractedEntity:
    surface: str
    etype: EntityType
    aspect: Optional[AspectCategory] = None
    span: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if not self.surface.strip():
            raise ValueError("entity surface must be non-empty")


@dataclass(frozen=True)
class LinkedEntity:
    entity: ExtractedEntity
    node: str
    similarity: float

    @property
    def surface(self) -> str:
        return self.entity.surface

    @property
    def etype(self) -> EntityType:
        return self.entity.etype

    @property
    def aspect(self) -> Optional[AspectCategory]:
        return self.entity.aspect


@dataclass(frozen=True)
class QuerySet:
    """Linked query entities, one per graph node, in first-seen order."""

    entities: tuple[LinkedEntity, ...] = ()
    unlinked: tuple[ExtractedEntity, ...] = ()

    def __iter__(self) -> Iterator[LinkedEntity]:
        return iter(self.entities)

    def __len__(self) -> int:
        return len(self.entities)

    def nodes(self) -> list[str]:
        return [e.node for e in self.entities]


class Extractor(Protocol):
    def extract(self, text: str) -> list[ExtractedEntity]: ...


# -- gazetteer ---------------------------------------------------------------


def _is_word_char(c: str) -> bool:
    return c.isascii() and c.isalnum()


def _fold_text(text: str) -> tuple[str, list[int]]:
    """Lower-case and collapse whitespace, keeping a map back to original offsets."""
    out: list[str] = []
    pos: list[int] = []
    prev_space = False
    for i, c in enumerate(text):
        if c.isspace():
            if prev_space or not out:
                continue
            out.append(" ")
            pos.append(i)
            prev_space = True
            continue
        prev_space = False
        low = c.lower()
        out.append(low if len(low) == 1 else c)
        pos.append(i)
    return "".join(out), pos


class GazetteerExtractor:
    """Dictionary extractor: leftmost-longest matching over case-folded text.

    Matches may not start or end inside an ASCII word ("ear" does not fire in
    "fear"). Non-ASCII scripts are matched character by character.
    """

    def __init__(self, entries: Mapping[str, EntityType], min_len: int = 2):
        self.entries: dict[str, EntityType] = {}
        for surface, etype in entries.items():
            key = normalize_name(surface)
            if len(key) >= min_len:
                self.entries.setdefault(key, EntityType(etype))
        self.max_len = max((len(k) for k in self.entries), default=0)

    @classmethod
    def from_graph(cls, graph: KnowledgeGraph, extra: Optional[Mapping[str, EntityType]] = None,
                   min_len: int = 2) -> "GazetteerExtractor":
        entries: dict[str, EntityType] = {}
        # user dictionary first so it wins on conflicting types
        for surface, etype in (extra or {}).items():
            entries.setdefault(normalize_name(surface), etype)
        for node in graph.nodes():
            entries.setdefault(normalize_name(node.name), node.etype)
        return cls(entries, min_len=min_len)

    def extract(self, text: str) -> list[ExtractedEntity]:
        folded, pos = _fold_text(text)
        found: list[ExtractedEntity] = []
        i, n = 0, len(folded)
        while i < n:
            if i > 0 and _is_word_char(folded[i - 1]) and _is_word_char(folded[i]):
                i += 1
                continue
            hit = None
            for length in range(min(self.max_len, n - i), 0, -1):
                cand = folded[i:i + length]
                etype = self.entries.get(cand)
                if etype is None:
                    continue
                end = i + length
                if end < n and _is_word_char(folded[end]) and _is_word_char(cand[-1]):
                    continue
                hit = (length, etype)
                break
            if hit is None:
                i += 1
                continue
            length, etype = hit
            start, stop = pos[i], pos[i + length - 1] + 1
            found.append(ExtractedEntity(text[start:stop], etype, span=(start, stop)))
            i += length
        return found


def load_gazetteer(path: str | os.PathLike) -> dict[str, EntityType]:
    """Read a ``surface<TAB>type`` dictionary file."""
    entries: dict[str, EntityType] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip():
                raise MalformedRow(os.fspath(path), lineno, "expected surface<TAB>type")
            try:
                entries.setdefault(parts[0], EntityType.parse(parts[1]))
            except ValueError:
                raise MalformedRow(os.fspath(path), lineno, f"unknown type {parts[1]!r}") from None
    return entries


class HttpExtractor:
    """Client for an external NER service.

    Request ``{"text": ...}``; reply ``{"entities": [{"surface", "type", "start", "end"}]}``.
    Entities with unknown type tags are skipped.
    """

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def extract(self, text: str) -> list[ExtractedEntity]:
        try:
            reply = post_json(self.url, {"text": text}, self.timeout)
            raw = reply["entities"]
        except (urllib.error.URLError, OSError, ValueError, KeyError, TypeError) as exc:
            raise ExtractorUnavailable(f"NER service at {self.url} failed: {exc}") from exc
        out = []
        for item in raw:
            try:
                etype = EntityType.parse(str(item["type"]))
            except (KeyError, ValueError):
                log.warning("skipping entity with unknown type: %r", item)
                continue
            surface = str(item.get("surface", "")).strip()
            if not surface:
                continue
            span = (int(item["start"]), int(item["end"])) if "start" in item and "end" in item else None
            out.append(ExtractedEntity(surface, etype, span=span))
        return out


def extract_entities(text: str, extractor: Extractor) -> list[ExtractedEntity]:
    """Run the extractor and drop repeats of (normalised surface, type), keeping first appearance."""
    if not text or not text.strip():
        return []
    seen: set[tuple[str, EntityType]] = set()
    out = []
    for ent in extractor.extract(text):
        key = (normalize_name(ent.surface), ent.etype)
        if key not in seen:
            seen.add(key)
            out.append(ent)
    return out


# -- linking -----------------------------------------------------------------


def best_candidate(scores: np.ndarray, graph: KnowledgeGraph,
                   subset: Optional[np.ndarray] = None) -> Optional[tuple[int, float]]:
    """Argmax over ``scores`` (optionally restricted to ``subset`` indices).

    Ties go to the lexicographically smallest name, then the smallest id.
    """
    idx = np.arange(len(scores)) if subset is None else subset
    if not len(idx):
        return None
    vals = scores[idx]
    top = vals.max()
    tied = idx[vals == top].tolist()
    best = min(tied, key=lambda i: (graph.names[i], graph.ids[i]))
    return best, float(top)


def link_name(
    text: str,
    graph: KnowledgeGraph,
    retriever: Retriever,
    min_sim: float = DEFAULT_MIN_SIM,
    etype: Optional[EntityType] = None,
    strict_type: bool = False,
) -> Optional[tuple[str, float]]:
    """Link free text to a node id.

    With ``etype`` set, nodes of that type are tried first. Other nodes are
    considered only if no same-type node clears ``min_sim``, and never when
    ``strict_type`` is set.
    """
    if not len(graph):
        return None
    scores = retriever.score(text, graph.names)
    if etype is not None:
        same = np.flatnonzero(graph.type_codes == TYPE_CODES[etype])
        hit = best_candidate(scores, graph, same)
        if hit is not None and hit[1] >= min_sim:
            return graph.ids[hit[0]], hit[1]
        if strict_type:
            return None
    hit = best_candidate(scores, graph)
    if hit is None or hit[1] < min_sim:
        return None
    return graph.ids[hit[0]], hit[1]


def link_entity(
    entity: ExtractedEntity,
    graph: KnowledgeGraph,
    retriever: Retriever,
    min_sim: float = DEFAULT_MIN_SIM,
) -> Optional[LinkedEntity]:
    """Link an extracted mention to its most similar graph node, or return None below ``min_sim``."""
    hit = link_name(entity.surface, graph, retriever, min_sim, etype=entity.etype)
    if hit is None:
        return None
    return LinkedEntity(entity, hit[0], hit[1])


def build_query_set(
    summary: SummaryReport,
    graph: KnowledgeGraph,
    extractor: Extractor,
    retriever: Retriever,
    min_sim: float = DEFAULT_MIN_SIM,
) -> QuerySet:
    """Extract and link entities from every summary field.

    Each entity is tagged with the aspect of the field it came from. When two
    mentions land on the same node, the more similar link is kept and stays at
    the position where the node was first seen.
    """
    by_node: dict[str, LinkedEntity] = {}
    unlinked: list[ExtractedEntity] = []
    for field_name, text in summary.items():
        if is_none_text(text):
            continue
        aspect = FIELD_ASPECTS[field_name]
        for ent in extract_entities(text, extractor):
            ent = replace(ent, aspect=aspect)
            linked = link_entity(ent, graph, retriever, min_sim)
            if linked is None:
                log.info("no graph node above %.2f for %r", min_sim, ent.surface)
                unlinked.append(ent)
                continue
            prev = by_node.get(linked.node)
            if prev is None or linked.similarity > prev.similarity:
                by_node[linked.node] = linked
    return QuerySet(tuple(by_node.values()), tuple(unlinked))


def dedupe_linked(entities: Iterable[LinkedEntity]) -> QuerySet:
    """Collapse entities onto distinct nodes (highest similarity wins)."""
    by_node: dict[str, LinkedEntity] = {}
    for le in entities:
        prev = by_node.get(le.node)
        if prev is None or le.similarity > prev.similarity:
            by_node[le.node] = le
    return QuerySet(tuple(by_node.values()))

