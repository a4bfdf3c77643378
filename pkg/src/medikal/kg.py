"""Immutable typed knowledge graph.

Nodes and edges are read once from TSV and packed into a CSR adjacency
(``indptr``/``nbr`` arrays) that stores every edge in both directions. All
queries treat the graph as undirected; the stored direction flag only matters
for rendering evidence.
"""

from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Iterator, Optional, Union

import numpy as np

from .errors import DanglingEdge, DuplicateNodeId, MalformedRow, UnknownEntityType, UnknownNode
from .types import TYPE_CODES, TYPES_BY_CODE, EntityType

DEFAULT_CUTOFF = 4

Source = Union[str, os.PathLike, bytes, BinaryIO]

_WS = re.compile(r"\s+")


def normalize_name(name: str) -> str:
    """Case-fold, trim and collapse internal whitespace."""
    return _WS.sub(" ", name.strip()).casefold()


@dataclass(frozen=True)
class EntityNode:
    id: str
    name: str
    etype: EntityType


@dataclass(frozen=True)
class Relation:
    head: str
    label: str
    tail: str


class KnowledgeGraph:
    """Typed graph with O(1) id/name lookup and CSR neighbourhoods.

    Build it with :func:`load_graph` or :meth:`from_triples`; instances are not
    meant to be mutated afterwards (the numpy arrays are flagged read-only).
    """

    def __init__(
        self,
        ids: list[str],
        names: list[str],
        type_codes: np.ndarray,
        heads: np.ndarray,
        labels: np.ndarray,
        tails: np.ndarray,
        label_vocab: list[str],
    ):
        n = len(ids)
        self.ids: tuple[str, ...] = tuple(ids)
        self.names: tuple[str, ...] = tuple(names)
        self.type_codes = np.asarray(type_codes, dtype=np.int8)
        self.label_vocab: tuple[str, ...] = tuple(label_vocab)
        self._index = {nid: i for i, nid in enumerate(self.ids)}

        name_index: dict[str, str] = {}
        for nid, name in zip(self.ids, self.names):
            name_index.setdefault(normalize_name(name), nid)
        self.name_index = name_index

        heads, labels, tails = _dedup_edges(heads, labels, tails, n, len(label_vocab))
        self.edge_heads, self.edge_labels, self.edge_tails = heads, labels, tails

        # Both directions of every edge go into the CSR arrays.
        src = np.concatenate([heads, tails])
        dst = np.concatenate([tails, heads])
        lab = np.concatenate([labels, labels])
        outgoing = np.concatenate([np.ones(len(heads), bool), np.zeros(len(heads), bool)])
        order = np.lexsort((dst, src))
        self.nbr = dst[order].astype(np.int32)
        self.nbr_label = lab[order].astype(np.int32)
        self.nbr_out = outgoing[order]
        counts = np.bincount(src, minlength=n) if n else np.zeros(0, np.int64)
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=self.indptr[1:])
        self._dis_code = TYPE_CODES[EntityType.DIS]

        for arr in (self.type_codes, self.edge_heads, self.edge_labels, self.edge_tails,
                    self.nbr, self.nbr_label, self.nbr_out, self.indptr):
            arr.flags.writeable = False

    @classmethod
    def from_triples(
        cls,
        nodes: Iterable[tuple[str, str, Union[str, EntityType]]],
        edges: Iterable[tuple[str, str, str]] = (),
    ) -> "KnowledgeGraph":
        """Build a graph from in-memory ``(id, name, type)`` and ``(head, label, tail)`` tuples."""
        builder = _Builder("<memory>", "<memory>")
        for i, (nid, name, etype) in enumerate(nodes, 1):
            builder.add_node(i, nid, name, etype.value if isinstance(etype, EntityType) else etype)
        for i, (h, label, t) in enumerate(edges, 1):
            builder.add_edge(i, h, label, t)
        return builder.build()

    # -- lookups -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._index

    @property
    def edge_count(self) -> int:
        return len(self.edge_heads)

    def index_of(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError:
            raise UnknownNode(f"unknown node id {node_id!r}") from None

    def node(self, node_id: str) -> EntityNode:
        i = self.index_of(node_id)
        return EntityNode(node_id, self.names[i], TYPES_BY_CODE[self.type_codes[i]])

    def etype(self, node_id: str) -> EntityType:
        return TYPES_BY_CODE[self.type_codes[self.index_of(node_id)]]

    def name(self, node_id: str) -> str:
        return self.names[self.index_of(node_id)]

    def lookup_name(self, name: str) -> Optional[str]:
        return self.name_index.get(normalize_name(name))

    def nodes(self) -> Iterator[EntityNode]:
        for i, nid in enumerate(self.ids):
            yield EntityNode(nid, self.names[i], TYPES_BY_CODE[self.type_codes[i]])

    def edges(self) -> Iterator[Relation]:
        ids, vocab = self.ids, self.label_vocab
        for h, l, t in zip(self.edge_heads.tolist(), self.edge_labels.tolist(), self.edge_tails.tolist()):
            yield Relation(ids[h], vocab[l], ids[t])

    def indices_of_type(self, etype: EntityType) -> np.ndarray:
        return np.flatnonzero(self.type_codes == TYPE_CODES[etype])

    def adjacency(self, node_id: str) -> frozenset[tuple[str, str, str]]:
        """``(neighbour id, label, "out"|"in")`` for every edge touching the node."""
        i = self.index_of(node_id)
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return frozenset(
            (self.ids[j], self.label_vocab[l], "out" if o else "in")
            for j, l, o in zip(self.nbr[lo:hi].tolist(), self.nbr_label[lo:hi].tolist(),
                               self.nbr_out[lo:hi].tolist())
        )

    def neighbors(self, node_id: str) -> set[str]:
        i = self.index_of(node_id)
        return {self.ids[j] for j in self._nbrs(i).tolist()}

    def relation_labels(self, a: str, b: str) -> list[str]:
        """Sorted distinct labels of edges joining ``a`` and ``b`` in either direction."""
        i, j = self.index_of(a), self.index_of(b)
        lo, hi = self.indptr[i], self.indptr[i + 1]
        row = self.nbr[lo:hi]
        # nbr is sorted within a row, so the matching run is contiguous
        left, right = np.searchsorted(row, j, "left"), np.searchsorted(row, j, "right")
        return sorted({self.label_vocab[l] for l in self.nbr_label[lo + left:lo + right].tolist()})

    def _nbrs(self, i: int) -> np.ndarray:
        return self.nbr[self.indptr[i]:self.indptr[i + 1]]

    # -- traversal ---------------------------------------------------------

    def _expand(self, frontier: np.ndarray) -> np.ndarray:
        """Sorted unique neighbours of every node in ``frontier``."""
        if len(frontier) == 1:
            return np.unique(self._nbrs(int(frontier[0])))
        starts = self.indptr[frontier]
        counts = self.indptr[frontier + 1] - starts
        total = int(counts.sum())
        if total == 0:
            return np.zeros(0, dtype=self.nbr.dtype)
        offsets = np.repeat(starts - (np.cumsum(counts) - counts), counts) + np.arange(total)
        return np.unique(self.nbr[offsets])

    def hop_distance(self, s: int, t: int, cutoff: int = DEFAULT_CUTOFF) -> Optional[int]:
        """Bidirectional BFS on internal indices; ``None`` when farther than ``cutoff``."""
        if s == t:
            return 0
        seen_s = np.array([s], dtype=self.nbr.dtype)
        seen_t = np.array([t], dtype=self.nbr.dtype)
        front_s, front_t = seen_s, seen_t
        ds = dt = 0
        while ds + dt < cutoff:
            # Grow the cheaper side by one full level. Any new node already seen
            # from the other side must sit on its current frontier.
            if len(front_s) <= len(front_t):
                nxt = np.setdiff1d(self._expand(front_s), seen_s, assume_unique=True)
                if not len(nxt):
                    return None
                ds += 1
                if np.intersect1d(nxt, front_t, assume_unique=True).size:
                    return ds + dt
                seen_s = np.union1d(seen_s, nxt)
                front_s = nxt
            else:
                nxt = np.setdiff1d(self._expand(front_t), seen_t, assume_unique=True)
                if not len(nxt):
                    return None
                dt += 1
                if np.intersect1d(nxt, front_s, assume_unique=True).size:
                    return ds + dt
                seen_t = np.union1d(seen_t, nxt)
                front_t = nxt
        return None


def one_hop_diseases(graph: KnowledgeGraph, node: str) -> set[str]:
    """Disease-typed neighbours of ``node``, following edges in either direction."""
    i = graph.index_of(node)
    nbrs = graph._nbrs(i)
    hits = nbrs[graph.type_codes[nbrs] == graph._dis_code]
    return {graph.ids[j] for j in hits.tolist()}


def shortest_path_distance(
    graph: KnowledgeGraph, src: str, dst: str, cutoff: int = DEFAULT_CUTOFF
) -> Optional[int]:
    """Undirected hop count between two nodes, or ``None`` (unreachable) past ``cutoff``."""
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    return graph.hop_distance(graph.index_of(src), graph.index_of(dst), cutoff)


# -- loading ---------------------------------------------------------------


def _dedup_edges(heads, labels, tails, n_nodes: int, n_labels: int):
    heads = np.asarray(heads, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    tails = np.asarray(tails, dtype=np.int64)
    if not len(heads):
        return heads, labels, tails
    key = (heads * max(n_labels, 1) + labels) * max(n_nodes, 1) + tails
    if n_nodes * max(n_labels, 1) * max(n_nodes, 1) < 2**62:
        _, first = np.unique(key, return_index=True)
    else:
        _, first = np.unique(np.stack([heads, labels, tails], axis=1), axis=0, return_index=True)
    first.sort()  # keep file order among the survivors
    return heads[first], labels[first], tails[first]


class _Builder:
    def __init__(self, node_src: str, edge_src: str):
        self.node_src, self.edge_src = node_src, edge_src
        self.index: dict[str, int] = {}
        self.ids: list[str] = []
        self.names: list[str] = []
        self.codes: list[int] = []
        self.heads: list[int] = []
        self.tails: list[int] = []
        self.labels: list[int] = []
        self.label_index: dict[str, int] = {}

    def add_node(self, line: int, nid: str, name: str, tag: str) -> None:
        if not nid or not name.strip():
            raise MalformedRow(self.node_src, line, "empty node id or name")
        try:
            etype = EntityType.parse(tag)
        except ValueError:
            raise UnknownEntityType(f"{self.node_src}:{line}: unknown entity type {tag!r}") from None
        if nid in self.index:
            raise DuplicateNodeId(f"{self.node_src}:{line}: duplicate node id {nid!r}")
        self.index[nid] = len(self.ids)
        self.ids.append(nid)
        self.names.append(name)
        self.codes.append(TYPE_CODES[etype])

    def add_edge(self, line: int, h: str, label: str, t: str) -> None:
        if not label.strip():
            raise MalformedRow(self.edge_src, line, "empty relation label")
        hi, ti = self.index.get(h), self.index.get(t)
        if hi is None or ti is None:
            missing = h if hi is None else t
            raise DanglingEdge(f"{self.edge_src}:{line}: edge references missing node {missing!r}")
        li = self.label_index.get(label)
        if li is None:
            li = self.label_index[label] = len(self.label_index)
        self.heads.append(hi)
        self.tails.append(ti)
        self.labels.append(li)

    def build(self) -> KnowledgeGraph:
        return KnowledgeGraph(
            self.ids, self.names, np.array(self.codes, dtype=np.int8),
            np.array(self.heads, dtype=np.int64), np.array(self.labels, dtype=np.int64),
            np.array(self.tails, dtype=np.int64), list(self.label_index),
        )


def _open(source: Source) -> tuple[BinaryIO, str, bool]:
    if isinstance(source, bytes):
        return io.BytesIO(source), "<bytes>", True
    if isinstance(source, (str, os.PathLike)):
        return open(source, "rb"), os.fspath(source), True
    return source, getattr(source, "name", "<stream>"), False


def _rows(source: Source) -> Iterator[tuple[int, list[str], str]]:
    fh, label, owned = _open(source)
    try:
        for lineno, raw in enumerate(fh, 1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError:
                raise MalformedRow(label, lineno, "not valid UTF-8") from None
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise MalformedRow(label, lineno, f"expected 3 tab-separated fields, got {len(parts)}")
            yield lineno, parts, label
    finally:
        if owned:
            fh.close()


def load_graph(nodes_source: Source, edges_source: Source) -> KnowledgeGraph:
    """Load a graph from a nodes TSV (``id, name, type``) and an edges TSV (``head, label, tail``).

    Sources may be paths, raw bytes or binary file objects. Blank lines and
    lines starting with ``#`` are skipped. Duplicate edges collapse to one.
    """
    builder: Optional[_Builder] = None
    for lineno, (nid, name, tag), label in _rows(nodes_source):
        if builder is None:
            builder = _Builder(label, "<edges>")
        builder.add_node(lineno, nid, name, tag)
    if builder is None:
        builder = _Builder("<nodes>", "<edges>")
    for lineno, (h, rel, t), label in _rows(edges_source):
        builder.edge_src = label
        builder.add_edge(lineno, h, rel, t)
    return builder.build()
