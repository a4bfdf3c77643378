"""Similarity backends used to link mentions to graph node names.

All retrievers score a query against a list of candidate strings and return
one value in ``[0, 1]`` per candidate. Scores depend only on the
(query, candidate) pair. An exact match after name normalisation always scores
1.0, and every other pair is capped just below 1.0. Without the cap, "aa" and
"aaa" would tie under n-gram cosine.
"""

from __future__ import annotations

import json
import math
import threading
import urllib.error
import urllib.request
from abc import ABC, abstractmethod
from collections import Counter
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import sparse

from .errors import RetrieverError
from .kg import normalize_name

BELOW_ONE = math.nextafter(1.0, 0.0)


class Retriever(ABC):
    """Pairwise scorer with an optional prepared index for a fixed candidate list.

    :meth:`prepare` is the single-threaded build step. After it, :meth:`score`
    only reads shared state and is safe to call from several threads.
    """

    def __init__(self) -> None:
        self._prepared: dict[int, tuple[Sequence[str], tuple]] = {}
        self._lock = threading.Lock()

    def prepare(self, candidates: Sequence[str]) -> None:
        """Cache index structures for ``candidates`` (matched by object identity)."""
        built = self._index_with_exact(candidates)
        with self._lock:
            self._prepared[id(candidates)] = (candidates, built)

    def _index_with_exact(self, candidates: Sequence[str]):
        exact: dict[str, list[int]] = {}
        for i, c in enumerate(candidates):
            exact.setdefault(normalize_name(c), []).append(i)
        return self._build(candidates), exact

    def score(self, query: str, candidates: Sequence[str]) -> np.ndarray:
        if not len(candidates):
            return np.zeros(0)
        hit = self._prepared.get(id(candidates))
        if hit is not None and hit[0] is candidates:
            index, exact = hit[1]
        else:
            index, exact = self._index_with_exact(candidates)
        raw = np.clip(np.asarray(self._score(query, index), dtype=float), 0.0, 1.0)
        # Cap all non-exact pairs below 1.0, then give exact matches exactly 1.0.
        raw = np.minimum(raw, BELOW_ONE)
        raw[exact.get(normalize_name(query), [])] = 1.0
        return raw

    @abstractmethod
    def _build(self, candidates: Sequence[str]) -> object: ...

    @abstractmethod
    def _score(self, query: str, index: object) -> np.ndarray: ...


def char_ngrams(text: str, n: int) -> list[str]:
    s = normalize_name(text)
    if len(s) < n:
        return [s] if s else []
    return [s[i:i + n] for i in range(len(s) - n + 1)]


def char_tokens(text: str) -> list[str]:
    return [c for c in normalize_name(text) if not c.isspace()]


class TfidfRetriever(Retriever):
    """Cosine similarity of character n-gram TF-IDF vectors.

    ``corpus`` fixes the document frequencies, normally the graph's node names.
    Uses smoothed idf, ``ln((1 + N) / (1 + df)) + 1``.
    """

    name = "tfidf"

    def __init__(self, corpus: Iterable[str] = (), n: int = 2):
        super().__init__()
        self.n = n
        df: Counter[str] = Counter()
        n_docs = 0
        for doc in corpus:
            df.update(set(char_ngrams(doc, n)))
            n_docs += 1
        self._df = df
        self._n_docs = n_docs

    def idf(self, gram: str) -> float:
        return math.log((1 + self._n_docs) / (1 + self._df.get(gram, 0))) + 1.0

    def vector(self, text: str) -> dict[str, float]:
        counts = Counter(char_ngrams(text, self.n))
        vec = {g: c * self.idf(g) for g, c in counts.items()}
        norm = math.sqrt(sum(v * v for v in vec.values()))
        return {g: v / norm for g, v in vec.items()} if norm else {}

    def _build(self, candidates):
        vectors = [self.vector(c) for c in candidates]
        # Columns in sorted gram order: scipy sums each row in column order, so
        # a pair's score must not depend on which other candidates are present.
        vocab = {g: j for j, g in enumerate(sorted({g for v in vectors for g in v}))}
        rows, cols, vals = [], [], []
        for r, vec in enumerate(vectors):
            for g, v in vec.items():
                rows.append(r)
                cols.append(vocab[g])
                vals.append(v)
        m = sparse.csr_matrix((vals, (rows, cols)), shape=(len(candidates), max(len(vocab), 1)))
        return vocab, m

    def _score(self, query, index):
        vocab, m = index
        q = np.zeros(m.shape[1])
        for g, v in self.vector(query).items():
            j = vocab.get(g)
            if j is not None:
                q[j] = v
        return m @ q


class Bm25Retriever(Retriever):
    """Okapi BM25 over character tokens, divided by the query's self-score.

    idf is the Lucene variant ``ln(1 + (N - df + 0.5) / (df + 0.5))`` so it
    stays positive, and query tokens count once each.
    """

    name = "bm25"

    def __init__(self, corpus: Iterable[str] = (), k1: float = 1.5, b: float = 0.75):
        super().__init__()
        self.k1, self.b = k1, b
        df: Counter[str] = Counter()
        total_len = n_docs = 0
        for doc in corpus:
            toks = char_tokens(doc)
            df.update(set(toks))
            total_len += len(toks)
            n_docs += 1
        self._df = df
        self._n_docs = n_docs
        self.avgdl = total_len / n_docs if n_docs and total_len else 1.0

    def idf(self, tok: str) -> float:
        df = self._df.get(tok, 0)
        return math.log(1.0 + (self._n_docs - df + 0.5) / (df + 0.5))

    def raw_score(self, query: str, doc: str) -> float:
        toks = char_tokens(doc)
        tf = Counter(toks)
        norm = self.k1 * (1 - self.b + self.b * len(toks) / self.avgdl)
        return sum(
            self.idf(t) * tf[t] * (self.k1 + 1) / (tf[t] + norm)
            for t in dict.fromkeys(char_tokens(query)) if tf[t]
        )

    def _build(self, candidates):
        vocab: dict[str, int] = {}
        rows, cols, vals = [], [], []
        lengths = np.zeros(len(candidates))
        for r, cand in enumerate(candidates):
            toks = char_tokens(cand)
            lengths[r] = len(toks)
            for t, c in Counter(toks).items():
                rows.append(r)
                cols.append(vocab.setdefault(t, len(vocab)))
                vals.append(c)
        tf = sparse.csc_matrix((vals, (rows, cols)), shape=(len(candidates), max(len(vocab), 1)))
        norm = self.k1 * (1 - self.b + self.b * lengths / self.avgdl)
        return vocab, tf, norm

    def _score(self, query, index):
        vocab, tf, norm = index
        out = np.zeros(tf.shape[0])
        self_score = self.raw_score(query, query)
        if self_score <= 0:
            return out
        for t in dict.fromkeys(char_tokens(query)):
            j = vocab.get(t)
            if j is None:
                continue
            lo, hi = tf.indptr[j], tf.indptr[j + 1]
            rows, counts = tf.indices[lo:hi], tf.data[lo:hi]
            out[rows] += self.idf(t) * counts * (self.k1 + 1) / (counts + norm[rows])
        return out / self_score


def post_json(url: str, payload: dict, timeout: float) -> dict:
    """POST a JSON body and decode the JSON reply (stdlib only)."""
    req = urllib.request.Request(
        url, data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json"}, method="POST",
    )
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return json.loads(resp.read().decode("utf-8"))


class EmbeddingRetriever(Retriever):
    """Cosine similarity of vectors from an external embedding service.

    The service takes ``{"texts": [...]}`` and answers ``{"vectors": [[...], ...]}``.
    Negative cosines are clipped to 0.
    """

    name = "embedding"

    def __init__(self, url: str, timeout: float = 30.0, batch_size: int = 256):
        super().__init__()
        self.url = url
        self.timeout = timeout
        self.batch_size = batch_size
        self._dim: Optional[int] = None

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        chunks = []
        for i in range(0, len(texts), self.batch_size):
            batch = list(texts[i:i + self.batch_size])
            try:
                reply = post_json(self.url, {"texts": batch}, self.timeout)
                vecs = np.asarray(reply["vectors"], dtype=float)
            except (urllib.error.URLError, OSError, ValueError, KeyError, TypeError) as exc:
                raise RetrieverError(f"embedding service at {self.url} failed: {exc}") from exc
            if vecs.ndim != 2 or len(vecs) != len(batch):
                raise RetrieverError("embedding service returned a malformed vector list")
            if self._dim is None:
                self._dim = vecs.shape[1]
            elif vecs.shape[1] != self._dim:
                raise RetrieverError(
                    f"embedding dimension changed from {self._dim} to {vecs.shape[1]}"
                )
            chunks.append(vecs)
        if not chunks:
            return np.zeros((0, self._dim or 0))
        mat = np.vstack(chunks)
        norms = np.linalg.norm(mat, axis=1, keepdims=True)
        return np.divide(mat, norms, out=np.zeros_like(mat), where=norms > 0)

    def _build(self, candidates):
        return self.embed(candidates)

    def _score(self, query, index):
        q = self.embed([query])[0]
        return index @ q


def make_retriever(kind: str, corpus: Sequence[str], endpoint: Optional[str] = None,
                   timeout: float = 30.0) -> Retriever:
    if kind == "tfidf":
        return TfidfRetriever(corpus)
    if kind == "bm25":
        return Bm25Retriever(corpus)
    if kind == "embedding":
        if not endpoint:
            raise RetrieverError("embedding retriever needs an endpoint URL")
        return EmbeddingRetriever(endpoint, timeout=timeout)
    raise RetrieverError(f"unknown retriever backend {kind!r}")
