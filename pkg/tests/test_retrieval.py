import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medikal.errors import RetrieverError
from medikal.retrieval import BELOW_ONE, Bm25Retriever, TfidfRetriever, char_ngrams, make_retriever


def test_char_ngrams_normalises():
    assert char_ngrams("  AB c ", 2) == ["ab", "b ", " c"]
    assert char_ngrams("a", 2) == ["a"]
    assert char_ngrams("", 2) == []


def test_tfidf_hand_computed_cosine():
    r = TfidfRetriever(["abc", "abd"])
    # ab is in both docs (idf 1); bc and bd in one each (idf ln(3/2) + 1)
    x = math.log(1.5) + 1
    assert r.score("abc", ["abd"])[0] == pytest.approx(1 / (1 + x * x), abs=1e-15)


def test_bm25_hand_computed_score():
    r = Bm25Retriever(["ab", "b"])
    idf_a, idf_b = math.log(2), math.log(1.2)
    norm_ab = 1.5 * (0.25 + 0.75 * 2 / 1.5)
    norm_b = 1.5 * (0.25 + 0.75 * 1 / 1.5)
    self_score = (idf_a + idf_b) * 2.5 / (1 + norm_ab)
    want = idf_b * 2.5 / (1 + norm_b) / self_score
    assert r.score("ab", ["b"])[0] == pytest.approx(want, abs=1e-15)


@pytest.mark.parametrize("cls", [TfidfRetriever, Bm25Retriever])
def test_exact_match_scores_one_and_others_below(cls):
    names = ["aa", "aaa", "a a", "fever", "Fever "]
    r = cls(names)
    s = r.score("fever", names)
    assert s[3] == 1.0 and s[4] == 1.0
    assert (s[:3] < 1.0).all()
    s = r.score("aa", names)
    assert s[0] == 1.0 and s[1] <= BELOW_ONE


@pytest.mark.parametrize("cls", [TfidfRetriever, Bm25Retriever])
def test_prepared_index_matches_unprepared(cls, toy_graph):
    names = toy_graph.names
    r = cls(names)
    cold = r.score("iron deficiency", names)
    r.prepare(names)
    assert np.array_equal(cold, r.score("iron deficiency", names))
    # an equal but distinct list falls back to a fresh build
    assert np.array_equal(cold, r.score("iron deficiency", list(names)))


def test_make_retriever_kinds():
    assert isinstance(make_retriever("tfidf", ["a"]), TfidfRetriever)
    assert isinstance(make_retriever("bm25", ["a"]), Bm25Retriever)
    with pytest.raises(RetrieverError):
        make_retriever("embedding", ["a"])
    with pytest.raises(RetrieverError):
        make_retriever("dense", ["a"])


def test_empty_candidates():
    assert TfidfRetriever().score("x", []).shape == (0,)


words = st.text(alphabet="abcde 热咳", min_size=1, max_size=8)


@settings(max_examples=80, deadline=None)
@given(st.lists(words, min_size=1, max_size=12), words, st.sampled_from([TfidfRetriever, Bm25Retriever]),
       st.randoms(use_true_random=False))
def test_scores_bounded_pairwise_and_exact_maximal(cands, query, cls, rnd):
    r = cls(cands + [query])
    s = r.score(query, cands)
    assert ((s >= 0) & (s <= 1)).all()
    # each score depends only on its own pair
    perm = list(range(len(cands)))
    rnd.shuffle(perm)
    s2 = r.score(query, [cands[i] for i in perm])
    assert np.array_equal(s2, s[perm])
    for i, c in enumerate(cands):
        assert s[i] == r.score(query, [c])[0]
    # candidates identical to the query after normalisation take the maximum
    exact = [i for i, c in enumerate(cands) if " ".join(c.split()).casefold() == " ".join(query.split()).casefold()]
    for i in exact:
        assert s[i] == 1.0 == s.max()
    others = [i for i in range(len(cands)) if i not in exact]
    assert all(s[i] < 1.0 for i in others)


def test_threaded_scoring_is_stable(toy_graph):
    from concurrent.futures import ThreadPoolExecutor

    r = TfidfRetriever(toy_graph.names)
    r.prepare(toy_graph.names)
    queries = [random.Random(i).choice(toy_graph.names)[:5] for i in range(40)]
    serial = [r.score(q, toy_graph.names) for q in queries]
    with ThreadPoolExecutor(4) as pool:
        parallel = list(pool.map(lambda q: r.score(q, toy_graph.names), queries))
    assert all(np.array_equal(a, b) for a, b in zip(serial, parallel))


@pytest.mark.parametrize("cls", [TfidfRetriever, Bm25Retriever])
def test_batch_score_equals_single_pair_score_bitwise(cls, toy_graph):
    names = toy_graph.names
    r = cls(names)
    for q in ("iron deficiency anaemia", "muscle ache", "blood sugar", "chest"):
        batch = r.score(q, names)
        single = np.array([r.score(q, [n])[0] for n in names])
        assert np.array_equal(batch, single)
