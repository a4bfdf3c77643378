
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medikal.errors import MalformedRow
from medikal.kg import KnowledgeGraph
from medikal.linking import (
    ExtractedEntity, GazetteerExtractor, best_candidate, build_query_set, extract_entities,
    link_entity, link_name, load_gazetteer,
)
from medikal.records import EmrRecord, SummaryReport
from medikal.retrieval import Retriever, TfidfRetriever
from medikal.types import AspectCategory, EntityType
from oracles import longest_match_scan

SYM, DRU, DIS = EntityType.SYM, EntityType.DRU, EntityType.DIS


class TableRetriever(Retriever):
    """Scores looked up from a fixed name -> score table (unknown names score 0)."""

    def __init__(self, table):
        super().__init__()
        self.table = table

    def score(self, query, candidates):
        return np.array([self.table.get(c, 0.0) for c in candidates], dtype=float)

    def _build(self, candidates):
        return None

    def _score(self, query, index):
        raise NotImplementedError


def test_extract_empty_text():
    assert extract_entities("", GazetteerExtractor({"fever": SYM})) == []


def test_extract_dictionary_hits():
    ex = GazetteerExtractor({"fever": SYM, "aspirin": DRU})
    got = extract_entities("fever treated with aspirin", ex)
    assert [(e.surface, e.etype) for e in got] == [("fever", SYM), ("aspirin", DRU)]
    assert got[0].span == (0, 5) and got[1].span == (19, 26)


def test_extract_longest_leftmost_and_word_boundaries():
    ex = GazetteerExtractor({"influenza": DIS, "influenza antigen test": EntityType.ITE, "ear": EntityType.BOD})
    got = extract_entities("Influenza antigen test positive; no fear; Influenza", ex)
    assert [(e.surface, e.etype) for e in got] == [
        ("Influenza antigen test", EntityType.ITE), ("Influenza", DIS)]


def test_extract_dedups_by_surface_and_type():
    ex = GazetteerExtractor({"fever": SYM})
    assert len(extract_entities("Fever, fever and FEVER", ex)) == 1


def test_extract_cjk_without_word_boundaries():
    ex = GazetteerExtractor({"发热": SYM, "咳嗽": SYM})
    got = extract_entities("患者发热伴咳嗽三天", ex)
    assert [e.surface for e in got] == ["发热", "咳嗽"]


def test_toy_record_matches_longest_match_oracle(toy, toy_graph):
    rec = EmrRecord.from_dict(__import__("json").loads(toy["emr"].read_text().splitlines()[0]))
    ex = GazetteerExtractor.from_graph(toy_graph)
    dictionary = {n.name: n.etype for n in toy_graph.nodes()}
    for text in (rec.hpi, rec.pe, rec.lae):
        got = extract_entities(text, ex)
        seen, want = set(), []
        for s, e, t in longest_match_scan(text, dictionary):
            key = (text[s:e].lower(), t)
            if key not in seen:
                seen.add(key)
                want.append((text[s:e], t, (s, e)))
        assert [(x.surface, x.etype, x.span) for x in got] == want


def test_load_gazetteer(tmp_path):
    p = tmp_path / "g.tsv"
    p.write_text("# c\nfever\tsym\nrash\tSYM\n", encoding="utf-8")
    assert load_gazetteer(p) == {"fever": SYM, "rash": SYM}
    p.write_text("fever\tsymptom\n", encoding="utf-8")
    with pytest.raises(MalformedRow):
        load_gazetteer(p)


def test_user_dictionary_wins_over_graph_type(toy_graph):
    ex = GazetteerExtractor.from_graph(toy_graph, {"fever": DIS})
    assert ex.extract("fever")[0].etype is DIS


def test_link_exact_match_has_similarity_one(toy_graph):
    r = TfidfRetriever(toy_graph.names)
    hit = link_entity(ExtractedEntity("fever", SYM), toy_graph, r, 0.5)
    assert hit.node == toy_graph.lookup_name("fever") and hit.similarity == 1.0


def test_link_threshold():
    g = KnowledgeGraph.from_triples([("a", "alpha", "sym"), ("b", "beta", "sym")])
    r = TableRetriever({"alpha": 0.3, "beta": 0.1})
    assert link_entity(ExtractedEntity("x", SYM), g, r, 0.5) is None
    assert link_entity(ExtractedEntity("x", SYM), g, r, 0.3).node == "a"


def test_link_ties_by_name_then_id():
    g = KnowledgeGraph.from_triples([("z", "same", "sym"), ("y", "same", "sym"), ("a", "zeta", "sym")])
    r = TableRetriever({"same": 0.8, "zeta": 0.8})
    assert link_entity(ExtractedEntity("q", SYM), g, r, 0.5).node == "y"


def test_type_preference_and_fallback():
    g = KnowledgeGraph.from_triples([("s", "cough", "sym"), ("d", "cough syndrome", "dis")])
    r = TableRetriever({"cough": 0.9, "cough syndrome": 0.6})
    assert link_name("q", g, r, 0.5, etype=DIS) == ("d", 0.6)
    r2 = TableRetriever({"cough": 0.9, "cough syndrome": 0.4})
    assert link_name("q", g, r2, 0.5, etype=DIS) == ("s", 0.9)
    assert link_name("q", g, r2, 0.5, etype=DIS, strict_type=True) is None


def test_toy_link_matches_exhaustive_argmax(toy_graph):
    r = TfidfRetriever(toy_graph.names)
    for surface, etype in [("iron deficiency anemia", DIS), ("iron deficiency anaemia", DIS),
                           ("muscle ache", SYM), ("blood sugar", EntityType.ITE)]:
        pairs = [(float(r.score(surface, [n.name])[0]), n) for n in toy_graph.nodes()]
        same = [p for p in pairs if p[1].etype is etype]
        pool = same if max(s for s, _ in same) >= 0.5 else pairs
        best = max(s for s, _ in pool)
        want = min((n for s, n in pool if s == best), key=lambda n: (n.name, n.id))
        got = link_entity(ExtractedEntity(surface, etype), toy_graph, r, 0.5)
        if best < 0.5:
            assert got is None
        else:
            assert (got.node, got.similarity) == (want.id, best)


def test_query_set_all_none_is_empty(toy_graph):
    qs = build_query_set(SummaryReport(), toy_graph, GazetteerExtractor.from_graph(toy_graph),
                         TfidfRetriever(toy_graph.names))
    assert len(qs) == 0


def test_query_set_dedups_by_node_and_tags_aspect(toy_graph):
    summary = SummaryReport(main_symptoms="fever and cough", past_medical_history="fever last year",
                            medication_usage="ibuprofen", exam_summary="hemoglobin low")
    qs = build_query_set(summary, toy_graph, GazetteerExtractor.from_graph(toy_graph),
                         TfidfRetriever(toy_graph.names))
    names = [toy_graph.name(e.node) for e in qs]
    assert names == ["fever", "cough", "ibuprofen", "hemoglobin"]
    assert [e.aspect for e in qs] == [AspectCategory.MAIN_SYMPTOMS, AspectCategory.MAIN_SYMPTOMS,
                                      AspectCategory.MEDICATION, AspectCategory.EXAM_RESULTS]
    assert len(set(qs.nodes())) == len(qs)


def test_toy_query_set_matches_per_field_composition(toy_graph):
    ex = GazetteerExtractor.from_graph(toy_graph)
    r = TfidfRetriever(toy_graph.names)
    summary = SummaryReport(
        main_symptoms="fever up to 39.2C for three days, cough, sore throat, headache, muscle aches",
        exam_summary="High fever 39.0C; congested pharynx; lungs clear; influenza antigen test positive.",
    )
    # oracle: link each field on its own, then keep one entry per node (best similarity, first position)
    order, best = [], {}
    for field, text in summary.items():
        if text == "none":
            continue
        sub = build_query_set(SummaryReport(**{field: text}), toy_graph, ex, r)
        for e in sub:
            if e.node not in best:
                order.append(e.node)
                best[e.node] = e
            elif e.similarity > best[e.node].similarity:
                best[e.node] = e
    got = build_query_set(summary, toy_graph, ex, r)
    assert list(got) == [best[n] for n in order]


def test_best_candidate_empty_subset(toy_graph):
    assert best_candidate(np.zeros(len(toy_graph)), toy_graph, np.array([], dtype=int)) is None


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from([0.1, 0.25, 0.5, 0.7, 0.9]), min_size=2, max_size=10),
       st.floats(1e-3, 1e3), st.randoms(use_true_random=False))
def test_link_independent_of_node_order_and_scale(scores, c, rnd):
    nodes = [(f"n{i}", f"name{i % 3}", "sym") for i in range(len(scores))]
    table = {}
    for (_, name, _), s in zip(nodes, scores):
        table[name] = max(table.get(name, 0.0), s)
    shuffled = nodes[:]
    rnd.shuffle(shuffled)
    g1 = KnowledgeGraph.from_triples(nodes)
    g2 = KnowledgeGraph.from_triples(shuffled)
    ent = ExtractedEntity("q", SYM)
    a = link_entity(ent, g1, TableRetriever(table), 0.0)
    b = link_entity(ent, g2, TableRetriever(table), 0.0)
    c_ = link_entity(ent, g1, TableRetriever({k: v * c for k, v in table.items()}), 0.0)
    assert a.node == b.node == c_.node
