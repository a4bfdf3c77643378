import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medikal.errors import FbpParseError, MockResponseMissing, PromptBudgetExceeded
from medikal.llm.client import MockChatClient
from medikal.llm.decide import decide_final, decide_one
from medikal.llm.parsing import FbpAssessment, parse_fbp, parse_predictions, parse_summary
from medikal.llm.prompts import PROMPT_NAMES, PromptSet, PromptTemplate
from medikal.llm.stages import assess_candidate, direct_diagnose, fit_evidence, render_assess_prompt, summarize
from medikal.localization import KG, LLM, CandidateDisease
from medikal.reconstruction import DiseaseEvidence, EvidenceItem, render_evidence
from medikal.records import NONE_TEXT, EmrRecord, SummaryReport
from medikal.types import AspectCategory
from oracles import all_truth_cases, truth_table_rule

A = AspectCategory
FBP_CASES = json.loads((Path(__file__).parent / "fixtures" / "fbp_cases.json").read_text(encoding="utf-8"))

FULL_SUMMARY = """1. Main symptoms: [fever and cough for three days]
2. Recent medical visits: [none]
3. Past medical history: hypertension (if none, write none)
4. Past surgical history: [appendectomy]
5. Medication usage: [amlodipine]"""


class TestSummaryParser:
    def test_all_items(self):
        s = parse_summary(FULL_SUMMARY)
        assert s.main_symptoms == "fever and cough for three days"
        assert s.recent_visits == NONE_TEXT
        assert s.past_medical_history == "hypertension"
        assert s.past_surgical_history == "appendectomy"
        assert s.medication_usage == "amlodipine"
        assert s.warnings == ()

    def test_missing_item_becomes_none_with_warning(self):
        text = "\n".join(ln for ln in FULL_SUMMARY.splitlines() if not ln.startswith("4."))
        s = parse_summary(text)
        assert s.past_surgical_history == NONE_TEXT
        assert len(s.warnings) == 1 and "item 4" in s.warnings[0]

    def test_unstructured_reply_falls_back_to_raw_text(self):
        s = parse_summary("Patient has fever.")
        assert s.main_symptoms == "Patient has fever." and s.warnings

    def test_fullwidth_numbering(self):
        s = parse_summary("1、主要症状：【发热】\n5．用药情况：【无】")
        assert s.main_symptoms == "发热"
        assert len(s.warnings) == 3


class TestPredictionParser:
    def test_dedup_truncate(self):
        text = ("Predicted Disease 1: [Influenza]\nPredicted Disease 2: influenza\n"
                "Predicted Disease 3: Pneumonia.\nPredicted Disease 4: Acute bronchitis")
        assert parse_predictions(text, 3) == (["Influenza", "Pneumonia", "Acute bronchitis"], [])
        assert parse_predictions(text, 1)[0] == ["Influenza"]

    def test_no_labels(self):
        names, warnings = parse_predictions("I think it is the flu.", 3)
        assert names == [] and warnings

    def test_none_is_skipped(self):
        assert parse_predictions("Predicted Disease 1: none", 3)[0] == []


@pytest.mark.parametrize("case", FBP_CASES, ids=[c["name"] for c in FBP_CASES])
def test_fbp_fixture(case):
    exp = case["expect"]
    if "error" in exp:
        with pytest.raises(FbpParseError):
            parse_fbp(case["text"])
        return
    a = parse_fbp(case["text"])
    assert list(a.scores) == exp["scores"]
    assert a.verdict is exp["verdict"]
    if "note" in exp:
        assert a.misleading_info_note == exp["note"]


def test_fbp_fixture_set_is_broad():
    assert len(FBP_CASES) >= 10
    assert sum("error" in c["expect"] for c in FBP_CASES) >= 3


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 10), min_size=4, max_size=4), st.booleans(),
       st.sampled_from([("[", "]"), ("【", "】"), ("［", "］")]))
def test_fbp_render_parse_roundtrip(scores, verdict, brackets):
    o, c = brackets
    labels = ("chief complaint", "medical history", "medication usage", "examination results")
    lines = [f"{i}. Correlation with the {lab} score: {o}{s}{c} (out of 10)"
             for i, (lab, s) in enumerate(zip(labels, scores), 1)]
    lines.append(f"6. Can this disease be used as a diagnostic result: {o}{'y' if verdict else 'n'}{c}")
    a = parse_fbp("\n".join(lines))
    assert list(a.scores) == scores and a.verdict is verdict and a.total == sum(scores)


def test_assessment_roundtrip_and_range():
    a = FbpAssessment(1, 2, 3, 4, True, "x")
    assert FbpAssessment.from_dict(a.to_dict()) == a
    with pytest.raises(ValueError):
        FbpAssessment(11, 0, 0, 0, True)


class TestPrompts:
    def test_bundled_templates_render_without_leftover_slots(self):
        prompts = PromptSet.load()
        assert set(prompts.templates) == set(PROMPT_NAMES)
        s = SummaryReport(main_symptoms="fever")
        blocks = {a: f"block-{a.value}" for a in A}
        system, user = render_assess_prompt(prompts, s, blocks, "influenza")
        assert "${" not in system + user
        for a in A:
            assert f"block-{a.value}" in user
        assert "1. Main symptoms: fever" in user and "influenza" in user

    def test_missing_placeholder_is_an_error(self):
        with pytest.raises(KeyError):
            PromptSet.load().render("summary", hpi="x")

    def test_custom_directory(self, tmp_path):
        for name in PROMPT_NAMES:
            (tmp_path / f"{name}.txt").write_text(f"[system]\nsys {name}\n[user]\nu ${{x}}\n")
        assert PromptSet.load(tmp_path).render("exam", x=7) == ("sys exam", "u 7")
        with pytest.raises(ValueError):
            PromptTemplate.parse("no sections")


def record():
    return EmrRecord("r9", hpi="fever, cough", pmh="", pe="T 38.9", lae="WBC high")


class TestStages:
    def test_summary_disabled_never_calls(self):
        client = MockChatClient({})
        s = summarize(record(), client, PromptSet.load(), enabled=False)
        assert client.calls == []
        assert s.main_symptoms == "fever, cough"
        assert s.past_medical_history == NONE_TEXT
        assert s.exam_summary == "T 38.9\nWBC high"

    def test_summary_two_calls(self):
        client = MockChatClient({"summary:r9": FULL_SUMMARY, "exam:r9": "febrile, leukocytosis"})
        s = summarize(record(), client, PromptSet.load())
        assert client.calls == ["summary:r9", "exam:r9"]
        assert s.exam_summary == "febrile, leukocytosis" and s.medication_usage == "amlodipine"

    def test_missing_key_raises(self):
        with pytest.raises(MockResponseMissing):
            summarize(record(), MockChatClient({}), PromptSet.load())

    def test_direct_diagnose(self):
        client = MockChatClient({"diagnose:r9": "Predicted Disease 1: Influenza\nPredicted Disease 2: Cold"})
        names, _ = direct_diagnose(SummaryReport(), client, PromptSet.load(), 3, record_id="r9")
        assert names == ["Influenza", "Cold"]

    def test_assess_candidate_budget_and_parse(self):
        blocks = {a: "no related findings" for a in A}
        client = MockChatClient({"assess:r9:flu": "8,8,8,8; y", "assess:r9:bad": "dunno"})
        prompts = PromptSet.load()
        a = assess_candidate(SummaryReport(), blocks, "flu", client, prompts, record_id="r9")
        assert a.total == 32 and a.verdict
        with pytest.raises(FbpParseError):
            assess_candidate(SummaryReport(), blocks, "bad", client, prompts, record_id="r9")
        with pytest.raises(PromptBudgetExceeded):
            assess_candidate(SummaryReport(), blocks, "flu", client, prompts, record_id="r9", budget=10)


def test_mock_client_is_thread_safe():
    client = MockChatClient({f"k{i}": str(i) for i in range(50)})
    with ThreadPoolExecutor(8) as pool:
        out = list(pool.map(lambda i: client.complete("", "", key=f"k{i % 50}"), range(400)))
    assert out == [str(i % 50) for i in range(400)]
    assert len(client.calls) == 400


def evidence_of(items):
    cand = CandidateDisease("D", "d", 1.0)
    return DiseaseEvidence(cand, {a: tuple(items.get(a, ())) for a in A})


def test_fit_evidence_drops_least_similar_then_farthest():
    ev = evidence_of({
        A.MAIN_SYMPTOMS: [EvidenceItem("a", "na", 1, "r", 1.0), EvidenceItem("b", "nb", 3, None, 0.6)],
        A.EXAM_RESULTS: [EvidenceItem("c", "nc", None, None, 1.0), EvidenceItem("e", "ne", 2, None, 0.6)],
    })

    def items_left(limit):
        return lambda blocks: sum(b.count("-->") for b in blocks.values()) <= limit

    trimmed, dropped = fit_evidence(ev, items_left(4))
    assert dropped == [] and trimmed == ev
    _, dropped = fit_evidence(ev, items_left(2))
    # both similarity 0.6; b is farther (3 vs 2) so it goes first
    assert [d.surface for d in dropped] == ["b", "e"]
    _, dropped = fit_evidence(ev, items_left(1))
    # among the exact matches the unreachable one goes before the one-hop one
    assert [d.surface for d in dropped] == ["b", "e", "c"]
    trimmed, dropped = fit_evidence(ev, items_left(0))
    assert set(render_evidence(trimmed).values()) == {"no related findings"} and len(dropped) == 4
    with pytest.raises(PromptBudgetExceeded):
        fit_evidence(ev, lambda blocks: False)


def fbp(total, verdict):
    scores = [min(10, max(0, total - 10 * i)) for i in range(4)]
    assert sum(scores) == total
    return FbpAssessment(*scores, verdict)


@pytest.mark.parametrize("case", all_truth_cases())
def test_truth_table(case):
    passed, verdict, member, ri = case
    origin = frozenset({LLM}) if member else frozenset({KG})
    cand = CandidateDisease("X", "x", 1.0, origin=origin)
    assessment = None if passed is None else fbp(30 if passed else 10, verdict)
    final = decide_final([(cand, assessment)], 0.6, [], ri_enabled=ri)
    want = truth_table_rule(None if passed is None else (30 if passed else 10), verdict, member and ri)
    assert (final.accepted == ("X",)) is want
    assert final.audit[0].accepted is want


def test_threshold_boundary_is_inclusive():
    assert decide_one(fbp(24, True), 24.0, False)[0]
    assert not decide_one(fbp(23, True), 24.0, False)[0]
    assert decide_one(fbp(23, True), 24.0, True)[2] == "disagree-keep-llm"


def test_theta_extremes():
    cand = CandidateDisease("X", "x", 1.0)
    assert decide_final([(cand, fbp(0, True))], 0.0).accepted == ("X",)
    assert decide_final([(cand, fbp(39, True))], 1.0).accepted == ()
    assert decide_final([(cand, fbp(40, True))], 1.0).accepted == ("X",)
    with pytest.raises(ValueError):
        decide_final([], 1.5)


def test_membership_by_name_from_d_llm():
    cand = CandidateDisease("Influenza", "x", 1.0)
    assert decide_final([(cand, fbp(10, True))], 0.6, ["influenza "]).accepted == ("Influenza",)
    assert decide_final([(cand, fbp(10, True))], 0.6, ["influenza"], ri_enabled=False).accepted == ()


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 40), st.integers(0, 40), st.booleans(), st.booleans(), st.floats(0, 1))
def test_acceptance_monotone_in_total(t1, t2, verdict, member, frac):
    lo, hi = sorted((t1, t2))
    origin = frozenset({LLM}) if member else frozenset({KG})
    cand = CandidateDisease("X", "x", 1.0, origin=origin)
    a_lo = decide_final([(cand, fbp(lo, verdict))], frac).accepted
    a_hi = decide_final([(cand, fbp(hi, verdict))], frac).accepted
    # a higher total never turns an accept into a reject, whatever the verdict
    assert len(a_hi) >= len(a_lo)


def test_audit_roundtrip():
    cand = CandidateDisease("X", None, origin=frozenset({LLM}))
    final = decide_final([(cand, None)], errors=["FbpParseError: bad"])
    from medikal.llm.decide import FinalDiagnosis
    assert FinalDiagnosis.from_dict(json.loads(json.dumps(final.to_dict()))) == final
    assert final.audit[0].rule == "unassessed-keep-llm"
