"""Regenerate the toy mock-response file and golden outputs.

The summary, exam and diagnosis replies and the per-candidate score table
below are hand-written. The script runs the pipeline under every ablation
setting to discover which assessment keys are needed. It then writes one
reply per key, rotating through reply formats so the parser sees variety.

    python3 scripts/build_toy_fixtures.py            # rewrite mock_responses.json
    python3 scripts/build_toy_fixtures.py --golden   # also refresh golden records
"""

from __future__ import annotations

import argparse
import itertools
import shutil
import tempfile
from pathlib import Path

from medikal.evaluation import IcdTerminology
from medikal.kg import load_graph
from medikal.pipeline import PipelineConfig, build_components, dumps, load_config, read_corpus, run_dataset

TOY = Path(__file__).resolve().parents[1] / "src" / "medikal" / "data" / "toy"

SUMMARY = {
    "r001": (
        "1. Main symptoms: [fever up to 39.2C for three days, cough, sore throat, headache, muscle aches]\n"
        "2. Recent medical visits: [none]\n"
        "3. Past medical history: [none]\n"
        "4. Past surgical history: [none]\n"
        "5. Medication usage: [none]"
    ),
    "r002": (
        "Here is the report.\n"
        "1. Main symptoms: fatigue, dizziness and pale skin for two months; epigastric pain after meals; "
        "black stools for two weeks\n"
        "2. Recent medical visits: none\n"
        "3. Past medical history: knee pain\n"
        "4. Past surgical history: none\n"
        "5. Medication usage： daily ibuprofen"
    ),
    # item 4 left out on purpose: the parser fills "none" and warns
    "r003": (
        "1. Main symptoms: [thirst, frequent urination and weight loss for six months; occasional headache "
        "and dizziness]\n"
        "2. Recent medical visits: [none]\n"
        "3. Past medical history: [hypertension for five years]\n"
        "5. Medication usage: [amlodipine]"
    ),
}

EXAM = {
    "r001": "High fever 39.0C; congested pharynx; lungs clear; influenza antigen test positive.",
    "r002": "Conjunctival pallor; epigastric tenderness; hemoglobin 82 g/L; low serum ferritin; "
            "gastroscopy shows a gastric ulcer.",
    "r003": "Blood pressure 162/96 mmHg; fasting blood glucose 11.2 mmol/L; HbA1c 8.5%.",
}

DIAGNOSE = {
    "r001": "Predicted Disease 1: [Influenza]  Predicted Disease 2: [Common cold]  "
            "Predicted Disease 3: [Acute bronchitis]",
    "r002": "Predicted Disease 1: Iron deficiency anaemia\nPredicted Disease 2: Peptic ulcer\n"
            "Predicted Disease 3: Haemorrhoids",
    "r003": "Predicted Disease 1: 【Type 2 diabetes】\nPredicted Disease 2: 【Diabetic nephropathy】\n"
            "Predicted Disease 3: 【Type 2 diabetes】",
}

# (record, disease) -> (four scores, verdict, misleading note)
SCORES = {
    ("r001", "influenza"): ((9, 8, 8, 9), True, None),
    ("r001", "common cold"): ((6, 5, 5, 3), False, None),
    ("r001", "acute bronchitis"): ((4, 5, 5, 3), False, None),
    ("r001", "pneumonia"): ((5, 5, 5, 4), False, "lungs are clear on examination"),
    ("r002", "iron deficiency anemia"): ((9, 8, 7, 9), True, None),
    ("r002", "gastric ulcer"): ((8, 7, 7, 9), True, None),
    ("r002", "peptic ulcer"): ((6, 6, 5, 7), False, None),
    ("r002", "haemorrhoids"): ((3, 2, 2, 1), False, None),
    ("r003", "type 2 diabetes"): ((9, 8, 8, 9), True, None),
    ("r003", "hypertension"): ((8, 9, 9, 7), True, None),
    ("r003", "diabetic nephropathy"): ((3, 3, 4, 2), False, None),
    ("r003", "coronary heart disease"): ((3, 4, 5, 2), True, None),
}
DEFAULT_SCORE = ((2, 3, 2, 2), False, None)


def render_assessment(scores, verdict, note, style: int) -> str:
    a, b, c, d = scores
    yn = "y" if verdict else "n"
    note_text = note or "none"
    if style == 0:
        return (f"1.Consistency with the patient's chief complaint score: [{a}] (out of 10)\n"
                f"2.Correlation with the patient's medical history score: [{b}] (out of 10)\n"
                f"3.Correlation with the patient's medication usage score: [{c}] (out of 10)\n"
                f"4.Correlation with the patient's examination results score: [{d}] (out of 10)\n"
                f"5.Is anything in the \"Correlation Information\" section wrong or misleading: [{note_text}]\n"
                f"6.Can this disease be used as a diagnostic result: [{yn}] (y/n)")
    if style == 1:
        return (f"1. Chief complaint score：【{a}】（满分10分）\n"
                f"2. Medical history score：【{b}】\n"
                f"3. Medication score：［{c}］\n"
                f"4. Examination score：【{d}】\n"
                f"5. Misleading information：【{note_text}】\n"
                f"6. Diagnostic result：【{'yes' if verdict else 'no'}】")
    if style == 2:
        return (f"4. Examination results: {d}/10\n"
                f"1. Chief complaint: {a}/10\n"
                f"3. Medication usage: {c}/10\n"
                f"2. Medical history: {b}/10\n"
                f"6. Diagnostic result: {yn}\n"
                f"5. Misleading: {note_text}")
    return f"Scores {a},{b},{c},{d}; {yn}"


class RecordingClient:
    """Answers from the hand-written tables and remembers every key it served."""

    def __init__(self):
        self.used: dict[str, str] = {}

    def complete(self, system: str, user: str, *, key: str = "") -> str:
        stage, rid, *rest = key.split(":", 2)
        if stage == "summary":
            text = SUMMARY[rid]
        elif stage == "exam":
            text = EXAM[rid]
        elif stage == "diagnose":
            text = DIAGNOSE[rid]
        else:
            disease = rest[0]
            scores, verdict, note = SCORES.get((rid, disease.casefold()), DEFAULT_SCORE)
            style = sum(map(ord, key)) % 4
            text = render_assessment(scores, verdict, note, style)
        self.used[key] = text
        return text


ABLATIONS = ("sum", "etw", "pr", "ri")


def ablation_configs(base: PipelineConfig):
    for flags in itertools.product((True, False), repeat=len(ABLATIONS)):
        yield base.updated(**dict(zip(ABLATIONS, flags)))


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--golden", action="store_true")
    args = ap.parse_args()

    graph = load_graph(TOY / "nodes.tsv", TOY / "edges.tsv")
    icd = IcdTerminology.load(TOY / "icd.tsv")
    base = load_config(TOY / "config.json")
    client = RecordingClient()
    records = read_corpus(TOY / "emr.jsonl")
    assert {r.id for r in records} == set(SUMMARY)
    with tempfile.TemporaryDirectory() as tmp:
        for cfg in ablation_configs(base):
            comps = build_components(cfg, graph, icd, client=client)
            run_dataset(TOY / "emr.jsonl", cfg, Path(tmp) / "out", comps)
    responses = dict(sorted(client.used.items()))
    (TOY / "mock_responses.json").write_text(dumps(responses), encoding="utf-8")
    print(f"wrote {len(responses)} mock responses")

    if args.golden:
        cfg = load_config(TOY / "config.json")
        comps = build_components(cfg, graph, icd)
        golden = TOY / "golden"
        if golden.exists():
            shutil.rmtree(golden)
        run_dataset(TOY / "emr.jsonl", cfg, golden, comps)
        print(f"refreshed golden outputs under {golden}")


if __name__ == "__main__":
    main()
