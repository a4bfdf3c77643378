"""Toy-corpus metrics with each stage switched off in turn, laid out like an ablation table.

    python3 scripts/ablation_table.py [--all]

``--all`` prints every one of the 16 on/off combinations. The toy corpus has
three records, so the numbers show which stages matter on it, not how much.
"""

from __future__ import annotations

import argparse
import itertools
import logging

from medikal import toy_paths
from medikal.evaluation import IcdTerminology
from medikal.kg import load_graph
from medikal.pipeline import build_components, corpus_metrics, load_config, read_corpus, run_record

FLAGS = ("sum", "etw", "pr", "ri")


def evaluate(cfg, graph, icd, records):
    comps = build_components(cfg, graph, icd)
    results = [run_record(r, comps, cfg) for r in records]
    m = corpus_metrics(results)
    accepted = {r.id: r.final["accepted"] for r in results}
    return m, accepted


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--all", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR)
    toy = toy_paths()
    graph = load_graph(toy["nodes"], toy["edges"])
    icd = IcdTerminology.load(toy["icd"])
    records = read_corpus(toy["emr"])
    base = load_config(toy["config"])
    if args.all:
        rows = [(" ".join(f for f, on in zip(FLAGS, combo) if not on) or "full",
                 dict(zip(FLAGS, combo))) for combo in itertools.product((True, False), repeat=4)]
    else:
        rows = [("full", {})] + [(f"w/o {f.upper()}", {f: False}) for f in FLAGS]
    print(f"{'setting':<16}{'R':>8}{'P':>8}{'F1':>8}  accepted")
    for label, overrides in rows:
        m, accepted = evaluate(base.updated(**overrides), graph, icd, records)
        finals = "; ".join(f"{k}: {', '.join(v) or '-'}" for k, v in accepted.items())
        print(f"{label:<16}{m['recall']:>8.4f}{m['precision']:>8.4f}{m['f1']:>8.4f}  {finals}")


if __name__ == "__main__":
    main()
