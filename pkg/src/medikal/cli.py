"""``medikal`` command line: run, eval, inspect."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .errors import MedikalError
from .evaluation import IcdTerminology
from .kg import load_graph
from .pipeline import (
    ENDPOINT_ENV, PipelineConfig, RecordResult, build_components, dumps, evaluate_results,
    load_config, record_filename, run_dataset,
)

log = logging.getLogger("medikal")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="medikal", description="KG-assisted diagnosis over EMR records.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the pipeline over a JSONL corpus")
    run.add_argument("--kg-nodes", required=True)
    run.add_argument("--kg-edges", required=True)
    run.add_argument("--emr", required=True)
    run.add_argument("--icd", required=True)
    run.add_argument("--config")
    run.add_argument("--out", required=True)
    run.add_argument("--llm", choices=("mock", "http"))
    run.add_argument("--llm-endpoint", help=f"falls back to ${ENDPOINT_ENV}")
    run.add_argument("--mock-responses")
    run.add_argument("--retriever", choices=("tfidf", "bm25", "embedding"))
    run.add_argument("--embedding-endpoint")
    run.add_argument("--extractor", choices=("gazetteer", "http"))
    run.add_argument("--ner-endpoint")
    run.add_argument("--gazetteer")
    run.add_argument("--weights")
    run.add_argument("--prompt-dir")
    run.add_argument("--topm", type=int)
    run.add_argument("--topn", type=int)
    run.add_argument("--path-cutoff", type=int)
    run.add_argument("--theta", type=float, dest="theta_fraction", help="acceptance fraction of 40")
    run.add_argument("--min-sim", type=float)
    run.add_argument("--icd-threshold", type=float)
    run.add_argument("--concurrency", type=int)
    run.add_argument("--assess-concurrency", type=int)
    run.add_argument("--record-timings", action="store_const", const=True)
    for flag in ("sum", "etw", "pr", "ri"):
        run.add_argument(f"--no-{flag}", dest=flag, action="store_const", const=False,
                         help=f"disable the {flag.upper()} stage")

    ev = sub.add_parser("eval", help="recompute metrics from persisted results")
    ev.add_argument("--results", required=True)
    ev.add_argument("--icd", required=True)
    ev.add_argument("--icd-threshold", type=float, default=0.5)
    ev.add_argument("--averaging", choices=("micro", "macro"), default="micro")

    ins = sub.add_parser("inspect", help="print one record's audit trail")
    ins.add_argument("--results", required=True)
    ins.add_argument("--id", required=True)
    ins.add_argument("--json", action="store_true", help="dump the raw result instead")
    return p


OVERRIDE_KEYS = (
    "llm", "llm_endpoint", "mock_responses", "retriever", "embedding_endpoint", "extractor",
    "ner_endpoint", "gazetteer", "weights", "prompt_dir", "topm", "topn", "path_cutoff",
    "theta_fraction", "min_sim", "icd_threshold", "concurrency", "assess_concurrency",
    "record_timings", "sum", "etw", "pr", "ri",
)


def _config(args: argparse.Namespace) -> PipelineConfig:
    base = load_config(args.config) if args.config else PipelineConfig()
    overrides = {k: getattr(args, k) for k in OVERRIDE_KEYS}
    return base.updated(**overrides)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _config(args)
    graph = load_graph(args.kg_nodes, args.kg_edges)
    icd = IcdTerminology.load(args.icd)
    comps = build_components(cfg, graph, icd)
    summary, code = run_dataset(args.emr, cfg, args.out, comps)
    m = summary["metrics"]
    print(f"records={summary['n_records']} errors={summary['n_errors']} "
          f"R={m['recall']:.4f} P={m['precision']:.4f} F1={m['f1']:.4f}")
    return code


def cmd_eval(args: argparse.Namespace) -> int:
    icd = IcdTerminology.load(args.icd)
    report = evaluate_results(args.results, icd, args.icd_threshold, args.averaging)
    sys.stdout.write(dumps(report["metrics"]))
    return 0


def _fmt_score(a: Optional[dict]) -> str:
    if a is None:
        return "unassessed"
    return (f"{a['chief_complaint_score']}+{a['history_score']}+{a['medication_score']}"
            f"+{a['exam_score']}={a['total']} verdict={'y' if a['verdict'] else 'n'}")


def render_audit(r: RecordResult) -> str:
    lines = [f"record {r.id}", f"labels: {', '.join(r.labels) or '-'}"]
    if r.error:
        lines.append(f"ERROR {r.error['type']}: {r.error['message']}")
    if r.summary:
        lines.append("summary:")
        lines += [f"  {k}: {v}" for k, v in r.summary.items() if k != "warnings"]
    lines.append(f"direct predictions: {', '.join(r.d_llm) or '-'}")
    lines.append("query set:")
    lines += [f"  {q['surface']} [{q['etype']}] -> {q['node_name']} ({q['node']}) sim={q['similarity']:.3f}"
              for q in r.query_set] or ["  -"]
    lines.append("graph candidates:")
    lines += [f"  {c['name']} kg={c['kg_score']:.4f}" for c in r.d_g] or ["  -"]
    lines.append("reranked:")
    lines += [f"  {c['name']} path={c['path_score']:.4f} kg={c['kg_score']:.4f} origin={'+'.join(c['origin'])}"
              for c in r.d_rerank] or ["  -"]
    lines.append("assessments:")
    for a in r.final["audit"]:
        note = f" error={a['error']}" if a.get("error") else ""
        lines.append(f"  {a['name']}: {_fmt_score(a['assessment'])} rule={a['rule']} "
                     f"accepted={a['accepted']}{note}")
    lines.append(f"final: {', '.join(r.final['accepted']) or '-'}")
    m = r.metrics
    if m:
        lines.append(f"metrics: tp={m['tp']} fp={m['fp']} fn={m['fn']} f1={m['f1']:.4f}")
    for w in r.warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def cmd_inspect(args: argparse.Namespace) -> int:
    path = Path(args.results) / "records" / record_filename(args.id)
    if not path.is_file():
        print(f"no result for record {args.id!r} under {args.results}", file=sys.stderr)
        return 1
    result = RecordResult.from_json(path.read_text(encoding="utf-8"))
    sys.stdout.write(result.to_json() if args.json else render_audit(result))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "eval": cmd_eval, "inspect": cmd_inspect}[args.command]
    try:
        return handler(args)
    except (MedikalError, OSError, json.JSONDecodeError) as exc:
        print(f"medikal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
