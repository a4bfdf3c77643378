"""Per-record orchestration of every stage, corpus runs, and result persistence."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import time
import urllib.parse
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from .errors import ConfigError, CorpusNotFound, EmptyCorpus, FbpParseError, MalformedRecord, MedikalError, PromptBudgetExceeded
from .evaluation import IcdTerminology, Metrics, aggregate, compute_metrics, normalize_to_icd
from .kg import KnowledgeGraph
from .linking import Extractor, GazetteerExtractor, HttpExtractor, QuerySet, build_query_set, load_gazetteer
from .llm import ChatClient, HttpChatClient, MockChatClient, PromptSet, decide_final
from .llm.parsing import FbpAssessment
from .llm.stages import assess_candidate, direct_diagnose, fit_evidence, render_assess_prompt, summarize
from .localization import TypeWeights, localize_candidates, merge_candidates
from .reconstruction import collect_evidence, render_evidence
from .records import EmrRecord, SummaryReport
from .rerank import DistanceCache, rerank_candidates
from .retrieval import Retriever, make_retriever
from .types import AspectCategory

log = logging.getLogger(__name__)

ENDPOINT_ENV = "MEDIKAL_LLM_ENDPOINT"


@dataclass
class PipelineConfig:
    topm: int = 10
    topn: int = 3
    path_cutoff: int = 4
    theta_fraction: float = 0.6
    min_sim: float = 0.5
    icd_threshold: float = 0.5
    n_direct: int = 3
    retriever: str = "tfidf"
    extractor: str = "gazetteer"
    llm: str = "mock"
    llm_endpoint: Optional[str] = None
    embedding_endpoint: Optional[str] = None
    ner_endpoint: Optional[str] = None
    gazetteer: Optional[str] = None
    weights: Optional[str] = None
    mock_responses: Optional[str] = None
    prompt_dir: Optional[str] = None
    sum: bool = True
    etw: bool = True
    pr: bool = True
    ri: bool = True
    concurrency: int = 1
    assess_concurrency: int = 1
    prompt_budget: int = 12000
    timeout: float = 60.0
    averaging: str = "micro"
    record_timings: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("topm", "topn", "path_cutoff", "n_direct", "concurrency", "assess_concurrency",
                     "prompt_budget"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0.0 <= self.theta_fraction <= 1.0:
            raise ConfigError("theta_fraction must lie in [0, 1]")
        for name in ("min_sim", "icd_threshold"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.icd_threshold == 0.0:
            raise ConfigError("icd_threshold must be > 0")
        if self.retriever not in ("tfidf", "bm25", "embedding"):
            raise ConfigError(f"unknown retriever {self.retriever!r}")
        if self.extractor not in ("gazetteer", "http"):
            raise ConfigError(f"unknown extractor {self.extractor!r}")
        if self.llm not in ("mock", "http"):
            raise ConfigError(f"unknown llm transport {self.llm!r}")
        if self.averaging not in ("micro", "macro"):
            raise ConfigError("averaging must be micro or macro")

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> "PipelineConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(known[key], value)
        return cls(**kwargs)

    def updated(self, **overrides: Any) -> "PipelineConfig":
        merged = {**dataclasses.asdict(self), **{k: v for k, v in overrides.items() if v is not None}}
        return PipelineConfig.from_mapping(merged)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(f: dataclasses.Field, value: Any) -> Any:
    kind = str(f.type)
    if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none", "null")
                         and "Optional" in kind):
        return None
    try:
        if kind.startswith("bool"):
            if isinstance(value, str):
                low = value.strip().lower()
                if low in ("true", "yes", "1", "on"):
                    return True
                if low in ("false", "no", "0", "off"):
                    return False
                raise ValueError(value)
            return bool(value)
        if kind.startswith("int"):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if kind.startswith("float"):
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {f.name}: {value!r}") from None
    return str(value)


PATH_KEYS = ("mock_responses", "gazetteer", "weights", "prompt_dir")


def load_config(path: str | os.PathLike) -> PipelineConfig:
    """Read a flat config: a JSON object, or ``key = value`` lines (``#`` comments allowed)."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    else:
        data = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            sep = "=" if "=" in line else ":"
            if sep not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split(sep, 1))
            data[key] = value.strip('"').strip("'")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a flat object")
    # file paths inside a config resolve against the config's own directory
    root = Path(path).resolve().parent
    for key in PATH_KEYS:
        value = data.get(key)
        if isinstance(value, str) and value.strip() and not Path(value).is_absolute():
            data[key] = str(root / value)
    return PipelineConfig.from_mapping(data)


@dataclass
class Components:
    graph: KnowledgeGraph
    extractor: Extractor
    retriever: Retriever
    client: ChatClient
    prompts: PromptSet
    weights: TypeWeights
    icd: IcdTerminology


def build_components(config: PipelineConfig, graph: KnowledgeGraph, icd: IcdTerminology,
                     client: Optional[ChatClient] = None) -> Components:
    if config.extractor == "gazetteer":
        extra = load_gazetteer(config.gazetteer) if config.gazetteer else None
        extractor: Extractor = GazetteerExtractor.from_graph(graph, extra)
    else:
        if not config.ner_endpoint:
            raise ConfigError("extractor 'http' needs ner_endpoint")
        extractor = HttpExtractor(config.ner_endpoint, config.timeout)
    retriever = make_retriever(config.retriever, graph.names, config.embedding_endpoint, config.timeout)
    retriever.prepare(graph.names)
    if client is None:
        if config.llm == "mock":
            if not config.mock_responses:
                raise ConfigError("mock transport needs mock_responses")
            client = MockChatClient.load(config.mock_responses)
        else:
            endpoint = config.llm_endpoint or os.environ.get(ENDPOINT_ENV)
            if not endpoint:
                raise ConfigError(f"http transport needs llm_endpoint or ${ENDPOINT_ENV}")
            client = HttpChatClient(endpoint, config.timeout)
    weights = TypeWeights.load(config.weights) if config.weights else TypeWeights()
    prompts = PromptSet.load(config.prompt_dir)
    return Components(graph, extractor, retriever, client, prompts, weights, icd)


# -- results -----------------------------------------------------------------

RESULT_FIELDS = (
    "id", "labels", "summary", "d_llm", "query_set", "unlinked", "d_g", "d_can", "d_rerank",
    "evidence", "final", "metrics", "warnings", "error", "timing",
)


@dataclass
class RecordResult:
    """Everything one record produced, as JSON-ready values."""

    id: str
    labels: list[str] = field(default_factory=list)
    summary: Optional[dict] = None
    d_llm: list[str] = field(default_factory=list)
    query_set: list[dict] = field(default_factory=list)
    unlinked: list[dict] = field(default_factory=list)
    d_g: list[dict] = field(default_factory=list)
    d_can: list[dict] = field(default_factory=list)
    d_rerank: list[dict] = field(default_factory=list)
    evidence: list[dict] = field(default_factory=list)
    final: dict = field(default_factory=lambda: {"accepted": [], "audit": []})
    metrics: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    error: Optional[dict] = None
    timing: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in RESULT_FIELDS}

    @classmethod
    def from_dict(cls, data: dict) -> "RecordResult":
        return cls(**{name: data[name] for name in RESULT_FIELDS if name in data})

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RecordResult":
        return cls.from_dict(json.loads(text))


def dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def _query_rows(qs: QuerySet, graph: KnowledgeGraph) -> list[dict]:
    return [
        {
            "surface": e.surface,
            "etype": e.etype.value,
            "aspect": e.aspect.value if e.aspect else None,
            "node": e.node,
            "node_name": graph.name(e.node),
            "similarity": e.similarity,
        }
        for e in qs
    ]


def score_names(accepted: Sequence[str], labels: Sequence[str], icd: IcdTerminology,
                threshold: float) -> dict:
    pred = normalize_to_icd(accepted, icd, threshold)
    ref = normalize_to_icd(labels, icd, threshold)
    m = compute_metrics(pred, ref)
    return {**m.to_dict(), "pred_codes": sorted(pred), "ref_codes": sorted(ref)}


def run_record(record: EmrRecord, comps: Components, config: PipelineConfig) -> RecordResult:
    """Run every stage for one record; failures land in ``result.error``."""
    res = RecordResult(id=record.id, labels=list(record.diagnosis_labels))
    graph = comps.graph
    clock = time.perf_counter
    timing: dict[str, float] = {}

    def timed(stage: str, fn, *args, **kwargs):
        t0 = clock()
        try:
            return fn(*args, **kwargs)
        finally:
            timing[stage] = clock() - t0

    try:
        summary: SummaryReport = timed("summarize", summarize, record, comps.client, comps.prompts,
                                       enabled=config.sum)
        res.summary = summary.to_dict()
        res.warnings.extend(summary.warnings)

        d_llm, warns = timed("direct_diagnose", direct_diagnose, summary, comps.client, comps.prompts,
                             config.n_direct, record.id)
        res.d_llm = d_llm
        res.warnings.extend(warns)

        qs = timed("link", build_query_set, summary, graph, comps.extractor, comps.retriever,
                   config.min_sim)
        res.query_set = _query_rows(qs, graph)
        res.unlinked = [{"surface": e.surface, "etype": e.etype.value,
                         "aspect": e.aspect.value if e.aspect else None} for e in qs.unlinked]

        weights = comps.weights if config.etw else TypeWeights.uniform()
        d_g = timed("localize", localize_candidates, qs, graph, weights, config.topm)
        res.d_g = [c.to_dict() for c in d_g]

        residual = d_llm if config.ri else []
        d_can = timed("merge", merge_candidates, residual, d_g, graph, comps.retriever, config.min_sim)
        res.d_can = [c.to_dict() for c in d_can]

        cache = DistanceCache(graph, config.path_cutoff)
        d_rerank = timed("rerank", rerank_candidates, d_can, qs, graph, config.topn, config.path_cutoff,
                         enabled=config.pr, cache=cache)
        res.d_rerank = [c.to_dict() for c in d_rerank]

        t0 = clock()
        prepared = []
        for cand in d_rerank:
            ev = collect_evidence(cand, qs, graph, config.path_cutoff, cache)

            def fits(blocks, cand=cand):
                system, user = render_assess_prompt(comps.prompts, summary, blocks, cand.name)
                return len(system) + len(user) <= config.prompt_budget

            try:
                ev, dropped = fit_evidence(ev, fits)
                prepared.append((cand, render_evidence(ev), [it.to_dict() for it in dropped], None))
            except PromptBudgetExceeded as exc:
                prepared.append((cand, render_evidence(ev), [], str(exc)))
        res.evidence = [
            {"disease": cand.name, "node": cand.node,
             "blocks": {a.value: blocks[a] for a in AspectCategory}, "dropped": dropped}
            for cand, blocks, dropped, _ in prepared
        ]
        timing["reconstruct"] = clock() - t0

        def assess(item) -> tuple[Optional[FbpAssessment], Optional[str]]:
            cand, blocks, _, err = item
            if err is not None:
                return None, err
            try:
                return assess_candidate(summary, blocks, cand.name, comps.client, comps.prompts,
                                        record_id=record.id, budget=config.prompt_budget), None
            except (FbpParseError, PromptBudgetExceeded) as exc:
                return None, f"{type(exc).__name__}: {exc}"

        t0 = clock()
        if config.assess_concurrency > 1 and len(prepared) > 1:
            with ThreadPoolExecutor(max_workers=config.assess_concurrency) as pool:
                outcomes = list(pool.map(assess, prepared))
        else:
            outcomes = [assess(item) for item in prepared]
        timing["assess"] = clock() - t0

        final = decide_final(
            [(cand, a) for (cand, *_), (a, _) in zip(prepared, outcomes)],
            config.theta_fraction, residual, ri_enabled=config.ri,
            errors=[e for _, e in outcomes],
        )
        res.final = final.to_dict()
    except Exception as exc:  # one bad record must not sink the corpus
        if not isinstance(exc, MedikalError):
            log.exception("unexpected failure on record %s", record.id)
        res.error = {"type": type(exc).__name__, "message": str(exc)}

    res.metrics = score_names(res.final["accepted"], record.diagnosis_labels, comps.icd,
                              config.icd_threshold)
    if config.record_timings:
        res.timing = {k: round(v, 6) for k, v in timing.items()}
    return res


# -- corpus ------------------------------------------------------------------


def read_corpus(path: str | os.PathLike) -> list[EmrRecord]:
    p = Path(path)
    if not p.is_file():
        raise CorpusNotFound(f"corpus file {path} not found")
    records: list[EmrRecord] = []
    seen: set[str] = set()
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(data, dict) or not str(data.get("id", "")).strip():
                raise MalformedRecord(lineno, "record needs a non-empty 'id'")
            rec = EmrRecord.from_dict(data)
            if rec.id in seen:
                raise MalformedRecord(lineno, f"duplicate record id {rec.id!r}")
            seen.add(rec.id)
            records.append(rec)
    if not records:
        raise EmptyCorpus(f"{path} has no records")
    return records


def record_filename(record_id: str) -> str:
    return urllib.parse.quote(record_id, safe="") + ".json"


def corpus_metrics(results: Sequence[RecordResult], mode: str = "micro") -> dict:
    per = [Metrics(r.metrics["tp"], r.metrics["fp"], r.metrics["fn"]) for r in results]
    return aggregate(per, mode).to_dict()


def run_dataset(corpus_path: str | os.PathLike, config: PipelineConfig, out_dir: str | os.PathLike,
                comps: Components) -> tuple[dict, int]:
    """Run the whole corpus and write ``records/<id>.json`` plus ``summary.json``.

    Returns the summary and an exit code (0 iff no record hit an error).
    """
    records = read_corpus(corpus_path)
    out = Path(out_dir)
    (out / "records").mkdir(parents=True, exist_ok=True)

    def work(rec: EmrRecord) -> RecordResult:
        return run_record(rec, comps, config)

    results: list[RecordResult] = []
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        # the main thread is the only writer; files land in corpus order
        for res in pool.map(work, records):
            (out / "records" / record_filename(res.id)).write_text(res.to_json(), encoding="utf-8")
            results.append(res)

    errors = {r.id: r.error["type"] for r in results if r.error}
    summary = {
        "records": [r.id for r in results],
        "n_records": len(results),
        "n_errors": len(errors),
        "errors": errors,
        "metrics": corpus_metrics(results, "micro"),
        "macro_metrics": corpus_metrics(results, "macro"),
        "averaging": config.averaging,
        "config": {k: v for k, v in config.to_dict().items()
                   if k not in PATH_KEYS},
    }
    (out / "summary.json").write_text(dumps(summary), encoding="utf-8")
    return summary, (1 if errors else 0)


def load_results(results_dir: str | os.PathLike) -> list[RecordResult]:
    base = Path(results_dir)
    summary_path = base / "summary.json"
    if summary_path.is_file():
        ids = json.loads(summary_path.read_text(encoding="utf-8"))["records"]
        paths = [base / "records" / record_filename(i) for i in ids]
    else:
        paths = sorted((base / "records").glob("*.json"))
    if not paths:
        raise EmptyCorpus(f"no record results under {results_dir}")
    return [RecordResult.from_json(p.read_text(encoding="utf-8")) for p in paths]


def evaluate_results(results_dir: str | os.PathLike, icd: IcdTerminology,
                     threshold: float = 0.5, mode: str = "micro") -> dict:
    """Rescore persisted results against a (possibly different) ICD terminology."""
    results = load_results(results_dir)
    per = []
    rows = {}
    for r in results:
        scored = score_names(r.final["accepted"], r.labels, icd, threshold)
        per.append(Metrics(scored["tp"], scored["fp"], scored["fn"]))
        rows[r.id] = scored
    return {"metrics": aggregate(per, mode).to_dict(), "records": rows}
