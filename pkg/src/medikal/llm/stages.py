"""LLM-facing pipeline stages: summarisation, direct diagnosis, and candidate assessment."""

from __future__ import annotations

import logging
from typing import Callable, Mapping, Optional

from ..errors import PromptBudgetExceeded
from ..reconstruction import DiseaseEvidence, EvidenceItem, render_evidence
from ..records import NONE_TEXT, EmrRecord, SummaryReport
from ..types import AspectCategory
from .client import ChatClient
from .parsing import FbpAssessment, parse_fbp, parse_predictions, parse_summary
from .prompts import PromptSet

log = logging.getLogger(__name__)

DEFAULT_PROMPT_BUDGET = 12000


def _or_none(text: str) -> str:
    return text.strip() if text and text.strip() else NONE_TEXT


def summarize(record: EmrRecord, client: ChatClient, prompts: PromptSet,
              enabled: bool = True) -> SummaryReport:
    """Two calls: the basic-condition report and the exam summary.

    With ``enabled=False`` the raw record fields are used directly and the
    client is never called.
    """
    if not enabled:
        exam = "\n".join(t.strip() for t in (record.pe, record.lae) if t and t.strip())
        return SummaryReport(
            main_symptoms=_or_none(record.hpi),
            past_medical_history=_or_none(record.pmh),
            exam_summary=_or_none(exam),
        )
    system, user = prompts.render("summary", hpi=record.hpi or NONE_TEXT, pmh=record.pmh or NONE_TEXT)
    report = parse_summary(client.complete(system, user, key=f"summary:{record.id}"))
    for w in report.warnings:
        log.warning("%s: %s", record.id, w)
    system, user = prompts.render("exam", pe=record.pe or NONE_TEXT, lae=record.lae or NONE_TEXT)
    exam = client.complete(system, user, key=f"exam:{record.id}")
    return SummaryReport(**{**report.to_dict(), "exam_summary": _or_none(exam),
                            "warnings": report.warnings})


def direct_diagnose(summary: SummaryReport, client: ChatClient, prompts: PromptSet, n: int = 3,
                    record_id: str = "") -> tuple[list[str], list[str]]:
    """The LLM's own top-``n`` predictions, plus any parse warnings."""
    if n < 1:
        raise ValueError("n must be >= 1")
    system, user = prompts.render("diagnose", summary_1=summary.general_condition(),
                                  summary_2=summary.exam_summary, n=n)
    names, warnings = parse_predictions(client.complete(system, user, key=f"diagnose:{record_id}"), n)
    for w in warnings:
        log.warning("%s: %s", record_id, w)
    return names, warnings


def render_assess_prompt(prompts: PromptSet, summary: SummaryReport,
                         blocks: Mapping[AspectCategory, str], disease: str) -> tuple[str, str]:
    return prompts.render(
        "assess",
        summary_1=summary.general_condition(),
        summary_2=summary.exam_summary,
        disease=disease,
        correlation_1=blocks[AspectCategory.MAIN_SYMPTOMS],
        correlation_2=blocks[AspectCategory.MEDICAL_HISTORY],
        correlation_3=blocks[AspectCategory.MEDICATION],
        correlation_4=blocks[AspectCategory.EXAM_RESULTS],
    )


def _drop_order(evidence: DiseaseEvidence) -> list[tuple[AspectCategory, int]]:
    """Least similar first; among equals the farther, then the later item goes first."""
    keyed = []
    pos = 0
    for aspect in AspectCategory:
        for j, it in enumerate(evidence.per_aspect[aspect]):
            far = it.distance if it.distance is not None else 10**9
            keyed.append(((it.similarity, -far, -pos), (aspect, j)))
            pos += 1
    return [ref for _, ref in sorted(keyed)]


def fit_evidence(
    evidence: DiseaseEvidence,
    fits: Callable[[Mapping[AspectCategory, str]], bool],
) -> tuple[DiseaseEvidence, list[EvidenceItem]]:
    """Drop evidence items (least similar first) until the rendered blocks satisfy ``fits``."""
    order = _drop_order(evidence)
    removed: set[tuple[AspectCategory, int]] = set()
    dropped: list[EvidenceItem] = []

    def current() -> DiseaseEvidence:
        return DiseaseEvidence(evidence.disease, {
            a: tuple(it for j, it in enumerate(evidence.per_aspect[a]) if (a, j) not in removed)
            for a in AspectCategory
        })

    trimmed = evidence
    for ref in order:
        if fits(render_evidence(trimmed)):
            break
        removed.add(ref)
        dropped.append(evidence.per_aspect[ref[0]][ref[1]])
        trimmed = current()
    if not fits(render_evidence(trimmed)):
        raise PromptBudgetExceeded("assessment prompt exceeds the budget even with no evidence")
    if dropped:
        log.info("trimmed %d evidence item(s) for %s to fit the prompt budget",
                 len(dropped), evidence.disease.name)
    return trimmed, dropped


def assess_candidate(
    summary: SummaryReport,
    blocks: Mapping[AspectCategory, str],
    disease: str,
    client: ChatClient,
    prompts: PromptSet,
    *,
    record_id: str = "",
    budget: Optional[int] = None,
) -> FbpAssessment:
    """One assessment call for one candidate; raises FbpParseError on an unusable reply."""
    system, user = render_assess_prompt(prompts, summary, blocks, disease)
    if budget is not None and len(system) + len(user) > budget:
        raise PromptBudgetExceeded(f"assessment prompt for {disease!r} is {len(system) + len(user)} chars")
    return parse_fbp(client.complete(system, user, key=f"assess:{record_id}:{disease}"))
