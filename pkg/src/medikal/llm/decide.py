"""Threshold + self-consistency acceptance rule for assessed candidates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from ..kg import normalize_name
from ..localization import LLM, CandidateDisease
from .parsing import FbpAssessment

MAX_TOTAL = 40
DEFAULT_THETA_FRACTION = 0.6


@dataclass(frozen=True)
class CandidateAudit:
    name: str
    node: Optional[str]
    origin: tuple[str, ...]
    assessment: Optional[FbpAssessment]
    error: Optional[str]
    threshold_pass: Optional[bool]
    verdict: Optional[bool]
    in_llm: bool
    accepted: bool
    rule: str

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "node": self.node,
            "origin": list(self.origin),
            "assessment": self.assessment.to_dict() if self.assessment else None,
            "error": self.error,
            "threshold_pass": self.threshold_pass,
            "verdict": self.verdict,
            "in_llm": self.in_llm,
            "accepted": self.accepted,
            "rule": self.rule,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CandidateAudit":
        a = d.get("assessment")
        return cls(d["name"], d.get("node"), tuple(d["origin"]),
                   FbpAssessment.from_dict(a) if a else None, d.get("error"),
                   d.get("threshold_pass"), d.get("verdict"), d["in_llm"], d["accepted"], d["rule"])


@dataclass(frozen=True)
class FinalDiagnosis:
    accepted: tuple[str, ...]
    audit: tuple[CandidateAudit, ...]

    def to_dict(self) -> dict:
        return {"accepted": list(self.accepted), "audit": [a.to_dict() for a in self.audit]}

    @classmethod
    def from_dict(cls, d: dict) -> "FinalDiagnosis":
        return cls(tuple(d["accepted"]), tuple(CandidateAudit.from_dict(a) for a in d["audit"]))


def decide_one(
    assessment: Optional[FbpAssessment], theta: float, in_llm: bool
) -> tuple[bool, Optional[bool], str]:
    """``(accepted, threshold_pass, rule)`` for one candidate; ``None`` assessment = unassessed."""
    if assessment is None:
        return in_llm, None, "unassessed-keep-llm" if in_llm else "unassessed-drop"
    passed = assessment.total >= theta - 1e-9
    if passed and assessment.verdict:
        return True, passed, "agree-accept"
    if not passed and not assessment.verdict:
        return False, passed, "agree-reject"
    return in_llm, passed, "disagree-keep-llm" if in_llm else "disagree-drop"


def decide_final(
    assessments: Sequence[tuple[CandidateDisease, Optional[FbpAssessment]]],
    theta_fraction: float = DEFAULT_THETA_FRACTION,
    d_llm: Sequence[str] = (),
    *,
    ri_enabled: bool = True,
    errors: Optional[Sequence[Optional[str]]] = None,
) -> FinalDiagnosis:
    """Accept a candidate when its total clears ``theta_fraction * 40`` and the verdict is yes.

    If the score and the verdict disagree, or the candidate could not be
    assessed, it is kept only when it was one of the LLM's own predictions.
    The LLM-membership fallback is off when residual integration is disabled.
    """
    if not 0.0 <= theta_fraction <= 1.0:
        raise ValueError("theta_fraction must lie in [0, 1]")
    theta = theta_fraction * MAX_TOTAL
    llm_names = {normalize_name(n) for n in d_llm}
    accepted: list[str] = []
    audit: list[CandidateAudit] = []
    for i, (cand, assessment) in enumerate(assessments):
        in_llm = ri_enabled and (LLM in cand.origin or normalize_name(cand.name) in llm_names)
        ok, passed, rule = decide_one(assessment, theta, in_llm)
        if ok:
            accepted.append(cand.name)
        audit.append(CandidateAudit(
            cand.name, cand.node, tuple(sorted(cand.origin)), assessment,
            errors[i] if errors else None, passed,
            assessment.verdict if assessment else None, in_llm, ok, rule,
        ))
    return FinalDiagnosis(tuple(accepted), tuple(audit))
