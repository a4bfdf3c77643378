from .client import ChatClient, HttpChatClient, MockChatClient
from .decide import CandidateAudit, FinalDiagnosis, decide_final
from .parsing import FbpAssessment, parse_fbp, parse_predictions, parse_summary
from .prompts import PromptSet
from .stages import assess_candidate, direct_diagnose, fit_evidence, summarize

__all__ = [
    "ChatClient", "HttpChatClient", "MockChatClient", "CandidateAudit", "FinalDiagnosis",
    "decide_final", "FbpAssessment", "parse_fbp", "parse_predictions", "parse_summary",
    "PromptSet", "assess_candidate", "direct_diagnose", "fit_evidence", "summarize",
]
