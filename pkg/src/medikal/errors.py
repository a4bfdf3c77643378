"""Exception hierarchy.

Every error a single record can hit derives from :class:`MedikalError`, so the
pipeline can record it in the result and keep going with the rest of the corpus.
"""

from __future__ import annotations


class MedikalError(Exception):
    """Base class for all package errors."""


class GraphLoadError(MedikalError):
    pass


class DuplicateNodeId(GraphLoadError):
    pass


class UnknownEntityType(GraphLoadError):
    pass


class DanglingEdge(GraphLoadError):
    pass


class MalformedRow(GraphLoadError):
    def __init__(self, source: str, line: int, reason: str):
        super().__init__(f"{source}:{line}: {reason}")
        self.source = source
        self.line = line
        self.reason = reason


class UnknownNode(MedikalError, KeyError):
    def __str__(self) -> str:  # KeyError would repr() the message
        return str(self.args[0]) if self.args else "unknown node"


class ExtractorUnavailable(MedikalError):
    pass


class RetrieverError(MedikalError):
    pass


class LlmTransportError(MedikalError):
    pass


class MockResponseMissing(LlmTransportError):
    """No fixture for a scenario key; fatal in mock mode so fixtures cannot drift."""


class SummaryParseError(MedikalError):
    pass


class FbpParseError(MedikalError):
    pass


class PromptBudgetExceeded(MedikalError):
    pass


class EmptyCorpus(MedikalError):
    pass


class CorpusNotFound(MedikalError):
    pass


class MalformedRecord(MedikalError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class ConfigError(MedikalError):
    pass
