"""Parsers for model replies: summary reports, direct predictions, and assessment forms."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from ..errors import FbpParseError
from ..kg import normalize_name
from ..records import NONE_TEXT, SummaryReport

OPEN = "[【［"
_BRACKET = re.compile(r"[\[【［]([^\]】］]*)[\]】］]")

_SUMMARY_ITEM = re.compile(r"^\s*[(（]?([1-5])\s*[.．、)）]\s*[^:：\n]*?[:：]\s*(.*)$")
_NONE_HINT = re.compile(r"\(\s*if none.*?\)\s*$", re.I)


def _first_bracket(text: str) -> Optional[str]:
    m = _BRACKET.search(text)
    return m.group(1).strip() if m else None


def _clean_value(text: str) -> str:
    inner = _first_bracket(text)
    if inner is not None and text.lstrip()[:1] in OPEN:
        value = inner
    else:
        value = _NONE_HINT.sub("", text).strip()
    return value.strip(" ;；,，") or NONE_TEXT


def parse_summary(text: str) -> SummaryReport:
    """Read the five numbered report items; missing items become "none" with a warning.

    If no numbered item is found at all, the whole reply becomes the main
    symptoms text so downstream stages still see it.
    """
    found: dict[int, str] = {}
    for line in text.splitlines():
        m = _SUMMARY_ITEM.match(line)
        if m and int(m.group(1)) not in found:
            found[int(m.group(1))] = _clean_value(m.group(2))
    fields = SummaryReport.REPORT_FIELDS
    if not found:
        return SummaryReport(main_symptoms=text.strip() or NONE_TEXT,
                             warnings=("summary reply had no numbered items; using raw text",))
    values = {}
    warnings = []
    for i, name in enumerate(fields, 1):
        if i in found:
            values[name] = found[i]
        else:
            values[name] = NONE_TEXT
            warnings.append(f"summary item {i} ({name}) missing; set to none")
    return SummaryReport(**values, warnings=tuple(warnings))


_PRED = re.compile(r"(?:Predicted\s*Disease|预测疾病)\s*\d*\s*[:：]", re.I)


def parse_predictions(text: str, n: int) -> tuple[list[str], list[str]]:
    """Names after each "Predicted Disease k:" label, deduplicated in order, at most ``n``."""
    parts = _PRED.split(text)
    warnings: list[str] = []
    if len(parts) < 2:
        return [], ["no 'Predicted Disease' entries in diagnosis reply"]
    names: list[str] = []
    seen: set[str] = set()
    for chunk in parts[1:]:
        name = chunk.strip()
        inner = _first_bracket(name)
        if inner is not None and name[:1] in OPEN:
            name = inner
        name = name.strip().strip(" .。;；,，")
        key = normalize_name(name)
        if not key or key in seen or key == "none":
            continue
        seen.add(key)
        names.append(name)
    if not names:
        warnings.append("diagnosis reply had labels but no disease names")
    return names[:n], warnings


@dataclass(frozen=True)
class FbpAssessment:
    chief_complaint_score: int
    history_score: int
    medication_score: int
    exam_score: int
    verdict: bool
    misleading_info_note: Optional[str] = None

    def __post_init__(self):
        for s in self.scores:
            if not 0 <= s <= 10:
                raise ValueError(f"score {s} outside 0..10")

    @property
    def scores(self) -> tuple[int, int, int, int]:
        return (self.chief_complaint_score, self.history_score, self.medication_score, self.exam_score)

    @property
    def total(self) -> int:
        return sum(self.scores)

    def to_dict(self) -> dict:
        return {
            "chief_complaint_score": self.chief_complaint_score,
            "history_score": self.history_score,
            "medication_score": self.medication_score,
            "exam_score": self.exam_score,
            "total": self.total,
            "verdict": self.verdict,
            "misleading_info_note": self.misleading_info_note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FbpAssessment":
        return cls(d["chief_complaint_score"], d["history_score"], d["medication_score"],
                   d["exam_score"], d["verdict"], d.get("misleading_info_note"))


# Item keywords win over the leading number, so reordered or renumbered lines still land right.
_KEYWORDS = (
    (1, ("chief complaint", "主诉")),
    (2, ("medical history", "病史")),
    (3, ("medication", "用药")),
    (4, ("examination", "检查")),
    (5, ("misleading", "错误")),
    (6, ("diagnostic result", "诊断结果")),
)
_ITEM_NUM = re.compile(r"^\s*[(（]?([1-6])\s*[.．、)）:：]\s*")
_SCALE = re.compile(r"\(?\s*out\s+of\s+10\s*\)?|（\s*满分\s*10\s*分?\s*）|/\s*10\b|分", re.I)
_INT = re.compile(r"(?<![\d.])-?\d+(?:\.\d+)?(?![\d.])")
_YES = {"y", "yes", "是", "可以"}
_NO = {"n", "no", "否", "不可以", "不能"}
_VERDICT_WORD = re.compile(r"(?<![a-z])(yes|no|y|n)(?![a-z])|是|否", re.I)
_COMPACT = re.compile(
    r"(-?\d+)\s*[,，]\s*(-?\d+)\s*[,，]\s*(-?\d+)\s*[,，]\s*(-?\d+)\s*[;；]\s*(yes|no|y|n)(?![a-z])", re.I
)


def _item_of(line: str) -> Optional[int]:
    low = re.split(r"[:：\[【［]", line, maxsplit=1)[0].casefold()
    for item, words in _KEYWORDS:
        if any(w in low for w in words):
            return item
    m = _ITEM_NUM.match(line)
    return int(m.group(1)) if m else None


def _after_label(line: str) -> str:
    body = _ITEM_NUM.sub("", line, count=1)
    for sep in (":", "："):
        if sep in body:
            return body.split(sep, 1)[1]
    return body


def _parse_score(line: str, item: int) -> int:
    inner = _first_bracket(line)
    token = inner if inner is not None else _SCALE.sub(" ", _after_label(line))
    m = _INT.search(token)
    if m is None:
        raise FbpParseError(f"item {item}: no score in {line.strip()!r}")
    raw = m.group(0)
    if "." in raw:
        raise FbpParseError(f"item {item}: score {raw} is not an integer")
    value = int(raw)
    if not 0 <= value <= 10:
        raise FbpParseError(f"item {item}: score {value} outside 0..10")
    return value


def _parse_verdict(line: str) -> bool:
    inner = _first_bracket(line)
    candidates = [inner] if inner is not None else []
    candidates.append(_after_label(line).replace("(y/n)", " ").replace("（y/n）", " "))
    for text in candidates:
        word = text.strip().casefold()
        if word in _YES:
            return True
        if word in _NO:
            return False
        m = _VERDICT_WORD.search(text)
        if m:
            return m.group(0).casefold() in _YES
    raise FbpParseError(f"item 6: no y/n verdict in {line.strip()!r}")


def parse_fbp(text: str) -> FbpAssessment:
    """Parse a filled-in assessment form into four 0..10 scores and a verdict.

    Accepts bracket slots (ASCII or full-width), bare numbers after the colon,
    "(out of 10)" and "/10" suffixes, and lines in any order. A one-line
    ``"8,7,6,9; y"`` answer is also accepted. Raises FbpParseError when a
    score or the verdict cannot be recovered or is out of range.
    """
    scores: dict[int, int] = {}
    verdict: Optional[bool] = None
    note: Optional[str] = None
    for line in text.splitlines():
        if not line.strip():
            continue
        item = _item_of(line)
        if item is None:
            continue
        if item in (1, 2, 3, 4):
            if item not in scores:
                scores[item] = _parse_score(line, item)
        elif item == 5 and note is None:
            inner = _first_bracket(line)
            value = inner if inner is not None else _after_label(line)
            value = value.strip()
            note = value if value and value != "?" else None
        elif item == 6 and verdict is None:
            verdict = _parse_verdict(line)

    if len(scores) < 4 or verdict is None:
        m = _COMPACT.search(text)
        if m is None:
            missing = [str(i) for i in (1, 2, 3, 4) if i not in scores]
            if verdict is None:
                missing.append("6")
            raise FbpParseError(f"assessment reply missing item(s) {', '.join(missing)}")
        values = [int(g) for g in m.groups()[:4]]
        for v in values:
            if not 0 <= v <= 10:
                raise FbpParseError(f"score {v} outside 0..10")
        scores = dict(enumerate(values, 1))
        verdict = m.group(5).casefold() in _YES
    return FbpAssessment(scores[1], scores[2], scores[3], scores[4], verdict, note)
