"""Input record and summary report types."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Iterator

NONE_TEXT = "none"


def is_none_text(text: str) -> bool:
    return not text or text.strip().strip("。.").casefold() in {NONE_TEXT, "无", "n/a", ""}


@dataclass(frozen=True)
class EmrRecord:
    id: str
    department: str = ""
    hpi: str = ""
    pmh: str = ""
    pe: str = ""
    lae: str = ""
    diagnosis_labels: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, data: dict) -> "EmrRecord":
        labels = data.get("diagnosis_labels", ())
        if isinstance(labels, str):
            labels = [labels]
        known = {f.name for f in fields(cls)} - {"diagnosis_labels"}
        kwargs = {k: str(v) if v is not None else "" for k, v in data.items() if k in known}
        return cls(**kwargs, diagnosis_labels=tuple(str(x) for x in labels))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["diagnosis_labels"] = list(self.diagnosis_labels)
        return d


@dataclass(frozen=True)
class SummaryReport:
    """Summarised record: five report items plus the exam summary."""

    main_symptoms: str = NONE_TEXT
    recent_visits: str = NONE_TEXT
    past_medical_history: str = NONE_TEXT
    past_surgical_history: str = NONE_TEXT
    medication_usage: str = NONE_TEXT
    exam_summary: str = NONE_TEXT
    warnings: tuple[str, ...] = field(default=(), compare=False)

    REPORT_FIELDS = (
        "main_symptoms",
        "recent_visits",
        "past_medical_history",
        "past_surgical_history",
        "medication_usage",
    )

    def items(self) -> Iterator[tuple[str, str]]:
        """``(field name, text)`` pairs in report order, exam summary last."""
        for name in self.REPORT_FIELDS + ("exam_summary",):
            yield name, getattr(self, name)

    def general_condition(self) -> str:
        labels = (
            "Main symptoms",
            "Recent medical visits",
            "Past medical history",
            "Past surgical history",
            "Medication usage",
        )
        return "\n".join(
            f"{i}. {label}: {getattr(self, name)}"
            for i, (label, name) in enumerate(zip(labels, self.REPORT_FIELDS), 1)
        )

    def to_dict(self) -> dict:
        d = {name: text for name, text in self.items()}
        d["warnings"] = list(self.warnings)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SummaryReport":
        kwargs = {name: data.get(name, NONE_TEXT) for name in cls.REPORT_FIELDS + ("exam_summary",)}
        return cls(**kwargs, warnings=tuple(data.get("warnings", ())))
