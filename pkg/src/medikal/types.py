"""Shared enums: KG entity types and evidence aspect categories."""

from __future__ import annotations

from enum import Enum


class EntityType(str, Enum):
    DIS = "dis"
    PRO = "pro"
    SYM = "sym"
    DRU = "dru"
    BOD = "bod"
    ITE = "ite"
    EQU = "equ"
    MIC = "mic"
    DEP = "dep"

    @classmethod
    def parse(cls, tag: str) -> "EntityType":
        """Parse a type tag; raises ValueError for anything outside the nine tags."""
        return cls(tag.strip().lower())


# Stable integer codes, used for the packed per-node type array.
TYPE_CODES: dict[EntityType, int] = {t: i for i, t in enumerate(EntityType)}
TYPES_BY_CODE: tuple[EntityType, ...] = tuple(EntityType)


class AspectCategory(str, Enum):
    MAIN_SYMPTOMS = "MainSymptoms"
    MEDICAL_HISTORY = "MedicalHistory"
    MEDICATION = "Medication"
    EXAM_RESULTS = "ExamResults"


# Summary-report field -> evidence bucket. Visit and history fields share a bucket.
FIELD_ASPECTS: dict[str, AspectCategory] = {
    "main_symptoms": AspectCategory.MAIN_SYMPTOMS,
    "recent_visits": AspectCategory.MEDICAL_HISTORY,
    "past_medical_history": AspectCategory.MEDICAL_HISTORY,
    "past_surgical_history": AspectCategory.MEDICAL_HISTORY,
    "medication_usage": AspectCategory.MEDICATION,
    "exam_summary": AspectCategory.EXAM_RESULTS,
}
