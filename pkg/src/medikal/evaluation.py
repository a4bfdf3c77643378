"""ICD-10 normalisation by fuzzy matching, and set-based recall / precision / F1."""

from __future__ import annotations

import os
import unicodedata
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .errors import EmptyCorpus, MalformedRow

DEFAULT_ICD_THRESHOLD = 0.5
RAW_PREFIX = "RAW:"


def match_key(name: str) -> str:
    """Case-fold and drop whitespace and punctuation."""
    folded = unicodedata.normalize("NFKC", name).casefold()
    return "".join(c for c in folded if not (c.isspace() or unicodedata.category(c).startswith("P")))


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def similarity(a: str, b: str) -> float:
    """``1 - edit_distance / max_len`` over match keys; two empty keys count as identical."""
    ka, kb = match_key(a), match_key(b)
    longest = max(len(ka), len(kb))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(ka, kb) / longest


@dataclass(frozen=True)
class IcdTerminology:
    entries: tuple[tuple[str, str], ...]

    def __post_init__(self):
        codes = set()
        for code, name in self.entries:
            if not code or not name.strip():
                raise ValueError("ICD entries need a code and a non-empty name")
            if code in codes:
                raise ValueError(f"duplicate ICD code {code!r}")
            codes.add(code)
        keys: dict[str, list[str]] = {}
        for code, name in self.entries:
            keys.setdefault(match_key(name), []).append(code)
        object.__setattr__(self, "_by_key", {k: min(v) for k, v in keys.items()})

    @classmethod
    def load(cls, path: str | os.PathLike) -> "IcdTerminology":
        """Read a ``code<TAB>canonical_name`` file."""
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\r\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                    raise MalformedRow(os.fspath(path), lineno, "expected code<TAB>name")
                entries.append((parts[0].strip(), parts[1].strip()))
        return cls(tuple(entries))

    def best_match(self, name: str) -> tuple[str, float]:
        """Highest-similarity code (ties: smallest code) and its similarity."""
        key = match_key(name)
        exact = self._by_key.get(key)  # type: ignore[attr-defined]
        if exact is not None:
            return exact, 1.0
        best_code, best_sim = "", -1.0
        for code, canon in self.entries:
            sim = similarity(name, canon)
            if sim > best_sim or (sim == best_sim and code < best_code):
                best_code, best_sim = code, sim
        return best_code, best_sim


def normalize_to_icd(names: Iterable[str], icd: IcdTerminology,
                     threshold: float = DEFAULT_ICD_THRESHOLD) -> set[str]:
    """Map names to ICD codes. Names below ``threshold`` keep a ``RAW:<key>`` code."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    out = set()
    for name in names:
        key = match_key(name)
        if not key:
            continue
        if icd.entries:
            code, sim = icd.best_match(name)
            if sim >= threshold:
                out.add(code)
                continue
        out.add(RAW_PREFIX + key)
    return out


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def to_dict(self) -> dict:
        return {**asdict(self), "recall": self.recall, "precision": self.precision, "f1": self.f1}


@dataclass(frozen=True)
class MacroMetrics:
    """Mean of per-record R/P/F1, with the pooled counts kept alongside."""

    tp: int
    fp: int
    fn: int
    recall: float
    precision: float
    f1: float

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(pred: set[str], ref: set[str]) -> Metrics:
    return Metrics(len(pred & ref), len(pred - ref), len(ref - pred))


def aggregate(per_record: Sequence[Metrics], mode: str = "micro") -> Metrics | MacroMetrics:
    """Corpus metrics. ``micro`` pools counts first; ``macro`` averages per-record scores."""
    if not per_record:
        raise EmptyCorpus("no records to aggregate")
    tp = sum(m.tp for m in per_record)
    fp = sum(m.fp for m in per_record)
    fn = sum(m.fn for m in per_record)
    if mode == "micro":
        return Metrics(tp, fp, fn)
    if mode == "macro":
        k = len(per_record)
        return MacroMetrics(tp, fp, fn,
                            sum(m.recall for m in per_record) / k,
                            sum(m.precision for m in per_record) / k,
                            sum(m.f1 for m in per_record) / k)
    raise ValueError(f"unknown averaging mode {mode!r}")
