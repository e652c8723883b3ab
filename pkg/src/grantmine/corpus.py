"""Proposal corpus: JSONL loading, validity filtering, and score statistics."""

from __future__ import annotations

import json
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional

IC_KEY = "ic"
MIN_VALID_SCORE = 1.0


class CorpusError(Exception):
    """Raised for malformed corpus files or invariant violations."""


@dataclass(frozen=True)
class Document:
    """One proposal: raw text plus reviewer scores and grant metadata."""

    id: str
    text: str
    scores: Mapping[str, float]
    grant_type: str
    section: Optional[str] = None

    @property
    def ic_score(self) -> Optional[float]:
        value = self.scores.get(IC_KEY)
        return None if value is None else float(value)

    @property
    def other_scores(self) -> dict:
        return {k: v for k, v in self.scores.items() if k != IC_KEY}

    def to_json_obj(self) -> dict:
        obj = {
            "id": self.id,
            "text": self.text,
            "scores": dict(self.scores),
            "grant_type": self.grant_type,
        }
        if self.section is not None:
            obj["section"] = self.section
        return obj


@dataclass(frozen=True)
class Corpus:
    """Ordered, duplicate-free collection of documents."""

    documents: tuple[Document, ...]
    source: Optional[str] = None
    loaded_at: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        seen = set()
        for doc in self.documents:
            if not doc.id:
                raise CorpusError("document with empty id")
            if doc.id in seen:
                raise CorpusError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def by_id(self) -> dict[str, Document]:
        return {doc.id: doc for doc in self.documents}


@dataclass(frozen=True)
class ScoreStatistics:
    count: int
    mean: float
    std: float
    median: float
    mode: float
    min: float
    max: float
    q25: float
    q50: float
    q75: float


def _validate_score_value(name, value, line_no):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CorpusError(f"line {line_no}: score {name!r} is not a number")
    if not math.isfinite(value):
        raise CorpusError(f"line {line_no}: score {name!r} is not finite")


def _document_from_obj(obj: dict, line_no: int) -> Document:
    if not isinstance(obj, dict):
        raise CorpusError(f"line {line_no}: expected a JSON object")
    for key in ("id", "text", "scores", "grant_type"):
        if key not in obj:
            raise CorpusError(f"line {line_no}: missing field {key!r}")
    if not isinstance(obj["id"], str) or not obj["id"]:
        raise CorpusError(f"line {line_no}: field 'id' must be a nonempty string")
    if not isinstance(obj["text"], str):
        raise CorpusError(f"line {line_no}: field 'text' must be a string")
    if not isinstance(obj["scores"], dict):
        raise CorpusError(f"line {line_no}: field 'scores' must be an object")
    if not isinstance(obj["grant_type"], str):
        raise CorpusError(f"line {line_no}: field 'grant_type' must be a string")
    section = obj.get("section")
    if section is not None and not isinstance(section, str):
        raise CorpusError(f"line {line_no}: field 'section' must be a string")
    for name, value in obj["scores"].items():
        _validate_score_value(name, value, line_no)
    return Document(
        id=obj["id"],
        text=obj["text"],
        scores=dict(obj["scores"]),
        grant_type=obj["grant_type"],
        section=section,
    )


def load_corpus(path) -> Corpus:
    """Read a JSONL corpus file, one document object per line.

    Blank lines are ignored. Errors name the offending line number or
    duplicate id.
    """
    docs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            doc = _document_from_obj(obj, line_no)
            if doc.id in seen:
                raise CorpusError(f"line {line_no}: duplicate document id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return Corpus(documents=tuple(docs), source=str(path), loaded_at=time.time())


def save_corpus(corpus: Corpus, path) -> None:
    """Write the canonical JSONL form: compact separators, UTF-8, LF endings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in corpus:
            fh.write(json.dumps(doc.to_json_obj(), ensure_ascii=False,
                                separators=(", ", ": ")))
            fh.write("\n")


def is_valid(doc: Document) -> bool:
    """A document counts iff its IC score is present and at least 1.0."""
    score = doc.ic_score
    return score is not None and score >= MIN_VALID_SCORE


def filter_valid(corpus: Corpus) -> Corpus:
    return Corpus(
        documents=tuple(d for d in corpus if is_valid(d)),
        source=corpus.source,
        loaded_at=corpus.loaded_at,
    )


def filter_by(corpus: Corpus, grant_type: Optional[str] = None,
              section: Optional[str] = None) -> Corpus:
    """Keep documents matching every provided filter, order preserved."""
    def keep(doc: Document) -> bool:
        if grant_type is not None and doc.grant_type != grant_type:
            return False
        if section is not None and doc.section != section:
            return False
        return True

    return Corpus(
        documents=tuple(d for d in corpus if keep(d)),
        source=corpus.source,
        loaded_at=corpus.loaded_at,
    )


def nearest_rank(sorted_values, p: float) -> float:
    """Nearest-rank quantile: the value at 1-indexed rank ceil(p * n)."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("empty value list")
    rank = max(1, math.ceil(p * n))
    return sorted_values[min(rank, n) - 1]


def compute_statistics(corpus: Corpus) -> ScoreStatistics:
    """Population statistics over the valid IC scores.

    Mode ties break toward the smaller score; quartiles use nearest-rank
    with no interpolation, and the median is q50.
    """
    scores = sorted(d.ic_score for d in corpus if is_valid(d))
    if not scores:
        raise CorpusError("no valid scores in corpus")
    n = len(scores)
    mean = sum(scores) / n
    var = sum((s - mean) ** 2 for s in scores) / n
    counts = Counter(scores)
    best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
    return ScoreStatistics(
        count=n,
        mean=mean,
        std=math.sqrt(var),
        median=nearest_rank(scores, 0.50),
        mode=best[0],
        min=scores[0],
        max=scores[-1],
        q25=nearest_rank(scores, 0.25),
        q50=nearest_rank(scores, 0.50),
        q75=nearest_rank(scores, 0.75),
    )
