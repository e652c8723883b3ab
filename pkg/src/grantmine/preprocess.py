"""Text normalization chain: case folding, digit/punctuation stripping,
whitespace tokenization, IDF-threshold stopword removal, stemming."""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

from .corpus import Corpus
from .porter import stem

DEFAULT_STOPWORD_IDF_THRESHOLD = 1.0


class PreprocessError(Exception):
    pass


@dataclass(frozen=True)
class PreprocessConfig:
    lowercase: bool = True
    strip_digits: bool = True
    strip_punct: bool = True
    stopword_idf_threshold: float = DEFAULT_STOPWORD_IDF_THRESHOLD
    stemming: bool = True

    def __post_init__(self):
        if self.stopword_idf_threshold < 0:
            raise ValueError("stopword_idf_threshold must be >= 0")


@dataclass(frozen=True)
class TokenizedDocument:
    id: str
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class StopwordList:
    terms: frozenset[str]
    threshold: float
    source_corpus_size: int

    def __contains__(self, token: str) -> bool:
        return token in self.terms


@lru_cache(maxsize=4096)
def _char_class(ch: str) -> int:
    """0 = keep, 1 = digit (drop), 2 = punctuation (to space)."""
    cat = unicodedata.category(ch)
    if cat == "Nd":
        return 1
    if cat.startswith("P") or cat.startswith("S"):
        return 2
    return 0


def normalize(text: str, config: PreprocessConfig = PreprocessConfig()) -> str:
    """Lowercase, delete decimal digits, and map punctuation to spaces.

    Punctuation becomes a space rather than vanishing so hyphenated
    compounds split into separate tokens.
    """
    if config.lowercase:
        text = text.lower()
    if not (config.strip_digits or config.strip_punct):
        return text
    out = []
    for ch in text:
        cls = _char_class(ch)
        if cls == 1 and config.strip_digits:
            continue
        if cls == 2 and config.strip_punct:
            out.append(" ")
            continue
        out.append(ch)
    return "".join(out)


def tokenize(text: str) -> list[str]:
    """Split on whitespace runs, discarding empty tokens."""
    return text.split()


def document_frequencies(docs: Iterable[TokenizedDocument]) -> Counter:
    df = Counter()
    for doc in docs:
        df.update(set(doc.tokens))
    return df


def build_stopword_list(docs: Sequence[TokenizedDocument],
                        threshold: float) -> StopwordList:
    """Terms whose corpus IDF (log2 of N over df) falls strictly below
    the threshold."""
    if not docs:
        raise PreprocessError("cannot build stopword list from zero documents")
    n = len(docs)
    df = document_frequencies(docs)
    stops = frozenset(t for t, k in df.items() if math.log2(n / k) < threshold)
    return StopwordList(terms=stops, threshold=threshold, source_corpus_size=n)


def remove_stopwords(doc: TokenizedDocument, stops: StopwordList) -> TokenizedDocument:
    return TokenizedDocument(
        id=doc.id,
        tokens=tuple(t for t in doc.tokens if t not in stops.terms),
    )


def stem_document(doc: TokenizedDocument) -> TokenizedDocument:
    return TokenizedDocument(id=doc.id, tokens=tuple(stem(t) for t in doc.tokens))


def preprocess_corpus(
    corpus: Corpus,
    config: PreprocessConfig = PreprocessConfig(),
    stopwords: Optional[StopwordList] = None,
) -> tuple[list[TokenizedDocument], StopwordList]:
    """Run the full chain in order: normalize, tokenize, stopwords, stem.

    When `stopwords` is None the list is built from this corpus (training
    use); pass a frozen list to preprocess held-out documents without
    leaking their statistics.
    """
    if len(corpus) == 0:
        raise PreprocessError("cannot preprocess an empty corpus")
    docs = [
        TokenizedDocument(id=d.id, tokens=tuple(tokenize(normalize(d.text, config))))
        for d in corpus
    ]
    if stopwords is None:
        stopwords = build_stopword_list(docs, config.stopword_idf_threshold)
    docs = [remove_stopwords(d, stopwords) for d in docs]
    if config.stemming:
        docs = [stem_document(d) for d in docs]
    return docs, stopwords


def dump_stopwords(stops: StopwordList, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for term in sorted(stops.terms):
            fh.write(term + "\n")
