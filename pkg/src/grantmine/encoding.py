"""N-gram vocabularies, IDF weights, and sparse document encodings.

Two encodings are supported: standard count-times-IDF with L2
normalization, and the presence scheme where a feature takes the term's
IDF whenever the term occurs at least once, regardless of count.
"""

from __future__ import annotations

import csv
import hashlib
import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import sparse

from .preprocess import TokenizedDocument

NGRAM_JOINER = "_"


class EncodingError(Exception):
    pass


class NgramLevel(Enum):
    UNIGRAM = 1
    BIGRAM = 2
    TRIGRAM = 3


class EncodingScheme(Enum):
    TF_IDF = "tfidf"
    IDF_PRESENCE = "idf_presence"


@dataclass(frozen=True)
class PruneRule:
    """Drop terms whose total training-corpus occurrence count is not
    greater than `min_total_occurrences` (0 disables pruning)."""

    min_total_occurrences: int = 0

    def __post_init__(self):
        if self.min_total_occurrences < 0:
            raise ValueError("min_total_occurrences must be >= 0")


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    index: dict
    doc_freq: dict
    total_count: dict
    n_docs: int
    level: NgramLevel
    prune: PruneRule

    def __len__(self) -> int:
        return len(self.terms)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.n_docs).encode())
        for t in self.terms:
            h.update(t.encode("utf-8"))
            h.update(b"\x00")
            h.update(str(self.doc_freq[t]).encode())
            h.update(b"\x00")
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class IdfTable:
    weights: dict

    def __getitem__(self, term: str) -> float:
        return self.weights[term]

    def as_array(self, vocab: Vocabulary) -> np.ndarray:
        return np.array([self.weights[t] for t in vocab.terms])


@dataclass(frozen=True)
class SparseVector:
    entries: dict
    dim: int


def extract_ngrams(tokens: Sequence[str], level: NgramLevel) -> list[str]:
    """All n-grams up to `level`, unigrams first, each group in document
    order; multi-word terms join with an underscore."""
    grams = list(tokens)
    for n in range(2, level.value + 1):
        grams.extend(
            NGRAM_JOINER.join(tokens[i:i + n])
            for i in range(len(tokens) - n + 1)
        )
    return grams


def build_vocabulary(docs: Sequence[TokenizedDocument], level: NgramLevel,
                     prune: PruneRule = PruneRule()) -> Vocabulary:
    """Index terms that survive pruning, sorted lexicographically."""
    if not docs:
        raise EncodingError("cannot build a vocabulary from zero documents")
    df = Counter()
    total = Counter()
    for doc in docs:
        grams = extract_ngrams(doc.tokens, level)
        total.update(grams)
        df.update(set(grams))
    kept = sorted(t for t, c in total.items() if c > prune.min_total_occurrences)
    return Vocabulary(
        terms=tuple(kept),
        index={t: i for i, t in enumerate(kept)},
        doc_freq={t: df[t] for t in kept},
        total_count={t: total[t] for t in kept},
        n_docs=len(docs),
        level=level,
        prune=prune,
    )


def compute_idf(vocab: Vocabulary) -> IdfTable:
    """idf(t) = log2(N / df(t)); zero exactly when a term is in every doc."""
    n = vocab.n_docs
    return IdfTable(weights={t: math.log2(n / vocab.doc_freq[t]) for t in vocab.terms})


def _doc_weights(doc: TokenizedDocument, vocab: Vocabulary, idf: IdfTable,
                 scheme: EncodingScheme) -> dict:
    counts = Counter(extract_ngrams(doc.tokens, vocab.level))
    entries = {}
    if scheme is EncodingScheme.IDF_PRESENCE:
        for term in counts:
            i = vocab.index.get(term)
            if i is None:
                continue
            w = idf.weights[term]
            if w != 0.0:
                entries[i] = w
    else:
        for term, count in counts.items():
            i = vocab.index.get(term)
            if i is None:
                continue
            w = count * idf.weights[term]
            if w != 0.0:
                entries[i] = w
        norm = math.sqrt(sum(w * w for w in entries.values()))
        if norm > 0.0:
            entries = {i: w / norm for i, w in entries.items()}
    return entries


def encode(doc: TokenizedDocument, vocab: Vocabulary, idf: IdfTable,
           scheme: EncodingScheme) -> SparseVector:
    """Encode one document against a fixed vocabulary; out-of-vocabulary
    terms contribute nothing."""
    return SparseVector(entries=_doc_weights(doc, vocab, idf, scheme),
                        dim=len(vocab))


def encode_matrix(docs: Sequence[TokenizedDocument], vocab: Vocabulary,
                  idf: IdfTable, scheme: EncodingScheme) -> sparse.csr_matrix:
    """Encode a document batch as a CSR matrix (rows in input order)."""
    data, indices, indptr = [], [], [0]
    for doc in docs:
        entries = _doc_weights(doc, vocab, idf, scheme)
        for i in sorted(entries):
            indices.append(i)
            data.append(entries[i])
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.array(data, dtype=np.float64),
         np.array(indices, dtype=np.int32),
         np.array(indptr, dtype=np.int64)),
        shape=(len(docs), len(vocab)),
    )


def dump_vocabulary(vocab: Vocabulary, idf: IdfTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["term", "df", "total_count", "idf"])
        for t in vocab.terms:
            writer.writerow([t, vocab.doc_freq[t], vocab.total_count[t],
                             repr(idf.weights[t])])
