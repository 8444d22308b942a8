"""Okapi BM25 ranking over passage titles and survey chunks, plus seeded random picks.

Tokenization is deliberately simple and deterministic: lowercase, ASCII
punctuation treated as separators, split on whitespace. No stemming, no stop
words. Documents that score zero for a query are excluded from results so
"nothing matched" is observable by callers.
"""

from __future__ import annotations

import math
import random
import string
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Chunk, Passage, chunk_passage

BM25_K1 = 1.2
BM25_B = 0.75

_PUNCT_TO_SPACE = str.maketrans({c: " " for c in string.punctuation})


def tokenize(text: str) -> list[str]:
    return text.lower().translate(_PUNCT_TO_SPACE).split()


@dataclass(frozen=True)
class ScoredDoc:
    passage_id: str
    score: float


@dataclass(frozen=True)
class TitleIndex:
    """Inverted term statistics over a set of short documents."""

    doc_count: int
    avg_doc_len: float
    term_stats: dict[str, int]  # term -> document frequency
    per_doc_terms: dict[str, dict[str, int]]  # doc id -> term frequencies

    def doc_len(self, doc_id: str) -> int:
        return sum(self.per_doc_terms[doc_id].values())


def build_index(docs: Iterable[tuple[str, str]]) -> TitleIndex:
    """Index (doc_id, text) pairs. Ids must be unique; the doc list must be non-empty."""
    per_doc_terms: dict[str, dict[str, int]] = {}
    for doc_id, text in docs:
        if doc_id in per_doc_terms:
            raise ValueError(f"duplicate document id {doc_id!r}")
        counts: dict[str, int] = {}
        for term in tokenize(text):
            counts[term] = counts.get(term, 0) + 1
        per_doc_terms[doc_id] = counts
    if not per_doc_terms:
        raise ValueError("cannot build an index over an empty document list")
    term_stats: dict[str, int] = {}
    for counts in per_doc_terms.values():
        for term in counts:
            term_stats[term] = term_stats.get(term, 0) + 1
    total_len = sum(sum(c.values()) for c in per_doc_terms.values())
    return TitleIndex(
        doc_count=len(per_doc_terms),
        avg_doc_len=total_len / len(per_doc_terms),
        term_stats=term_stats,
        per_doc_terms=per_doc_terms,
    )


def _idf(index: TitleIndex, term: str) -> float:
    df = index.term_stats.get(term, 0)
    # +1 inside the log keeps idf (and therefore scores) non-negative.
    return math.log(1.0 + (index.doc_count - df + 0.5) / (df + 0.5))


def bm25_topk(
    index: TitleIndex,
    query: str,
    k: int,
    k1: float = BM25_K1,
    b: float = BM25_B,
) -> list[ScoredDoc]:
    """Top-k documents by BM25 score, zero scorers excluded.

    Duplicate query terms count once. Ties break by ascending document id, so
    rankings are fully deterministic. Fewer than k results are returned when
    fewer than k documents score above zero.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    terms = sorted(set(tokenize(query)))
    scored: list[ScoredDoc] = []
    for doc_id, counts in index.per_doc_terms.items():
        dl = sum(counts.values())
        norm = k1 * (1.0 - b + b * dl / index.avg_doc_len)
        score = 0.0
        for term in terms:
            tf = counts.get(term, 0)
            if tf == 0:
                continue
            score += _idf(index, term) * tf * (k1 + 1.0) / (tf + norm)
        if score > 0.0:
            scored.append(ScoredDoc(passage_id=doc_id, score=score))
    scored.sort(key=lambda d: (-d.score, d.passage_id))
    return scored[:k]


def survey_chunks_topk(
    index: TitleIndex,
    hypothesis_text: str,
    k: int,
    k1: float = BM25_K1,
    b: float = BM25_B,
) -> list[ScoredDoc]:
    """Rank survey chunks against a hypothesis; same contract as bm25_topk."""
    return bm25_topk(index, hypothesis_text, k, k1=k1, b=b)


def sample_random(ids: Sequence[str], n: int, seed: int) -> list[str]:
    """n distinct ids, reproducible for a fixed seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > len(ids):
        raise ValueError(f"cannot sample {n} ids from a pool of {len(ids)}")
    return random.Random(seed).sample(list(ids), n)


def chunk_id(chunk: Chunk) -> str:
    return f"{chunk.passage_id}#{chunk.index}"


@dataclass(frozen=True)
class SurveyIndex:
    """BM25 index over survey-passage chunks, keeping the chunk texts for prompting."""

    index: TitleIndex
    chunk_texts: dict[str, str]  # chunk id -> chunk text

    def topk(self, hypothesis_text: str, k: int) -> list[tuple[str, str, float]]:
        hits = survey_chunks_topk(self.index, hypothesis_text, k)
        return [(d.passage_id, self.chunk_texts[d.passage_id], d.score) for d in hits]


def build_survey_index(
    survey_passages: Sequence[Passage],
    chunk_size_words: int,
) -> SurveyIndex | None:
    """Chunk survey passages and index the chunks. None when there is nothing to index."""
    chunks: list[Chunk] = []
    for passage in sorted(survey_passages, key=lambda p: p.id):
        chunks.extend(chunk_passage(passage, chunk_size_words))
    if not chunks:
        return None
    texts = {chunk_id(c): c.text for c in chunks}
    return SurveyIndex(index=build_index(list(texts.items())), chunk_texts=texts)
