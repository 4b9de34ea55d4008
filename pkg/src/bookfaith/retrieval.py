"""BM25 passage retrieval over a single book.

Passages come from the sentence-aware chunker with a small token limit
(256 by default). Terms are lowercased maximal alphanumeric runs with no
stemming or stopword removal, and scoring uses the Okapi formula with the
non-negative IDF variant.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

from .claims import Claim
from .corpus import BookDocument, chunk_text
from .tokenizers import Tokenizer

DEFAULT_PASSAGE_TOKEN_LIMIT = 256
DEFAULT_TOP_K = 5

_TERM = re.compile(r"[^\W_]+")


class MissingIndex(Exception):
    pass


def extract_terms(text: str) -> list[str]:
    return _TERM.findall(text.lower())


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75


@dataclass
class Passage:
    id: int
    text: str
    term_frequencies: dict[str, int]
    length_in_terms: int
    byte_start: int = 0
    byte_end: int = 0


@dataclass
class PassageIndex:
    book_id: str
    passages: list[Passage]
    document_frequency: dict[str, int]
    average_length: float
    params: Bm25Params
    passage_token_limit: int

    @property
    def passage_count(self) -> int:
        return len(self.passages)

    def to_json(self) -> dict:
        return {
            "book_id": self.book_id,
            "passage_token_limit": self.passage_token_limit,
            "params": {"k1": self.params.k1, "b": self.params.b},
            "average_length": self.average_length,
            "document_frequency": dict(sorted(self.document_frequency.items())),
            "passages": [
                {
                    "id": p.id,
                    "text": p.text,
                    "byte_start": p.byte_start,
                    "byte_end": p.byte_end,
                    "term_frequencies": dict(sorted(p.term_frequencies.items())),
                    "length_in_terms": p.length_in_terms,
                }
                for p in self.passages
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "PassageIndex":
        return cls(
            book_id=data["book_id"],
            passages=[
                Passage(
                    id=raw["id"],
                    text=raw["text"],
                    term_frequencies=dict(raw["term_frequencies"]),
                    length_in_terms=raw["length_in_terms"],
                    byte_start=raw.get("byte_start", 0),
                    byte_end=raw.get("byte_end", 0),
                )
                for raw in data["passages"]
            ],
            document_frequency=dict(data["document_frequency"]),
            average_length=data["average_length"],
            params=Bm25Params(k1=data["params"]["k1"], b=data["params"]["b"]),
            passage_token_limit=data["passage_token_limit"],
        )


@dataclass
class RetrievalResult:
    claim_id: str
    hits: list[tuple[int, float]]  # (passage_id, score), best first
    evidence_text: str


def index_from_texts(
    book_id: str,
    texts: list[str],
    params: Bm25Params = Bm25Params(),
    passage_token_limit: int = DEFAULT_PASSAGE_TOKEN_LIMIT,
    offsets: list[tuple[int, int]] | None = None,
) -> PassageIndex:
    passages: list[Passage] = []
    document_frequency: Counter[str] = Counter()
    for i, text in enumerate(texts):
        terms = extract_terms(text)
        tf = Counter(terms)
        document_frequency.update(tf.keys())
        start, end = offsets[i] if offsets else (0, 0)
        passages.append(
            Passage(
                id=i,
                text=text,
                term_frequencies=dict(tf),
                length_in_terms=len(terms),
                byte_start=start,
                byte_end=end,
            )
        )
    if not passages:
        raise ValueError("cannot index an empty passage list")
    total_terms = sum(p.length_in_terms for p in passages)
    if total_terms == 0:
        raise ValueError("no indexable terms in any passage")
    return PassageIndex(
        book_id=book_id,
        passages=passages,
        document_frequency=dict(document_frequency),
        average_length=total_terms / len(passages),
        params=params,
        passage_token_limit=passage_token_limit,
    )


def build_index(
    doc: BookDocument,
    tokenizer: Tokenizer,
    passage_token_limit: int = DEFAULT_PASSAGE_TOKEN_LIMIT,
    params: Bm25Params = Bm25Params(),
) -> PassageIndex:
    if passage_token_limit < 1:
        raise ValueError("passage_token_limit must be >= 1")
    chunks = chunk_text(doc, passage_token_limit, tokenizer)
    return index_from_texts(
        doc.id,
        [c.text for c in chunks],
        params=params,
        passage_token_limit=passage_token_limit,
        offsets=[(c.byte_start, c.byte_end) for c in chunks],
    )


def bm25_score(query_terms: list[str], passage: Passage, index: PassageIndex) -> float:
    """Okapi BM25 with IDF = ln((N - df + 0.5)/(df + 0.5) + 1). Repeated
    query terms contribute once; passage-side frequency is what counts."""
    k1, b = index.params.k1, index.params.b
    n = index.passage_count
    score = 0.0
    for term in sorted(set(query_terms)):
        tf = passage.term_frequencies.get(term, 0)
        if tf == 0:
            continue
        df = index.document_frequency.get(term, 0)
        idf = math.log((n - df + 0.5) / (df + 0.5) + 1.0)
        norm = k1 * (1.0 - b + b * passage.length_in_terms / index.average_length)
        score += idf * tf * (k1 + 1.0) / (tf + norm)
    return score


def retrieve(claim: Claim, index: PassageIndex, k: int = DEFAULT_TOP_K) -> RetrievalResult:
    """Top-k passages by score, ties broken by ascending passage id.
    Evidence text joins the hits with a blank line, best first."""
    if k < 1:
        raise ValueError("k must be >= 1")
    query_terms = extract_terms(claim.text)
    scored = [(bm25_score(query_terms, p, index), p.id) for p in index.passages]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    hits = [(pid, score) for score, pid in scored[:k]]
    evidence_text = "\n\n".join(index.passages[pid].text for pid, _ in hits)
    return RetrievalResult(claim_id=claim.id, hits=hits, evidence_text=evidence_text)


def sweep_passage_limit(
    doc: BookDocument,
    limits: list[int],
    claims: list[Claim],
    gold: dict[str, str],
    verify_fn,
    tokenizer: Tokenizer,
    k: int = DEFAULT_TOP_K,
    params: Bm25Params = Bm25Params(),
) -> dict[int, dict[str, "object"]]:
    """Re-run verification over a range of passage token limits.

    ``verify_fn(claim, evidence_text)`` must return a verdict label or
    None (excluded from scoring). Returns per-limit per-label scores.
    """
    from . import metrics

    table: dict[int, dict[str, object]] = {}
    for limit in limits:
        index = build_index(doc, tokenizer, passage_token_limit=limit, params=params)
        predictions: dict[str, str] = {}
        for claim in claims:
            verdict = verify_fn(claim, retrieve(claim, index, k).evidence_text)
            if verdict is not None:
                predictions[claim.id] = verdict
        table[limit] = {
            label: metrics.per_label_prf(predictions, gold, label)
            for label in sorted(set(gold.values()))
        }
    return table
