"""Binary claim verification under configurable evidence strategies.

A claim is judged Faithful or Unfaithful by prompting a backend with an
evidence context built one of four ways: no evidence at all, the human
annotators' quoted evidence, BM25-retrieved passages, or the entire book.
The auto-rater never emits the partial/unverifiable labels; answers that
name neither truth value are kept for audit but excluded from scoring.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .claims import Claim
from .corpus import BookDocument, split_sentences
from .gateway import Backend, Gateway, PromptRequest
from .retrieval import PassageIndex, retrieve
from .store import AnnotationStore
from .tokenizers import Tokenizer, WhitespaceTokenizer

DEFAULT_EVALUATION_TEMPLATE = """You are provided with a context and a statement. Your task is to \
carefully read the context and then determine whether the statement is true or false. Use the \
information given in the context to make your decision.

Context:
{evidence}

Statement:
{claim}

Question: Based on the context provided, is the above statement True or False?

Answer:"""

NO_CONTEXT = "no_context"
HUMAN_EVIDENCE = "human_evidence"
BM25 = "bm25"
ENTIRE_BOOK = "entire_book"
VARIANTS = (NO_CONTEXT, HUMAN_EVIDENCE, BM25, ENTIRE_BOOK)

DEFAULT_MARGIN_TOKENS = 2000


class Verdict(str, Enum):
    FAITHFUL = "Faithful"
    UNFAITHFUL = "Unfaithful"


class MissingIndex(Exception):
    pass


class MissingHumanEvidence(Exception):
    """No stored evidence quotes exist for the claim."""


class BookTooLarge(Exception):
    """The book plus prompt overhead does not fit the backend window."""


class AmbiguousVerdict(Exception):
    """The answer named neither truth value, or hedged with both."""


@dataclass(frozen=True)
class EvidenceConfig:
    variant: str
    k: int = 5
    passage_token_limit: int = 256
    margin_tokens: int = DEFAULT_MARGIN_TOKENS

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown evidence variant {self.variant!r}; pick one of {VARIANTS}")

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "k": self.k,
            "passage_token_limit": self.passage_token_limit,
            "margin_tokens": self.margin_tokens,
        }


@dataclass
class VerificationRecord:
    claim_id: str
    config: EvidenceConfig
    evidence_text: str
    prompt: str
    raw_answer: str
    verdict: Verdict | None  # None for ambiguous answers, excluded from scoring
    backend: str
    cost: float
    input_tokens: int = 0
    output_tokens: int = 0

    def to_json(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "config": self.config.to_json(),
            "evidence_text": self.evidence_text,
            "prompt": self.prompt,
            "raw_answer": self.raw_answer,
            "verdict": self.verdict.value if self.verdict else None,
            "backend": self.backend,
            "cost": self.cost,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
        }

    @classmethod
    def from_json(cls, data: dict) -> "VerificationRecord":
        return cls(
            claim_id=data["claim_id"],
            config=EvidenceConfig(**data["config"]),
            evidence_text=data["evidence_text"],
            prompt=data["prompt"],
            raw_answer=data["raw_answer"],
            verdict=Verdict(data["verdict"]) if data.get("verdict") else None,
            backend=data["backend"],
            cost=data["cost"],
            input_tokens=data.get("input_tokens", 0),
            output_tokens=data.get("output_tokens", 0),
        )


def build_evidence(
    claim: Claim,
    config: EvidenceConfig,
    doc: BookDocument | None = None,
    index: PassageIndex | None = None,
    annotations: AnnotationStore | None = None,
    backend: Backend | None = None,
    tokenizer: Tokenizer | None = None,
    template: str = DEFAULT_EVALUATION_TEMPLATE,
) -> str:
    if config.variant == NO_CONTEXT:
        return ""
    if config.variant == HUMAN_EVIDENCE:
        if annotations is None:
            raise MissingHumanEvidence(f"no annotation store supplied for claim {claim.id}")
        quotes = annotations.human_evidence(claim.id)
        if not quotes:
            raise MissingHumanEvidence(f"annotators cited no evidence for claim {claim.id}")
        return "\n".join(q.text for q in quotes)
    if config.variant == BM25:
        if index is None:
            raise MissingIndex(f"no passage index supplied for claim {claim.id}")
        return retrieve(claim, index, config.k).evidence_text
    # entire book
    if doc is None:
        raise ValueError("entire-book evidence needs the book document")
    if backend is None:
        raise ValueError("entire-book evidence needs the target backend for the window check")
    tokenizer = tokenizer or WhitespaceTokenizer()
    overhead = tokenizer.count(template.format(evidence="", claim=claim.text))
    needed = doc.token_count + overhead + config.margin_tokens
    if needed > backend.config.context_window:
        raise BookTooLarge(
            f"book {doc.id} needs {needed} tokens with prompt overhead and margin, "
            f"window is {backend.config.context_window}"
        )
    return doc.body


def build_verification_prompt(
    claim: Claim,
    evidence: str,
    template: str = DEFAULT_EVALUATION_TEMPLATE,
    max_output_tokens: int = 64,
) -> PromptRequest:
    return PromptRequest(
        user=template.format(evidence=evidence, claim=claim.text),
        max_output_tokens=max_output_tokens,
    )


_TRUTH_TOKEN = re.compile(r"\b(true|false)\b", re.IGNORECASE)


def parse_verdict(raw: str) -> Verdict:
    """First standalone "true"/"false" decides; hedging with both in the
    opening sentence is ambiguous."""
    matches = _TRUTH_TOKEN.findall(raw)
    if not matches:
        raise AmbiguousVerdict(f"no truth token in answer: {raw[:120]!r}")
    stripped = raw.strip()
    first_sentence = stripped[slice(*split_sentences(stripped)[0])] if stripped else ""
    in_first = {m.lower() for m in _TRUTH_TOKEN.findall(first_sentence)}
    if len(in_first) > 1:
        raise AmbiguousVerdict(f"answer hedges with both values: {raw[:120]!r}")
    return Verdict.FAITHFUL if matches[0].lower() == "true" else Verdict.UNFAITHFUL


def verify_claim(
    claim: Claim,
    config: EvidenceConfig,
    backend: Backend,
    gateway: Gateway,
    doc: BookDocument | None = None,
    index: PassageIndex | None = None,
    annotations: AnnotationStore | None = None,
    tokenizer: Tokenizer | None = None,
    template: str = DEFAULT_EVALUATION_TEMPLATE,
) -> VerificationRecord:
    """Run one claim through evidence construction, prompting, and verdict
    parsing. Ambiguous answers produce a record with no verdict."""
    evidence = build_evidence(
        claim,
        config,
        doc=doc,
        index=index,
        annotations=annotations,
        backend=backend,
        tokenizer=tokenizer,
        template=template,
    )
    request = build_verification_prompt(claim, evidence, template=template)
    completion = gateway.complete(request, backend)
    try:
        verdict: Verdict | None = parse_verdict(completion.text)
    except AmbiguousVerdict:
        verdict = None
    return VerificationRecord(
        claim_id=claim.id,
        config=config,
        evidence_text=evidence,
        prompt=request.user,
        raw_answer=completion.text,
        verdict=verdict,
        backend=completion.backend,
        cost=completion.cost,
        input_tokens=completion.input_tokens,
        output_tokens=completion.output_tokens,
    )
