"""Decompose a summary into decontextualized atomic claims.

The default extraction prompt asks for one claim per line marked with
"- "; responses using numbered lists ("1. ") are accepted too, since
models frequently answer that way. Light lint rules flag claims that look
insufficiently decontextualized; lint never blocks the pipeline.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .corpus import split_sentences
from .gateway import Backend, Gateway, PromptRequest
from .summarizer import SummaryRecord

DEFAULT_EXTRACTION_TEMPLATE = """You are trying to verify the faithfulness of statements made in a \
given summary of a book against the actual text of the book. To do so, you first need to break the \
summary into a set of "atomic claims", each of which will then be passed to a human who will read the \
book and verify if the claim is true or not. Each atomic claim must be fully understandable without \
any other context from the summary (e.g., all entities must be referred to by name, not pronoun), and \
they must be situated within relevant temporal, location, and causal context whenever possible. Try to \
keep each atomic claim to a maximum of 2 sentences. Each atomic claim is separated with '- '.

Summary:
{summary}

List of atomic claims:"""

# Sanity band for claims per summary; outside it we warn, never fail.
EXPECTED_CLAIMS_RANGE = (10, 60)

LEADING_PRONOUNS = {"he", "she", "they", "it", "this", "that"}

_DASH_ITEM = re.compile(r"^\s*-\s+(.*)$")
_NUMBERED_ITEM = re.compile(r"^\s*\d+[.)]\s+(.*)$")


class NoClaimsFound(Exception):
    """The completion contained no recognizable claim list."""


@dataclass(frozen=True)
class Claim:
    id: str
    summary_id: str
    index: int
    text: str

    def to_json(self) -> dict:
        return {"claim_id": self.id, "summary_id": self.summary_id, "index": self.index, "text": self.text}

    @classmethod
    def from_json(cls, data: dict) -> "Claim":
        return cls(id=data["claim_id"], summary_id=data["summary_id"], index=data["index"], text=data["text"])


@dataclass
class ClaimLint:
    claim_id: str
    warnings: set[str] = field(default_factory=set)  # LeadingPronoun | TooLong | Duplicate


def build_extraction_prompt(
    summary: str,
    template: str = DEFAULT_EXTRACTION_TEMPLATE,
    max_output_tokens: int = 2000,
) -> PromptRequest:
    if not summary.strip():
        raise ValueError("summary is empty")
    return PromptRequest(user=template.format(summary=summary), max_output_tokens=max_output_tokens)


def parse_claims(completion: str) -> list[str]:
    """Parse a claim list in either "- " or "N. " format.

    A marker starts a new item; subsequent unmarked lines continue the
    current item. Items are whitespace-trimmed and empties dropped.
    """
    items: list[list[str]] = []
    found_marker = False
    for line in completion.splitlines():
        m = _DASH_ITEM.match(line) or _NUMBERED_ITEM.match(line)
        if m:
            found_marker = True
            items.append([m.group(1).strip()])
        elif found_marker and line.strip() and items:
            items[-1].append(line.strip())
    if not found_marker:
        raise NoClaimsFound("no '- ' or numbered list items in completion")
    texts = [" ".join(part for part in item if part).strip() for item in items]
    return [t for t in texts if t]


def render_claims(texts: list[str]) -> str:
    """Inverse of parse_claims for the dash format."""
    return "\n".join(f"- {t}" for t in texts)


def extract_claims(
    summary: SummaryRecord,
    summary_id: str,
    backend: Backend,
    gateway: Gateway,
    template: str = DEFAULT_EXTRACTION_TEMPLATE,
) -> list[Claim]:
    request = build_extraction_prompt(summary.final_text, template=template)
    completion = gateway.complete(request, backend)
    texts = parse_claims(completion.text)
    return [
        Claim(id=f"{summary_id}--c{i:03d}", summary_id=summary_id, index=i, text=text)
        for i, text in enumerate(texts)
    ]


def _sentence_count(text: str) -> int:
    return len(split_sentences(text)) if text else 0


def lint_claim(claim: Claim, siblings: list[Claim] | None = None) -> ClaimLint:
    """Flag likely decontextualization problems. Warnings only."""
    lint = ClaimLint(claim_id=claim.id)
    first_token = re.sub(r"^\W+", "", claim.text.split()[0]).lower() if claim.text.split() else ""
    if first_token in LEADING_PRONOUNS:
        lint.warnings.add("LeadingPronoun")
    if _sentence_count(claim.text) > 2:
        lint.warnings.add("TooLong")
    if siblings and any(other.id != claim.id and other.text == claim.text for other in siblings):
        lint.warnings.add("Duplicate")
    return lint


def lint_summary_claims(claims: list[Claim]) -> list[ClaimLint]:
    return [lint_claim(claim, siblings=claims) for claim in claims]
