"""Book ingestion and token-budgeted, sentence-aligned chunking.

Chunks are built greedily: whole sentences are appended while the chunk
stays within the token budget, so every chunk boundary (except inside a
hard-split oversized sentence) lands on sentence-final punctuation and the
chunk texts concatenate back to the exact book body.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path

from .tokenizers import Tokenizer


class InvalidEncoding(ValueError):
    """Input file is not valid UTF-8."""


class EmptyDocument(ValueError):
    """Input has no non-whitespace content."""


class InvalidChunkSize(ValueError):
    """chunk_size must be at least 1 token."""


class UnsplittableText(ValueError):
    """A single character exceeds the chunk budget; no partition exists."""


@dataclass(frozen=True)
class BookDocument:
    id: str
    title: str
    body: str
    token_count: int

    def __post_init__(self):
        if not self.body:
            raise EmptyDocument("book body is empty")


@dataclass(frozen=True)
class Chunk:
    index: int
    text: str
    token_count: int
    byte_start: int
    byte_end: int


# Sentence-final punctuation, optionally extended by closing quotes or
# brackets ("He said \"Stop!\"" ends after the quote).
_SENTENCE_END = re.compile(r"[.!?]+[\"'’”»›)\]}]*")


def split_sentences(body: str) -> list[tuple[int, int]]:
    """Partition ``body`` into sentence spans (character offsets).

    Every span ends right after a run of '.', '!' or '?' plus any closing
    quotes/brackets, or at end of text. Whitespace between sentences
    belongs to the following span. Text without any terminal punctuation
    comes back as a single span.
    """
    if not body:
        raise EmptyDocument("cannot split empty text")
    spans: list[tuple[int, int]] = []
    prev = 0
    for m in _SENTENCE_END.finditer(body):
        end = m.end()
        if end <= prev:
            continue
        spans.append((prev, end))
        prev = end
    if prev < len(body):
        spans.append((prev, len(body)))
    return spans


def sentence_texts(body: str) -> list[str]:
    return [body[s:e] for s, e in split_sentences(body)]


def ingest_book(path: str | Path, title: str, tokenizer: Tokenizer, book_id: str | None = None) -> BookDocument:
    """Load a UTF-8 text file, normalize CRLF line endings, and count tokens.

    Nothing is removed from the text: front and back matter stay in.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    raw = path.read_bytes()
    try:
        body = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidEncoding(f"{path}: {exc}") from exc
    body = body.replace("\r\n", "\n")
    if not body.strip():
        raise EmptyDocument(str(path))
    if book_id is None:
        book_id = hashlib.sha256(body.encode("utf-8")).hexdigest()[:12]
    return BookDocument(id=book_id, title=title, body=body, token_count=tokenizer.count(body))


def _hard_split(text: str, chunk_size: int, tokenizer: Tokenizer) -> list[str]:
    """Split one oversized sentence at token boundaries into pieces of at
    most ``chunk_size`` tokens each."""
    groups = tokenizer.token_groups(text)
    pieces: list[str] = []
    i = 0
    while i < len(groups):
        j = i
        budget = 0
        while j < len(groups) and budget + groups[j].token_count <= chunk_size:
            budget += groups[j].token_count
            j += 1
        if j == i:
            j = i + 1
        piece = text[groups[i].start : groups[j - 1].end]
        # Slicing inside a pretoken may retokenize; recount and back off.
        while j - 1 > i and tokenizer.count(piece) > chunk_size:
            j -= 1
            piece = text[groups[i].start : groups[j - 1].end]
        if tokenizer.count(piece) > chunk_size:
            raise UnsplittableText(
                f"a single unit of text needs {tokenizer.count(piece)} tokens, over the budget of {chunk_size}"
            )
        pieces.append(piece)
        i = j
    return pieces


def chunk_text(doc: BookDocument, chunk_size: int, tokenizer: Tokenizer) -> list[Chunk]:
    """Greedy sentence accumulation into chunks of <= chunk_size tokens.

    A sentence that cannot even fit in an empty chunk is hard-split at
    token boundaries; the final piece keeps accumulating sentences.
    """
    if chunk_size < 1:
        raise InvalidChunkSize(f"chunk_size must be >= 1, got {chunk_size}")
    texts: list[str] = []
    cur = ""
    for start, end in split_sentences(doc.body):
        sent = doc.body[start:end]
        candidate = cur + sent
        if tokenizer.count(candidate) <= chunk_size:
            cur = candidate
            continue
        if cur:
            texts.append(cur)
            cur = ""
        if tokenizer.count(sent) <= chunk_size:
            cur = sent
        else:
            pieces = _hard_split(sent, chunk_size, tokenizer)
            texts.extend(pieces[:-1])
            cur = pieces[-1]
    if cur:
        texts.append(cur)

    chunks: list[Chunk] = []
    byte_pos = 0
    for index, text in enumerate(texts):
        nbytes = len(text.encode("utf-8"))
        chunks.append(
            Chunk(
                index=index,
                text=text,
                token_count=tokenizer.count(text),
                byte_start=byte_pos,
                byte_end=byte_pos + nbytes,
            )
        )
        byte_pos += nbytes
    return chunks


def chunk_manifest(doc: BookDocument, chunks: list[Chunk], chunk_size: int, tokenizer: Tokenizer) -> dict:
    """JSON-ready manifest describing a chunking run (offsets only, no text)."""
    return {
        "book_id": doc.id,
        "chunk_size": chunk_size,
        "tokenizer_name": tokenizer.name,
        "chunks": [
            {
                "index": c.index,
                "byte_start": c.byte_start,
                "byte_end": c.byte_end,
                "token_count": c.token_count,
            }
            for c in chunks
        ],
    }


def load_chunks(doc: BookDocument, manifest: dict) -> list[Chunk]:
    """Rebuild chunk texts from a manifest and the book body."""
    if manifest["book_id"] != doc.id:
        raise ValueError(f"manifest is for book {manifest['book_id']!r}, not {doc.id!r}")
    body_bytes = doc.body.encode("utf-8")
    chunks = []
    for entry in manifest["chunks"]:
        text = body_bytes[entry["byte_start"] : entry["byte_end"]].decode("utf-8")
        chunks.append(
            Chunk(
                index=entry["index"],
                text=text,
                token_count=entry["token_count"],
                byte_start=entry["byte_start"],
                byte_end=entry["byte_end"],
            )
        )
    return chunks
