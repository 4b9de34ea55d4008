"""Pluggable token counting for chunking and budget checks.

Two tokenizer kinds are supported: a whitespace tokenizer (fast, handy in
tests) and a byte-pair encoder loaded from the usual two-file text format
(a JSON vocabulary mapping token strings to ids, plus a merges file with
one space-separated pair per line).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path


@dataclass(frozen=True)
class TokenGroup:
    """A minimal run of tokens whose text slice starts and ends on a
    character boundary.  Groups tile the input text, so any split made at
    group boundaries partitions the original string."""

    start: int
    end: int
    token_count: int


class Tokenizer:
    """Deterministic token counter. Subclasses implement ``count`` and
    ``token_groups``; both must agree on whole-text counts."""

    name: str = "tokenizer"

    def count(self, text: str) -> int:
        raise NotImplementedError

    def token_groups(self, text: str) -> list[TokenGroup]:
        raise NotImplementedError

    def truncate_head(self, text: str, budget: int) -> str:
        """Drop tokens from the front until the remainder counts <= budget."""
        if budget <= 0:
            return ""
        if self.count(text) <= budget:
            return text
        groups = self.token_groups(text)
        total = 0
        start = len(text)
        for g in reversed(groups):
            if total + g.token_count > budget:
                break
            total += g.token_count
            start = g.start
        tail = text[start:]
        # Slicing mid-pretoken can retokenize slightly differently; shrink
        # until the exact recount fits.
        while tail and self.count(tail) > budget:
            regroups = self.token_groups(tail)
            if len(regroups) <= 1:
                return ""
            tail = tail[regroups[1].start :]
        return tail


class WhitespaceTokenizer(Tokenizer):
    """Counts maximal non-whitespace runs."""

    name = "whitespace"
    _RUN = re.compile(r"\S+")

    def count(self, text: str) -> int:
        return len(self._RUN.findall(text))

    def token_groups(self, text: str) -> list[TokenGroup]:
        groups: list[TokenGroup] = []
        prev_end = 0
        for m in self._RUN.finditer(text):
            groups.append(TokenGroup(prev_end, m.end(), 1))
            prev_end = m.end()
        if prev_end < len(text):
            if groups:
                last = groups.pop()
                groups.append(TokenGroup(last.start, len(text), last.token_count))
            else:
                groups.append(TokenGroup(0, len(text), 0))
        return groups


def _bytes_to_unicode() -> dict[int, str]:
    """Reversible byte -> printable-unicode map used by byte-level BPE
    vocabularies, so every byte sequence round-trips through str keys."""
    bs = list(range(ord("!"), ord("~") + 1)) + list(range(0xA1, 0xAD)) + list(range(0xAE, 0x100))
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, [chr(c) for c in cs]))


# Pre-tokenization: contractions, optional-space letter runs, digit runs,
# punctuation runs, then whitespace (held back before a non-space).
_PRETOKEN = re.compile(
    r"'s|'t|'re|'ve|'m|'ll|'d"
    r"| ?[^\W\d_]+"
    r"| ?\d+"
    r"| ?(?:[^\s\w]|_)+"
    r"|\s+(?!\S)|\s+"
)


class BpeTokenizer(Tokenizer):
    """Byte-level BPE encoder. Only token boundaries and counts matter
    here; ids come along for compatibility with the vocabulary file."""

    def __init__(self, vocab: dict[str, int], merges: list[tuple[str, str]], name: str = "bpe"):
        self.name = name
        self.vocab = vocab
        self.ranks = {pair: i for i, pair in enumerate(merges)}
        self.byte_encoder = _bytes_to_unicode()
        self._encode_pretoken = lru_cache(maxsize=65536)(self._encode_pretoken_uncached)

    @classmethod
    def from_files(cls, vocab_file: str | Path, merges_file: str | Path, name: str = "bpe") -> "BpeTokenizer":
        vocab = json.loads(Path(vocab_file).read_text(encoding="utf-8"))
        merges: list[tuple[str, str]] = []
        for line in Path(merges_file).read_text(encoding="utf-8").splitlines():
            if not line or line.startswith("#"):
                continue
            left, _, right = line.partition(" ")
            if right:
                merges.append((left, right))
        return cls(vocab, merges, name=name)

    def _bpe_parts(self, symbols: tuple[str, ...]) -> list[str]:
        parts = list(symbols)
        while len(parts) > 1:
            best = None
            best_rank = None
            for pair in zip(parts, parts[1:]):
                rank = self.ranks.get(pair)
                if rank is not None and (best_rank is None or rank < best_rank):
                    best, best_rank = pair, rank
            if best is None:
                break
            merged: list[str] = []
            i = 0
            while i < len(parts):
                if i < len(parts) - 1 and (parts[i], parts[i + 1]) == best:
                    merged.append(parts[i] + parts[i + 1])
                    i += 2
                else:
                    merged.append(parts[i])
                    i += 1
            parts = merged
        return parts

    def _encode_pretoken_uncached(self, pretoken: str) -> tuple[tuple[str, int], ...]:
        """Returns (token, byte_length) pairs for one pre-token."""
        symbols = tuple(self.byte_encoder[b] for b in pretoken.encode("utf-8"))
        if not symbols:
            return ()
        return tuple((part, len(part)) for part in self._bpe_parts(symbols))

    def count(self, text: str) -> int:
        return sum(len(self._encode_pretoken(m.group())) for m in _PRETOKEN.finditer(text))

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        for m in _PRETOKEN.finditer(text):
            for token, _ in self._encode_pretoken(m.group()):
                ids.append(self.vocab.get(token, -1))
        return ids

    def token_groups(self, text: str) -> list[TokenGroup]:
        groups: list[TokenGroup] = []
        for m in _PRETOKEN.finditer(text):
            pretoken = m.group()
            char_starts = [m.start()]
            byte_marks = [0]
            pos = 0
            for ch in pretoken:
                pos += len(ch.encode("utf-8"))
                byte_marks.append(pos)
                char_starts.append(char_starts[-1] + 1)
            char_boundaries = dict(zip(byte_marks, char_starts))
            byte_pos = 0
            group_start = m.start()
            pending = 0
            for _, blen in self._encode_pretoken(pretoken):
                byte_pos += blen
                pending += 1
                end_char = char_boundaries.get(byte_pos)
                if end_char is not None:
                    groups.append(TokenGroup(group_start, end_char, pending))
                    group_start = end_char
                    pending = 0
            # A token can only end mid-character transiently; the pretoken's
            # last boundary always aligns, so nothing is pending here.
        if not groups and text:
            groups.append(TokenGroup(0, len(text), self.count(text)))
        return groups


@dataclass(frozen=True)
class TokenizerSpec:
    """Declarative tokenizer choice, loadable from run configuration."""

    kind: str  # "whitespace" or "bpe"
    name: str = ""
    vocab_file: str | None = None
    merges_file: str | None = None

    def load(self) -> Tokenizer:
        if self.kind == "whitespace":
            tok = WhitespaceTokenizer()
            if self.name:
                tok.name = self.name
            return tok
        if self.kind == "bpe":
            if not self.vocab_file or not self.merges_file:
                raise ValueError("bpe tokenizer needs vocab_file and merges_file")
            return BpeTokenizer.from_files(self.vocab_file, self.merges_file, name=self.name or "bpe")
        raise ValueError(f"unknown tokenizer kind: {self.kind!r}")


WHITESPACE = TokenizerSpec(kind="whitespace", name="whitespace")
