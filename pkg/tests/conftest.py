from __future__ import annotations

import json
from collections import Counter
from pathlib import Path

import pytest

from bookfaith.claims import Claim
from bookfaith.store import AnnotationLabel, AnnotationStore, ClaimAnnotation, Quote
from bookfaith.tokenizers import BpeTokenizer, WhitespaceTokenizer, _bytes_to_unicode

SAMPLE_TEXT = (
    "The harbor town woke early. Fishermen hauled their nets while gulls "
    "wheeled overhead! Did anyone notice the stranger on the pier? She said "
    '"Wait for the tide." Then the bells rang, and the market opened. '
    "Children chased each other between the stalls. An old captain told "
    "stories about storms, shipwrecks, and the lighthouse keeper's daughter. "
    "Nobody believed him. The afternoon brought rain; the evening brought "
    "quiet. Lanterns swayed on their hooks. By midnight the town slept again."
)


def train_tiny_bpe(corpus: str, n_merges: int = 120) -> tuple[dict[str, int], list[tuple[str, str]]]:
    """Train a minimal BPE on a corpus: greedy most-frequent-pair merges
    over byte-encoded pretokens. Enough to exercise the real file format."""
    from bookfaith.tokenizers import _PRETOKEN

    byte_encoder = _bytes_to_unicode()
    words = Counter()
    for m in _PRETOKEN.finditer(corpus):
        symbols = tuple(byte_encoder[b] for b in m.group().encode("utf-8"))
        if symbols:
            words[symbols] += 1
    merges: list[tuple[str, str]] = []
    vocab: set[str] = set()
    for symbols in words:
        vocab.update(symbols)
    for _ in range(n_merges):
        pairs: Counter = Counter()
        for symbols, freq in words.items():
            for pair in zip(symbols, symbols[1:]):
                pairs[pair] += freq
        if not pairs:
            break
        best, best_count = max(pairs.items(), key=lambda kv: (kv[1], kv[0]))
        if best_count < 2:
            break
        merges.append(best)
        vocab.add(best[0] + best[1])
        new_words = Counter()
        for symbols, freq in words.items():
            merged = []
            i = 0
            while i < len(symbols):
                if i < len(symbols) - 1 and (symbols[i], symbols[i + 1]) == best:
                    merged.append(symbols[i] + symbols[i + 1])
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            new_words[tuple(merged)] += freq
        words = new_words
    all_bytes = [byte_encoder[b] for b in range(256)]
    ordered_vocab = {tok: i for i, tok in enumerate(all_bytes)}
    for tok in sorted(vocab):
        if tok not in ordered_vocab:
            ordered_vocab[tok] = len(ordered_vocab)
    return ordered_vocab, merges


@pytest.fixture(scope="session")
def bpe_files(tmp_path_factory) -> tuple[Path, Path]:
    vocab, merges = train_tiny_bpe(SAMPLE_TEXT * 3)
    directory = tmp_path_factory.mktemp("bpe")
    vocab_path = directory / "encoder.json"
    merges_path = directory / "merges.txt"
    vocab_path.write_text(json.dumps(vocab), encoding="utf-8")
    merges_path.write_text(
        "#version: test\n" + "\n".join(f"{a} {b}" for a, b in merges) + "\n", encoding="utf-8"
    )
    return vocab_path, merges_path


@pytest.fixture(scope="session")
def bpe_tokenizer(bpe_files) -> BpeTokenizer:
    vocab_path, merges_path = bpe_files
    return BpeTokenizer.from_files(vocab_path, merges_path, name="tiny-bpe")


@pytest.fixture
def whitespace() -> WhitespaceTokenizer:
    return WhitespaceTokenizer()


def make_claim(text: str, index: int = 0, summary_id: str = "sum1") -> Claim:
    return Claim(id=f"{summary_id}--c{index:03d}", summary_id=summary_id, index=index, text=text)


@pytest.fixture
def seeded_store(tmp_path) -> AnnotationStore:
    """A store with one book, one summary, three claims, partial annotations."""
    store = AnnotationStore(tmp_path / "data")
    store.add_book("book1", "The Harbor Town")
    store.add_summary("sum1", "book1", "modelA")
    store.add_claims(
        "sum1",
        [
            make_claim("The town wakes early.", 0),
            make_claim("A stranger stands on the pier.", 1),
            make_claim("The captain's stories are believed by everyone.", 2),
        ],
    )
    store.save_annotation(
        ClaimAnnotation(
            claim_id="sum1--c000",
            annotator_id="ann1",
            label=AnnotationLabel.FAITHFUL,
            reason="Stated in the opening line.",
            evidence=[Quote(text="The harbor town woke early.")],
        )
    )
    return store
