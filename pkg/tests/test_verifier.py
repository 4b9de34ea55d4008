from __future__ import annotations

import pytest

from bookfaith import verifier as vf
from bookfaith.corpus import BookDocument
from bookfaith.gateway import Gateway, mock_backend
from bookfaith.retrieval import index_from_texts, retrieve
from bookfaith.tokenizers import WhitespaceTokenizer

from conftest import make_claim

WS = WhitespaceTokenizer()


def make_doc(n_tokens: int) -> BookDocument:
    body = ("tok " * n_tokens).strip() + "."
    return BookDocument(id="bk", title="T", body=body, token_count=WS.count(body))


class TestEvidenceConfig:
    def test_variants_closed(self):
        with pytest.raises(ValueError):
            vf.EvidenceConfig(variant="telepathy")

    def test_defaults_match_standard_run(self):
        config = vf.EvidenceConfig(variant=vf.BM25)
        assert config.k == 5
        assert config.passage_token_limit == 256
        assert config.margin_tokens == 2000


class TestBuildEvidence:
    def test_no_context_empty(self):
        assert vf.build_evidence(make_claim("x"), vf.EvidenceConfig(variant=vf.NO_CONTEXT)) == ""

    def test_human_evidence_joined_in_order(self, seeded_store):
        from bookfaith.store import AnnotationLabel, ClaimAnnotation, Quote

        seeded_store.save_annotation(
            ClaimAnnotation(
                claim_id="sum1--c001",
                annotator_id="ann1",
                label=AnnotationLabel.FAITHFUL,
                evidence=[Quote(text="first quote"), Quote(text="second quote")],
            )
        )
        claim = seeded_store.claims["sum1--c001"]
        out = vf.build_evidence(
            claim, vf.EvidenceConfig(variant=vf.HUMAN_EVIDENCE), annotations=seeded_store
        )
        assert out == "first quote\nsecond quote"

    def test_missing_human_evidence(self, seeded_store):
        claim = seeded_store.claims["sum1--c002"]  # no annotation at all
        with pytest.raises(vf.MissingHumanEvidence):
            vf.build_evidence(claim, vf.EvidenceConfig(variant=vf.HUMAN_EVIDENCE), annotations=seeded_store)

    def test_bm25_equals_retrieval_output(self):
        index = index_from_texts("b", ["the cat sat", "the dog ran", "cat and dog"])
        claim = make_claim("cat")
        out = vf.build_evidence(
            claim, vf.EvidenceConfig(variant=vf.BM25, k=2), index=index
        )
        assert out == retrieve(claim, index, 2).evidence_text

    def test_bm25_requires_index(self):
        with pytest.raises(vf.MissingIndex):
            vf.build_evidence(make_claim("x"), vf.EvidenceConfig(variant=vf.BM25))

    def test_entire_book_returns_body(self):
        doc = make_doc(1000)
        backend = mock_backend(context_window=10_000)
        out = vf.build_evidence(
            make_claim("x"), vf.EvidenceConfig(variant=vf.ENTIRE_BOOK), doc=doc, backend=backend
        )
        assert out == doc.body

    def test_book_too_large_for_window(self):
        doc = make_doc(130_000)
        backend = mock_backend(context_window=128_000)
        with pytest.raises(vf.BookTooLarge):
            vf.build_evidence(
                make_claim("x"), vf.EvidenceConfig(variant=vf.ENTIRE_BOOK), doc=doc, backend=backend
            )

    def test_book_under_guard_accepted(self):
        doc = make_doc(124_000)
        backend = mock_backend(context_window=128_000)
        out = vf.build_evidence(
            make_claim("x"), vf.EvidenceConfig(variant=vf.ENTIRE_BOOK), doc=doc, backend=backend
        )
        assert out == doc.body


class TestVerificationPrompt:
    def test_slots_filled(self):
        request = vf.build_verification_prompt(make_claim("Iris is a reporter."), "some passage")
        assert "Context:\nsome passage" in request.user
        assert "Statement:\nIris is a reporter." in request.user

    def test_template_wording(self):
        request = vf.build_verification_prompt(make_claim("x"), "")
        assert "carefully read the context" in request.user
        assert "True or False" in request.user

    def test_empty_evidence_keeps_section(self):
        request = vf.build_verification_prompt(make_claim("x"), "")
        assert "Context:\n\n" in request.user

    def test_huge_evidence_not_truncated(self):
        evidence = "tok " * 124_000
        request = vf.build_verification_prompt(make_claim("x"), evidence)
        assert evidence in request.user


class TestParseVerdict:
    def test_plain_true(self):
        assert vf.parse_verdict("True") is vf.Verdict.FAITHFUL

    def test_false_with_elaboration(self):
        out = vf.parse_verdict("False. The passage states they are married.")
        assert out is vf.Verdict.UNFAITHFUL

    def test_markup_and_punctuation(self):
        assert vf.parse_verdict("**True**!") is vf.Verdict.FAITHFUL

    def test_case_insensitive(self):
        assert vf.parse_verdict("the statement is FALSE") is vf.Verdict.UNFAITHFUL

    def test_no_token_ambiguous(self):
        with pytest.raises(vf.AmbiguousVerdict):
            vf.parse_verdict("It is not possible to determine")

    def test_hedged_first_sentence_ambiguous(self):
        with pytest.raises(vf.AmbiguousVerdict):
            vf.parse_verdict("It may be true or false depending on the chapter.")

    def test_untrue_not_matched(self):
        with pytest.raises(vf.AmbiguousVerdict):
            vf.parse_verdict("The claim is untrue-ish, hard to say")


class TestVerifyClaim:
    def test_fixture_true_gives_faithful_record(self):
        backend = mock_backend({"Question: Based on the context provided": "True"})
        record = vf.verify_claim(
            make_claim("Iris works at the Gazette."),
            vf.EvidenceConfig(variant=vf.NO_CONTEXT),
            backend,
            Gateway(),
        )
        assert record.verdict is vf.Verdict.FAITHFUL
        assert record.raw_answer == "True"
        assert record.evidence_text == ""

    def test_ambiguous_persisted_without_verdict(self):
        backend = mock_backend({"Question: Based on the context provided": "Cannot tell."})
        record = vf.verify_claim(
            make_claim("x"), vf.EvidenceConfig(variant=vf.NO_CONTEXT), backend, Gateway()
        )
        assert record.verdict is None
        assert record.raw_answer == "Cannot tell."

    def test_deterministic_batch(self):
        backend = mock_backend()
        gateway = Gateway()
        claims = [make_claim(f"Claim number {i}.", i) for i in range(3)]

        def run():
            return [
                vf.verify_claim(c, vf.EvidenceConfig(variant=vf.NO_CONTEXT), backend, gateway).to_json()
                for c in claims
            ]

        assert run() == run()

    def test_record_round_trip(self):
        backend = mock_backend({"Question: Based on the context provided": "False, clearly."})
        record = vf.verify_claim(
            make_claim("x"), vf.EvidenceConfig(variant=vf.NO_CONTEXT), backend, Gateway()
        )
        rebuilt = vf.VerificationRecord.from_json(record.to_json())
        assert rebuilt.to_json() == record.to_json()
        assert rebuilt.verdict is vf.Verdict.UNFAITHFUL
