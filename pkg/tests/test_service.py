from __future__ import annotations

import random

import pytest
from fastapi.testclient import TestClient

from bookfaith.service import create_app, search_text
from bookfaith.store import AnnotationStore

from conftest import make_claim

BOOK_BODY = (
    "The harbor town woke early. Gulls wheeled overhead. The lighthouse "
    "keeper watched the Harbor from above; the harbor answered with bells."
)


@pytest.fixture
def service(tmp_path):
    store = AnnotationStore(tmp_path / "data")
    store.add_book("book1", "Harbor")
    store.add_summary("sum1", "book1", "modelA")
    store.add_claims(
        "sum1",
        [make_claim("The town wakes early.", 0), make_claim("Bells answer the keeper.", 1)],
    )
    books_dir = tmp_path / "data" / "books"
    (books_dir / "book1").mkdir(parents=True)
    (books_dir / "book1" / "body.txt").write_text(BOOK_BODY, encoding="utf-8")
    app = create_app(store, books_dir=books_dir)
    return TestClient(app), store


HEADERS = {"X-Annotator": "ann1"}


class TestBookText:
    def test_full_body(self, service):
        client, _ = service
        response = client.get("/books/book1/text")
        assert response.status_code == 200
        assert response.text == BOOK_BODY

    def test_unknown_book(self, service):
        client, _ = service
        assert client.get("/books/ghost/text").status_code == 404

    def test_range_request(self, service):
        client, _ = service
        response = client.get("/books/book1/text", headers={"Range": "bytes=0-1023"})
        assert response.status_code == 206
        assert len(response.content) == min(1024, len(BOOK_BODY.encode()))

    def test_small_range_exact(self, service):
        client, _ = service
        response = client.get("/books/book1/text", headers={"Range": "bytes=4-9"})
        assert response.status_code == 206
        assert response.content == BOOK_BODY.encode()[4:10]
        assert response.headers["content-range"].startswith("bytes 4-9/")

    def test_dataset_only_403(self, tmp_path):
        store = AnnotationStore(tmp_path / "d")
        store.add_book("book1", "Harbor")
        client = TestClient(create_app(store, dataset_only=True))
        response = client.get("/books/book1/text")
        assert response.status_code == 403
        assert response.json()["error"] == "book_text_unavailable"


class TestSearch:
    def test_present_once(self, service):
        client, _ = service
        response = client.get("/books/book1/search", params={"q": "lighthouse"})
        hits = response.json()["hits"]
        assert len(hits) == 1
        start = BOOK_BODY.encode().index(b"lighthouse")
        assert hits[0]["byte_start"] == start
        assert hits[0]["byte_end"] == start + len(b"lighthouse")

    def test_absent(self, service):
        client, _ = service
        assert client.get("/books/book1/search", params={"q": "kraken"}).json()["hits"] == []

    def test_case_insensitive(self, service):
        client, _ = service
        hits = client.get("/books/book1/search", params={"q": "harbor"}).json()["hits"]
        assert len(hits) == 3

    def test_empty_query_400(self, service):
        client, _ = service
        assert client.get("/books/book1/search", params={"q": ""}).status_code == 400

    def test_overlapping_matches(self):
        hits, truncated = search_text("aaaa", "aaa")
        assert [h["byte_start"] for h in hits] == [0, 1]
        assert truncated is False

    def test_cap_and_truncation_flag(self):
        hits, truncated = search_text("ab" * 500, "ab")
        assert len(hits) == 200
        assert truncated is True

    def test_brute_force_equivalence(self):
        rng = random.Random(99)
        alphabet = "abcAB \n"
        for _ in range(300):
            body = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 120)))
            query = "".join(rng.choice(alphabet.strip() or "a") for _ in range(rng.randint(1, 3)))
            hits, _ = search_text(body, query)
            lowered, needle = body.lower(), query.lower()
            expected = [i for i in range(len(body)) if lowered.startswith(needle, i)]
            assert [h["byte_start"] for h in hits] == expected[:200]
            for h in hits:
                segment = body.encode()[h["byte_start"] : h["byte_end"]].decode()
                assert segment.lower() == needle

    def test_multibyte_offsets(self):
        body = "café CAFE café"
        hits, _ = search_text(body, "café")
        for h in hits:
            segment = body.encode()[h["byte_start"] : h["byte_end"]].decode()
            assert segment.lower() == "café"
        assert len(hits) == 2


class TestClaimsEndpoint:
    def test_claims_in_index_order(self, service):
        client, _ = service
        data = client.get("/summaries/sum1/claims", headers=HEADERS).json()
        assert [c["index"] for c in data["claims"]] == [0, 1]
        assert data["claims"][0]["annotation"] is None

    def test_unknown_summary(self, service):
        client, _ = service
        assert client.get("/summaries/ghost/claims", headers=HEADERS).status_code == 404

    def test_summary_order_stable_across_calls(self, service):
        client, _ = service
        first = client.get("/books/book1/summaries", headers=HEADERS).json()["summaries"]
        second = client.get("/books/book1/summaries", headers=HEADERS).json()["summaries"]
        assert first == second


class TestAnnotationWrites:
    def test_save_and_read_back(self, service):
        client, _ = service
        response = client.put(
            "/claims/sum1--c000/annotation",
            headers=HEADERS,
            json={"label": "Unfaithful", "reason": "nope", "evidence": ["a quote"]},
        )
        assert response.status_code == 200
        assert response.json()["version"] == 1
        data = client.get("/summaries/sum1/claims", headers=HEADERS).json()
        saved = data["claims"][0]["annotation"]
        assert saved["label"] == "Unfaithful"
        assert saved["evidence"][0]["text"] == "a quote"

    def test_invalid_label_400(self, service):
        client, _ = service
        response = client.put(
            "/claims/sum1--c000/annotation", headers=HEADERS, json={"label": "Maybe"}
        )
        assert response.status_code == 400
        assert response.json()["error"] == "InvalidLabel"

    def test_unknown_claim_404(self, service):
        client, _ = service
        response = client.put("/claims/ghost/annotation", headers=HEADERS, json={"label": "Faithful"})
        assert response.status_code == 404

    def test_stale_if_match_409(self, service):
        client, _ = service
        client.put("/claims/sum1--c000/annotation", headers=HEADERS, json={"label": "Faithful"})
        ok = client.put(
            "/claims/sum1--c000/annotation",
            headers={**HEADERS, "If-Match": "1"},
            json={"label": "Unfaithful"},
        )
        stale = client.put(
            "/claims/sum1--c000/annotation",
            headers={**HEADERS, "If-Match": "1"},
            json={"label": "PartialSupport"},
        )
        assert ok.status_code == 200
        assert stale.status_code == 409
        assert stale.json()["error"] == "VersionConflict"

    def test_comment_round_trip(self, service):
        client, _ = service
        put = client.put(
            "/summaries/sum1/comment", headers=HEADERS, json={"text": "solid but misses themes"}
        )
        assert put.status_code == 200
        got = client.get("/summaries/sum1/comment", headers=HEADERS)
        assert got.json()["text"] == "solid but misses themes"

    def test_empty_comment_400(self, service):
        client, _ = service
        assert (
            client.put("/summaries/sum1/comment", headers=HEADERS, json={"text": "  "}).status_code == 400
        )

    def test_missing_annotator_400(self, service):
        client, _ = service
        assert client.put("/claims/sum1--c000/annotation", json={"label": "Faithful"}).status_code == 400


class TestSessions:
    def _save_all(self, client):
        for cid in ("sum1--c000", "sum1--c001"):
            client.put(f"/claims/{cid}/annotation", headers=HEADERS, json={"label": "Faithful"})

    def test_incomplete_lists_missing(self, service):
        client, _ = service
        client.put("/claims/sum1--c000/annotation", headers=HEADERS, json={"label": "Faithful"})
        response = client.post("/sessions/sum1/complete", headers=HEADERS)
        assert response.status_code == 409
        body = response.json()
        assert body["missing_claims"] == ["sum1--c001"]
        assert body["missing_comment"] is True

    def test_complete_after_everything(self, service):
        client, _ = service
        self._save_all(client)
        client.put("/summaries/sum1/comment", headers=HEADERS, json={"text": "fine"})
        assert client.post("/sessions/sum1/complete", headers=HEADERS).status_code == 200
        assert client.get("/sessions/sum1", headers=HEADERS).json()["complete"] is True

    def test_completed_locks_until_reopen(self, service):
        client, _ = service
        self._save_all(client)
        client.put("/summaries/sum1/comment", headers=HEADERS, json={"text": "fine"})
        client.post("/sessions/sum1/complete", headers=HEADERS)
        locked = client.put(
            "/claims/sum1--c000/annotation", headers=HEADERS, json={"label": "Unfaithful"}
        )
        assert locked.status_code == 409
        client.post("/sessions/sum1/reopen", headers=HEADERS)
        unlocked = client.put(
            "/claims/sum1--c000/annotation", headers=HEADERS, json={"label": "Unfaithful"}
        )
        assert unlocked.status_code == 200

    def test_read_your_writes(self, service):
        client, _ = service
        client.put("/claims/sum1--c001/annotation", headers=HEADERS, json={"label": "CantVerify"})
        other_client_view = client.get("/summaries/sum1/claims", headers=HEADERS).json()
        assert other_client_view["claims"][1]["annotation"]["label"] == "CantVerify"
