"""HTTP JSON API backing the annotation interface.

Serves book text (never from exported datasets), claims with the caller's
annotations, keyword search with byte offsets, and session completion
gating. All mutations funnel through the store's serialized writer.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from fastapi.staticfiles import StaticFiles

from .store import (
    AnnotationLabel,
    AnnotationStore,
    ClaimAnnotation,
    IncompleteSession,
    Quote,
    SessionCompleted,
    SummaryComment,
)

SEARCH_HIT_CAP = 200
SNIPPET_WINDOW = 60


def search_text(body: str, query: str, cap: int = SEARCH_HIT_CAP) -> tuple[list[dict], bool]:
    """Case-insensitive substring search; hits carry byte offsets into the
    UTF-8 body, ascending, overlapping matches included."""
    hits: list[dict] = []
    lowered = body.lower()
    needle = query.lower()
    char_pos = 0
    byte_pos = 0
    start = lowered.find(needle)
    truncated = False
    while start != -1:
        if len(hits) >= cap:
            truncated = True
            break
        byte_pos += len(body[char_pos:start].encode("utf-8"))
        char_pos = start
        end = start + len(query)
        snippet_start = max(0, start - SNIPPET_WINDOW)
        snippet_end = min(len(body), end + SNIPPET_WINDOW)
        hits.append(
            {
                "byte_start": byte_pos,
                "byte_end": byte_pos + len(body[start:end].encode("utf-8")),
                "snippet": body[snippet_start:snippet_end],
            }
        )
        start = lowered.find(needle, start + 1)
    return hits, truncated


def _error(status: int, code: str, detail: str = "", **extra) -> JSONResponse:
    payload = {"error": code, "detail": detail}
    payload.update(extra)
    return JSONResponse(status_code=status, content=payload)


class BookTextProvider:
    """Reads ingested book bodies from the data directory; a dataset-only
    deployment has none and must answer 403."""

    def __init__(self, books_dir: str | Path | None):
        self.books_dir = Path(books_dir) if books_dir else None

    def body(self, book_id: str) -> str | None:
        if self.books_dir is None:
            return None
        path = self.books_dir / book_id / "body.txt"
        if not path.exists():
            return None
        return path.read_text(encoding="utf-8")


def create_app(
    store: AnnotationStore,
    books_dir: str | Path | None = None,
    dataset_only: bool = False,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="annotation service")
    texts = BookTextProvider(None if dataset_only else books_dir)

    def annotator_of(x_annotator: str | None) -> str | None:
        return x_annotator.strip() if x_annotator and x_annotator.strip() else None

    @app.get("/books/{book_id}/text")
    def book_text(book_id: str, request: Request):
        if book_id not in store.books:
            return _error(404, "UnknownBook", book_id)
        if dataset_only:
            return _error(403, "book_text_unavailable", "deployment serves released annotations only")
        body = texts.body(book_id)
        if body is None:
            return _error(403, "book_text_unavailable", "book text is not available on this deployment")
        data = body.encode("utf-8")
        range_header = request.headers.get("range")
        if range_header and range_header.startswith("bytes="):
            try:
                start_str, _, end_str = range_header[len("bytes=") :].partition("-")
                start = int(start_str)
                end = int(end_str) if end_str else len(data) - 1
            except ValueError:
                return _error(400, "InvalidRange", range_header)
            if start >= len(data) or start > end:
                return _error(416, "RangeNotSatisfiable", range_header)
            end = min(end, len(data) - 1)
            piece = data[start : end + 1]
            return Response(
                content=piece,
                status_code=206,
                media_type="text/plain; charset=utf-8",
                headers={
                    "Content-Range": f"bytes {start}-{end}/{len(data)}",
                    "Accept-Ranges": "bytes",
                },
            )
        return PlainTextResponse(body, headers={"Accept-Ranges": "bytes"})

    @app.get("/books/{book_id}/search")
    def book_search(book_id: str, q: str = Query(default="")):
        if book_id not in store.books:
            return _error(404, "UnknownBook", book_id)
        if not q:
            return _error(400, "EmptyQuery", "q must be non-empty")
        if dataset_only:
            return _error(403, "book_text_unavailable", "deployment serves released annotations only")
        body = texts.body(book_id)
        if body is None:
            return _error(403, "book_text_unavailable", "book text is not available on this deployment")
        hits, truncated = search_text(body, q)
        return {"hits": hits, "truncated": truncated}

    @app.get("/books/{book_id}/summaries")
    def book_summaries(book_id: str, x_annotator: str | None = Header(default=None)):
        if book_id not in store.books:
            return _error(404, "UnknownBook", book_id)
        annotator = annotator_of(x_annotator)
        if annotator is None:
            return _error(400, "MissingAnnotator", "set the X-Annotator header")
        order = store.assignment_order(annotator, book_id)
        return {
            "book_id": book_id,
            "title": store.books[book_id]["title"],
            "summaries": [
                {"id": sid, "model": store.summaries[sid].model, "refused": store.summaries[sid].refused}
                for sid in order
            ],
        }

    @app.get("/summaries/{summary_id}/claims")
    def summary_claims(summary_id: str, x_annotator: str | None = Header(default=None)):
        meta = store.summaries.get(summary_id)
        if meta is None:
            return _error(404, "UnknownSummary", summary_id)
        annotator = annotator_of(x_annotator)
        rows = []
        for cid in meta.claim_ids:
            claim = store.claims[cid]
            annotation = store.get_annotation(cid, annotator) if annotator else None
            rows.append(
                {
                    "claim_id": cid,
                    "index": claim.index,
                    "text": claim.text,
                    "annotation": annotation.to_json() if annotation else None,
                }
            )
        rows.sort(key=lambda r: r["index"])
        session = store.session_state(summary_id, annotator) if annotator else None
        return {
            "summary_id": summary_id,
            "book_id": meta.book_id,
            "model": meta.model,
            "claims": rows,
            "session": session,
        }

    @app.put("/claims/{claim_id}/annotation")
    async def put_annotation(
        claim_id: str,
        request: Request,
        x_annotator: str | None = Header(default=None),
        if_match: str | None = Header(default=None),
    ):
        annotator = annotator_of(x_annotator)
        if annotator is None:
            return _error(400, "MissingAnnotator", "set the X-Annotator header")
        if claim_id not in store.claims:
            return _error(404, "UnknownClaim", claim_id)
        payload = await request.json()
        label_raw = payload.get("label")
        try:
            label = AnnotationLabel(label_raw)
        except ValueError:
            return _error(400, "InvalidLabel", f"{label_raw!r} is not one of {[l.value for l in AnnotationLabel]}")
        evidence = []
        for quote in payload.get("evidence", []):
            if isinstance(quote, str):
                evidence.append(Quote(text=quote))
            else:
                evidence.append(
                    Quote(
                        text=quote.get("text", ""),
                        byte_start=quote.get("byte_start"),
                        byte_end=quote.get("byte_end"),
                    )
                )
        if if_match is not None:
            current = store.get_annotation(claim_id, annotator)
            current_version = current.version if current else 0
            if str(current_version) != if_match.strip():
                return _error(
                    409, "VersionConflict", f"stored version is {current_version}, If-Match was {if_match}"
                )
        try:
            version = store.save_annotation(
                ClaimAnnotation(
                    claim_id=claim_id,
                    annotator_id=annotator,
                    label=label,
                    reason=payload.get("reason"),
                    evidence=evidence,
                )
            )
        except SessionCompleted as exc:
            return _error(409, "SessionCompleted", str(exc))
        return {"claim_id": claim_id, "version": version}

    @app.put("/summaries/{summary_id}/comment")
    async def put_comment(
        summary_id: str,
        request: Request,
        x_annotator: str | None = Header(default=None),
    ):
        annotator = annotator_of(x_annotator)
        if annotator is None:
            return _error(400, "MissingAnnotator", "set the X-Annotator header")
        if summary_id not in store.summaries:
            return _error(404, "UnknownSummary", summary_id)
        payload = await request.json()
        text = (payload.get("text") or "").strip()
        if not text:
            return _error(400, "EmptyComment", "a non-empty comment is required")
        version = store.save_comment(
            SummaryComment(summary_id=summary_id, annotator_id=annotator, text=text)
        )
        return {"summary_id": summary_id, "version": version}

    @app.get("/summaries/{summary_id}/comment")
    def get_comment(summary_id: str, x_annotator: str | None = Header(default=None)):
        annotator = annotator_of(x_annotator)
        if summary_id not in store.summaries:
            return _error(404, "UnknownSummary", summary_id)
        comment = store.comments.get((summary_id, annotator)) if annotator else None
        if comment is None:
            return _error(404, "NoComment", summary_id)
        return comment.to_json()

    @app.get("/sessions/{summary_id}")
    def session_state(summary_id: str, x_annotator: str | None = Header(default=None)):
        annotator = annotator_of(x_annotator)
        if annotator is None:
            return _error(400, "MissingAnnotator", "set the X-Annotator header")
        if summary_id not in store.summaries:
            return _error(404, "UnknownSummary", summary_id)
        return store.session_state(summary_id, annotator)

    @app.post("/sessions/{summary_id}/complete")
    def complete_session(summary_id: str, x_annotator: str | None = Header(default=None)):
        annotator = annotator_of(x_annotator)
        if annotator is None:
            return _error(400, "MissingAnnotator", "set the X-Annotator header")
        if summary_id not in store.summaries:
            return _error(404, "UnknownSummary", summary_id)
        try:
            store.complete_session(summary_id, annotator)
        except IncompleteSession as exc:
            return _error(
                409,
                "IncompleteSession",
                str(exc),
                missing_claims=exc.missing_claims,
                missing_comment=exc.missing_comment,
            )
        return {"summary_id": summary_id, "complete": True}

    @app.post("/sessions/{summary_id}/reopen")
    def reopen_session(summary_id: str, x_annotator: str | None = Header(default=None)):
        annotator = annotator_of(x_annotator)
        if annotator is None:
            return _error(400, "MissingAnnotator", "set the X-Annotator header")
        if summary_id not in store.summaries:
            return _error(404, "UnknownSummary", summary_id)
        store.reopen_session(summary_id, annotator)
        return {"summary_id": summary_id, "complete": False}

    if ui_dir and Path(ui_dir).exists():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
