"""Persistent store for the annotation data model.

Holds claims, human labels, free-form reasons, evidence quotes,
summary-level comments, taxonomy codes, equivalence pairs, assignments,
and annotation sessions. Storage is one JSON document per book plus an
append-only audit log; every write is appended to the log (fsynced) and
then snapshotted atomically, so a crash between the two is recovered by
replay on the next load.
"""

from __future__ import annotations

import json
import os
import random
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .claims import Claim
from .util import canonical_json, canonical_json_line, now, sha256_hex


class AnnotationLabel(str, Enum):
    FAITHFUL = "Faithful"
    UNFAITHFUL = "Unfaithful"
    PARTIAL_SUPPORT = "PartialSupport"
    CANT_VERIFY = "CantVerify"


TAXONOMY_DIMENSIONS: dict[str, tuple[str, ...]] = {
    "ClaimType": ("State", "Event", "CauseEffect", "HighLevel", "Introspection"),
    "ReasoningType": ("Direct", "Indirect", "Subjective", "ExtraInfo"),
    "EvidenceCoverage": ("Complete", "Partial", "Irrelevant", "NotApplicable"),
    "ReasoningClaimRelation": ("DirectContradiction", "IndirectContradiction", "LackOfSupport"),
    "CommentIssue": (
        "Chronology",
        "Omissions",
        "Factuality",
        "Overemphasis",
        "Underemphasis",
        "VagueGeneric",
        "Repetitive",
        "DataInfluenced",
        "Comprehensive",
        "WellDone",
    ),
    "OmissionType": ("Characters", "Events", "Attributes", "Relations", "Themes"),
}


class UnknownClaim(KeyError):
    pass


class UnknownSummary(KeyError):
    pass


class UnknownBook(KeyError):
    pass


class SchemaMismatch(ValueError):
    """Dataset file does not match the expected schema; the message names
    the first offending record."""


class SessionCompleted(RuntimeError):
    pass


class IncompleteSession(RuntimeError):
    def __init__(self, missing_claims: list[str], missing_comment: bool):
        detail = []
        if missing_claims:
            detail.append(f"unsaved claims: {', '.join(missing_claims)}")
        if missing_comment:
            detail.append("missing summary comment")
        super().__init__("; ".join(detail) or "incomplete session")
        self.missing_claims = missing_claims
        self.missing_comment = missing_comment


class MissingAnnotation(KeyError):
    pass


@dataclass(frozen=True)
class Quote:
    text: str
    byte_start: int | None = None
    byte_end: int | None = None

    def to_json(self) -> dict:
        return {"text": self.text, "byte_start": self.byte_start, "byte_end": self.byte_end}

    @classmethod
    def from_json(cls, data: dict) -> "Quote":
        return cls(text=data["text"], byte_start=data.get("byte_start"), byte_end=data.get("byte_end"))


@dataclass
class ClaimAnnotation:
    claim_id: str
    annotator_id: str
    label: AnnotationLabel
    reason: str | None = None
    evidence: list[Quote] = field(default_factory=list)
    updated_at: float = 0.0
    version: int = 0

    def to_json(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "annotator_id": self.annotator_id,
            "label": self.label.value,
            "reason": self.reason,
            "evidence": [q.to_json() for q in self.evidence],
            "updated_at": self.updated_at,
            "version": self.version,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ClaimAnnotation":
        return cls(
            claim_id=data["claim_id"],
            annotator_id=data["annotator_id"],
            label=AnnotationLabel(data["label"]),
            reason=data.get("reason"),
            evidence=[Quote.from_json(q) for q in data.get("evidence", [])],
            updated_at=data.get("updated_at", 0.0),
            version=data.get("version", 0),
        )


@dataclass
class SummaryComment:
    summary_id: str
    annotator_id: str
    text: str
    updated_at: float = 0.0
    version: int = 0

    def to_json(self) -> dict:
        return {
            "summary_id": self.summary_id,
            "annotator_id": self.annotator_id,
            "text": self.text,
            "updated_at": self.updated_at,
            "version": self.version,
        }


@dataclass(frozen=True)
class TaxonomyCode:
    subject: str  # claim_id or summary_id
    dimension: str
    value: str

    def __post_init__(self):
        allowed = TAXONOMY_DIMENSIONS.get(self.dimension)
        if allowed is None:
            raise ValueError(f"unknown taxonomy dimension {self.dimension!r}")
        if self.value not in allowed:
            raise ValueError(f"{self.value!r} is not a {self.dimension} value")

    def to_json(self) -> dict:
        return {"subject": self.subject, "dimension": self.dimension, "value": self.value}


@dataclass(frozen=True)
class EquivalencePair:
    claim_id_a: str
    claim_id_b: str
    marked_by: str

    def to_json(self) -> dict:
        return {"claim_id_a": self.claim_id_a, "claim_id_b": self.claim_id_b, "marked_by": self.marked_by}


@dataclass
class SummaryMeta:
    id: str
    book_id: str
    model: str
    refused: bool = False
    claim_ids: list[str] = field(default_factory=list)


@dataclass
class QueryRecord:
    book_id: str
    summary_id: str
    model: str
    claim: Claim
    annotation: ClaimAnnotation


# Default name mapping applied when importing a released dataset whose
# field names or label spellings differ from the internal ones.
DEFAULT_SCHEMA_MAP = {
    "fields": {},
    "labels": {
        "faithful": "Faithful",
        "unfaithful": "Unfaithful",
        "partial support": "PartialSupport",
        "partially supported": "PartialSupport",
        "partial_support": "PartialSupport",
        "can't verify": "CantVerify",
        "cant verify": "CantVerify",
        "cant_verify": "CantVerify",
        "unverifiable": "CantVerify",
    },
}


def _normalize_label(raw: str, schema_map: dict, path: str) -> AnnotationLabel:
    mapped = schema_map.get("labels", {}).get(raw.lower(), raw)
    try:
        return AnnotationLabel(mapped)
    except ValueError as exc:
        raise SchemaMismatch(f"{path}: unknown label {raw!r}") from exc


class AnnotationStore:
    """Single-writer store. Pass ``data_dir=None`` for a purely in-memory
    store (used when importing released datasets)."""

    def __init__(self, data_dir: str | Path | None, clock=now):
        self._lock = threading.RLock()
        self._clock = clock
        self._seq = 0
        self.books: dict[str, dict] = {}  # id -> {"id", "title"}
        self.summaries: dict[str, SummaryMeta] = {}
        self.claims: dict[str, Claim] = {}
        self.annotations: dict[str, dict[str, ClaimAnnotation]] = {}  # claim -> annotator -> ann
        self.comments: dict[tuple[str, str], SummaryComment] = {}
        self.codes: list[TaxonomyCode] = []
        self.assignments: dict[tuple[str, str], list[str]] = {}  # (annotator, book) -> summary order
        self.equivalence_pairs: list[EquivalencePair] = []
        self.completed_sessions: set[tuple[str, str]] = set()  # (summary, annotator)
        self.data_dir = Path(data_dir) if data_dir is not None else None
        if self.data_dir is not None:
            (self.data_dir / "annotations").mkdir(parents=True, exist_ok=True)
            self._load()

    # ------------------------------------------------------------------
    # persistence

    def _audit_path(self) -> Path:
        return self.data_dir / "audit.log"

    def _book_path(self, book_id: str) -> Path:
        return self.data_dir / "annotations" / f"{book_id}.json"

    def _append_audit(self, action: str, data: dict) -> None:
        if self.data_dir is None:
            return
        entry = {"seq": self._seq, "ts": self._clock(), "action": action, "data": data}
        with open(self._audit_path(), "a", encoding="utf-8") as fh:
            fh.write(canonical_json_line(entry) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _book_snapshot(self, book_id: str) -> dict:
        summaries = []
        for sid in sorted(s.id for s in self.summaries.values() if s.book_id == book_id):
            meta = self.summaries[sid]
            summaries.append(
                {
                    "id": meta.id,
                    "model": meta.model,
                    "refused": meta.refused,
                    "claims": [self.claims[cid].to_json() for cid in meta.claim_ids],
                    "annotations": [
                        self.annotations[cid][annotator].to_json()
                        for cid in meta.claim_ids
                        for annotator in sorted(self.annotations.get(cid, {}))
                    ],
                    "comments": [
                        c.to_json()
                        for (csid, _), c in sorted(self.comments.items())
                        if csid == meta.id
                    ],
                }
            )
        claim_ids = {cid for s in self.summaries.values() if s.book_id == book_id for cid in s.claim_ids}
        summary_ids = {s.id for s in self.summaries.values() if s.book_id == book_id}
        subjects = claim_ids | summary_ids
        return {
            "last_seq": self._seq,
            "book": self.books[book_id],
            "summaries": summaries,
            "codes": [c.to_json() for c in self.codes if c.subject in subjects],
            "equivalence_pairs": [
                p.to_json() for p in self.equivalence_pairs if p.claim_id_a in claim_ids
            ],
            "assignments": {
                annotator: order
                for (annotator, bid), order in sorted(self.assignments.items())
                if bid == book_id
            },
            "completed_sessions": sorted(
                [list(pair) for pair in self.completed_sessions if pair[0] in summary_ids]
            ),
        }

    def _write_snapshot(self, book_id: str) -> None:
        if self.data_dir is None:
            return
        path = self._book_path(book_id)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(canonical_json(self._book_snapshot(book_id)), encoding="utf-8")
        os.replace(tmp, path)

    def _load(self) -> None:
        max_snapshot_seq = 0
        for path in sorted((self.data_dir / "annotations").glob("*.json")):
            snapshot = json.loads(path.read_text(encoding="utf-8"))
            self._apply_snapshot(snapshot)
            max_snapshot_seq = max(max_snapshot_seq, snapshot.get("last_seq", 0))
        self._seq = max_snapshot_seq
        audit = self._audit_path()
        if audit.exists():
            for line in audit.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                entry = json.loads(line)
                if entry["seq"] > max_snapshot_seq:
                    self._replay(entry)
                self._seq = max(self._seq, entry["seq"])

    def _apply_snapshot(self, snapshot: dict) -> None:
        book = snapshot["book"]
        self.books[book["id"]] = book
        for raw in snapshot["summaries"]:
            meta = SummaryMeta(id=raw["id"], book_id=book["id"], model=raw["model"], refused=raw["refused"])
            self.summaries[meta.id] = meta
            for claim_raw in raw["claims"]:
                claim = Claim.from_json(claim_raw)
                self.claims[claim.id] = claim
                meta.claim_ids.append(claim.id)
            for ann_raw in raw["annotations"]:
                ann = ClaimAnnotation.from_json(ann_raw)
                self.annotations.setdefault(ann.claim_id, {})[ann.annotator_id] = ann
            for com_raw in raw["comments"]:
                comment = SummaryComment(
                    summary_id=com_raw["summary_id"],
                    annotator_id=com_raw["annotator_id"],
                    text=com_raw["text"],
                    updated_at=com_raw.get("updated_at", 0.0),
                    version=com_raw.get("version", 0),
                )
                self.comments[(comment.summary_id, comment.annotator_id)] = comment
        for code_raw in snapshot.get("codes", []):
            self.codes.append(TaxonomyCode(**code_raw))
        for pair_raw in snapshot.get("equivalence_pairs", []):
            self.equivalence_pairs.append(EquivalencePair(**pair_raw))
        for annotator, order in snapshot.get("assignments", {}).items():
            self.assignments[(annotator, book["id"])] = list(order)
        for summary_id, annotator in snapshot.get("completed_sessions", []):
            self.completed_sessions.add((summary_id, annotator))

    def _replay(self, entry: dict) -> None:
        action, data = entry["action"], entry["data"]
        if action == "add_book":
            self.books[data["id"]] = {"id": data["id"], "title": data["title"]}
        elif action == "add_summary":
            self.summaries[data["id"]] = SummaryMeta(
                id=data["id"], book_id=data["book_id"], model=data["model"], refused=data["refused"]
            )
        elif action == "add_claim":
            claim = Claim.from_json(data)
            self.claims[claim.id] = claim
            self.summaries[claim.summary_id].claim_ids.append(claim.id)
        elif action == "save_annotation":
            ann = ClaimAnnotation.from_json(data)
            self.annotations.setdefault(ann.claim_id, {})[ann.annotator_id] = ann
        elif action == "save_comment":
            comment = SummaryComment(
                summary_id=data["summary_id"],
                annotator_id=data["annotator_id"],
                text=data["text"],
                updated_at=data["updated_at"],
                version=data["version"],
            )
            self.comments[(comment.summary_id, comment.annotator_id)] = comment
        elif action == "add_code":
            self.codes.append(TaxonomyCode(**data))
        elif action == "add_equivalence_pair":
            self.equivalence_pairs.append(EquivalencePair(**data))
        elif action == "create_assignment":
            self.assignments[(data["annotator_id"], data["book_id"])] = list(data["order"])
        elif action == "complete_session":
            self.completed_sessions.add((data["summary_id"], data["annotator_id"]))
        elif action == "reopen_session":
            self.completed_sessions.discard((data["summary_id"], data["annotator_id"]))

    # ------------------------------------------------------------------
    # registration

    def add_book(self, book_id: str, title: str) -> None:
        with self._lock:
            if book_id in self.books:
                return
            self._seq += 1
            self.books[book_id] = {"id": book_id, "title": title}
            self._append_audit("add_book", {"id": book_id, "title": title})
            self._write_snapshot(book_id)

    def add_summary(self, summary_id: str, book_id: str, model: str, refused: bool = False) -> None:
        with self._lock:
            if book_id not in self.books:
                raise UnknownBook(book_id)
            if summary_id in self.summaries:
                return
            self._seq += 1
            self.summaries[summary_id] = SummaryMeta(
                id=summary_id, book_id=book_id, model=model, refused=refused
            )
            self._append_audit(
                "add_summary",
                {"id": summary_id, "book_id": book_id, "model": model, "refused": refused},
            )
            self._write_snapshot(book_id)

    def add_claims(self, summary_id: str, claims: list[Claim]) -> None:
        with self._lock:
            meta = self.summaries.get(summary_id)
            if meta is None:
                raise UnknownSummary(summary_id)
            for claim in claims:
                if claim.id in self.claims:
                    continue
                self._seq += 1
                self.claims[claim.id] = claim
                meta.claim_ids.append(claim.id)
                self._append_audit("add_claim", claim.to_json())
            self._write_snapshot(meta.book_id)

    # ------------------------------------------------------------------
    # writes

    def save_annotation(self, annotation: ClaimAnnotation) -> int:
        """Durable upsert keyed by (claim, annotator); returns the new
        monotone version."""
        with self._lock:
            claim = self.claims.get(annotation.claim_id)
            if claim is None:
                raise UnknownClaim(annotation.claim_id)
            meta = self.summaries[claim.summary_id]
            if (claim.summary_id, annotation.annotator_id) in self.completed_sessions:
                raise SessionCompleted(f"session for {claim.summary_id} is complete; reopen first")
            previous = self.annotations.get(annotation.claim_id, {}).get(annotation.annotator_id)
            annotation.version = (previous.version if previous else 0) + 1
            annotation.updated_at = self._clock()
            self._seq += 1
            self.annotations.setdefault(annotation.claim_id, {})[annotation.annotator_id] = annotation
            self._append_audit("save_annotation", annotation.to_json())
            self._write_snapshot(meta.book_id)
            return annotation.version

    def save_comment(self, comment: SummaryComment) -> int:
        with self._lock:
            meta = self.summaries.get(comment.summary_id)
            if meta is None:
                raise UnknownSummary(comment.summary_id)
            if not comment.text.strip():
                raise ValueError("comment text must be non-empty")
            previous = self.comments.get((comment.summary_id, comment.annotator_id))
            comment.version = (previous.version if previous else 0) + 1
            comment.updated_at = self._clock()
            self._seq += 1
            self.comments[(comment.summary_id, comment.annotator_id)] = comment
            self._append_audit("save_comment", comment.to_json())
            self._write_snapshot(meta.book_id)
            return comment.version

    def add_code(self, code: TaxonomyCode) -> None:
        with self._lock:
            if code.subject not in self.claims and code.subject not in self.summaries:
                raise UnknownClaim(code.subject)
            if code in self.codes:
                return
            self._seq += 1
            self.codes.append(code)
            self._append_audit("add_code", code.to_json())
            self._write_snapshot(self._book_of_subject(code.subject))

    def add_equivalence_pair(self, pair: EquivalencePair) -> None:
        with self._lock:
            for cid in (pair.claim_id_a, pair.claim_id_b):
                if cid not in self.claims:
                    raise UnknownClaim(cid)
            claim_a, claim_b = self.claims[pair.claim_id_a], self.claims[pair.claim_id_b]
            book_a = self.summaries[claim_a.summary_id].book_id
            book_b = self.summaries[claim_b.summary_id].book_id
            if book_a != book_b:
                raise ValueError("equivalence pairs must join claims from the same book")
            if claim_a.summary_id == claim_b.summary_id:
                raise ValueError("equivalence pairs must join claims from different summaries")
            self._seq += 1
            self.equivalence_pairs.append(pair)
            self._append_audit("add_equivalence_pair", pair.to_json())
            self._write_snapshot(book_a)

    def _book_of_subject(self, subject: str) -> str:
        if subject in self.claims:
            return self.summaries[self.claims[subject].summary_id].book_id
        return self.summaries[subject].book_id

    # ------------------------------------------------------------------
    # assignments & sessions

    def create_assignment(self, annotator_id: str, book_id: str, seed: int | None = None) -> list[str]:
        """Record a randomized-per-assignment summary order; the order is
        fixed at creation time and survives reloads."""
        with self._lock:
            if book_id not in self.books:
                raise UnknownBook(book_id)
            key = (annotator_id, book_id)
            if key in self.assignments:
                return list(self.assignments[key])
            order = sorted(s.id for s in self.summaries.values() if s.book_id == book_id)
            if seed is None:
                seed = int(sha256_hex(f"{annotator_id}:{book_id}")[:8], 16)
            random.Random(seed).shuffle(order)
            self._seq += 1
            self.assignments[key] = order
            self._append_audit(
                "create_assignment", {"annotator_id": annotator_id, "book_id": book_id, "order": order}
            )
            self._write_snapshot(book_id)
            return list(order)

    def assignment_order(self, annotator_id: str, book_id: str) -> list[str]:
        key = (annotator_id, book_id)
        if key not in self.assignments:
            return self.create_assignment(annotator_id, book_id)
        return list(self.assignments[key])

    def session_state(self, summary_id: str, annotator_id: str) -> dict:
        meta = self.summaries.get(summary_id)
        if meta is None:
            raise UnknownSummary(summary_id)
        progress = {
            cid: ("saved" if annotator_id in self.annotations.get(cid, {}) else "unvisited")
            for cid in meta.claim_ids
        }
        return {
            "summary_id": summary_id,
            "annotator_id": annotator_id,
            "progress": progress,
            "has_comment": (summary_id, annotator_id) in self.comments,
            "complete": (summary_id, annotator_id) in self.completed_sessions,
        }

    def complete_session(self, summary_id: str, annotator_id: str) -> None:
        with self._lock:
            state = self.session_state(summary_id, annotator_id)
            missing = [cid for cid, status in state["progress"].items() if status != "saved"]
            missing_comment = not state["has_comment"]
            if missing or missing_comment:
                raise IncompleteSession(missing, missing_comment)
            self._seq += 1
            self.completed_sessions.add((summary_id, annotator_id))
            self._append_audit("complete_session", {"summary_id": summary_id, "annotator_id": annotator_id})
            self._write_snapshot(self.summaries[summary_id].book_id)

    def reopen_session(self, summary_id: str, annotator_id: str) -> None:
        with self._lock:
            if summary_id not in self.summaries:
                raise UnknownSummary(summary_id)
            self._seq += 1
            self.completed_sessions.discard((summary_id, annotator_id))
            self._append_audit("reopen_session", {"summary_id": summary_id, "annotator_id": annotator_id})
            self._write_snapshot(self.summaries[summary_id].book_id)

    # ------------------------------------------------------------------
    # reads

    def get_annotation(self, claim_id: str, annotator_id: str) -> ClaimAnnotation | None:
        return self.annotations.get(claim_id, {}).get(annotator_id)

    def annotations_for_claim(self, claim_id: str) -> list[ClaimAnnotation]:
        return [self.annotations[claim_id][a] for a in sorted(self.annotations.get(claim_id, {}))]

    def human_evidence(self, claim_id: str) -> list[Quote]:
        quotes: list[Quote] = []
        for ann in self.annotations_for_claim(claim_id):
            quotes.extend(ann.evidence)
        return quotes

    def query(
        self,
        book: str | None = None,
        model: str | None = None,
        label: AnnotationLabel | str | None = None,
        annotator: str | None = None,
        dimension: str | None = None,
    ) -> list[QueryRecord]:
        """Conjunctive filter over annotations, in (book, summary, claim
        index) order."""
        if isinstance(label, str):
            label = AnnotationLabel(label)
        coded_subjects = (
            {c.subject for c in self.codes if c.dimension == dimension} if dimension else None
        )
        records: list[QueryRecord] = []
        for meta in self.summaries.values():
            if book and meta.book_id != book:
                continue
            if model and meta.model != model:
                continue
            for cid in meta.claim_ids:
                for annotator_id in sorted(self.annotations.get(cid, {})):
                    ann = self.annotations[cid][annotator_id]
                    if label and ann.label != label:
                        continue
                    if annotator and annotator_id != annotator:
                        continue
                    if coded_subjects is not None and cid not in coded_subjects:
                        continue
                    records.append(
                        QueryRecord(
                            book_id=meta.book_id,
                            summary_id=meta.id,
                            model=meta.model,
                            claim=self.claims[cid],
                            annotation=ann,
                        )
                    )
        records.sort(key=lambda r: (r.book_id, r.summary_id, r.claim.index))
        return records

    def counts(self) -> dict:
        reasons = sum(
            1 for anns in self.annotations.values() for a in anns.values() if a.reason and a.reason.strip()
        )
        evidence = sum(len(a.evidence) for anns in self.annotations.values() for a in anns.values())
        return {
            "books": len(self.books),
            "summaries": len(self.summaries),
            "claims": len(self.claims),
            "annotations": sum(len(anns) for anns in self.annotations.values()),
            "reasons": reasons,
            "evidence": evidence,
            "comments": len(self.comments),
        }

    def check_referential_integrity(self) -> list[str]:
        problems = []
        for cid in self.annotations:
            if cid not in self.claims:
                problems.append(f"annotation for unknown claim {cid}")
        for code in self.codes:
            if code.subject not in self.claims and code.subject not in self.summaries:
                problems.append(f"code for unknown subject {code.subject}")
        for pair in self.equivalence_pairs:
            for cid in (pair.claim_id_a, pair.claim_id_b):
                if cid not in self.claims:
                    problems.append(f"equivalence pair references unknown claim {cid}")
        return problems

    # ------------------------------------------------------------------
    # dataset import / export (book bodies never included)

    def export_dataset(self) -> dict:
        books = [self.books[bid] for bid in sorted(self.books)]
        summaries = []
        for sid in sorted(self.summaries):
            meta = self.summaries[sid]
            summaries.append(
                {
                    "id": meta.id,
                    "book_id": meta.book_id,
                    "model": meta.model,
                    "refused": meta.refused,
                    "claims": [
                        {
                            "claim_id": cid,
                            "index": self.claims[cid].index,
                            "text": self.claims[cid].text,
                            "annotations": [
                                {
                                    "annotator_id": a.annotator_id,
                                    "label": a.label.value,
                                    "reason": a.reason,
                                    "evidence": [q.to_json() for q in a.evidence],
                                }
                                for a in self.annotations_for_claim(cid)
                            ],
                        }
                        for cid in meta.claim_ids
                    ],
                    "comments": [
                        {"annotator_id": c.annotator_id, "text": c.text}
                        for (csid, _), c in sorted(self.comments.items())
                        if csid == sid
                    ],
                }
            )
        return {
            "books": books,
            "summaries": summaries,
            "codes": [c.to_json() for c in self.codes],
            "equivalence_pairs": [p.to_json() for p in self.equivalence_pairs],
        }

    def export_dataset_file(self, path: str | Path) -> None:
        Path(path).write_text(canonical_json(self.export_dataset()), encoding="utf-8")


def _mapped(
    record: dict,
    name: str,
    schema_map: dict,
    path: str,
    required: bool = True,
    default=None,
    scope: str = "",
):
    """Field lookup through the schema map; scoped names like
    "claim.text" take precedence over bare ones."""
    fields = schema_map.get("fields", {})
    key = fields.get(f"{scope}.{name}") if scope else None
    if key is None:
        key = fields.get(name, name)
    if key not in record:
        if required:
            raise SchemaMismatch(f"{path}: missing field {key!r}")
        return default
    return record[key]


def import_fables(path: str | Path, schema_map: dict | None = None) -> AnnotationStore:
    """Load a released annotation dataset into an in-memory store.

    Book bodies are not part of the release; anything needing them keeps
    degrading gracefully (e.g. the text endpoint reports unavailability).
    """
    schema_map = schema_map or DEFAULT_SCHEMA_MAP
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise SchemaMismatch(f"{path}: expected a JSON object at the top level")

    store = AnnotationStore(data_dir=None)
    for i, book in enumerate(_mapped(data, "books", schema_map, "$", required=False, default=[]) or []):
        where = f"books[{i}]"
        if not isinstance(book, dict):
            raise SchemaMismatch(f"{where}: expected an object")
        store.add_book(_mapped(book, "id", schema_map, where), _mapped(book, "title", schema_map, where))

    summaries = _mapped(data, "summaries", schema_map, "$")
    if not isinstance(summaries, list):
        raise SchemaMismatch("$.summaries: expected a list")
    for i, raw in enumerate(summaries):
        where = f"summaries[{i}]"
        if not isinstance(raw, dict):
            raise SchemaMismatch(f"{where}: expected an object")
        summary_id = _mapped(raw, "id", schema_map, where)
        book_id = _mapped(raw, "book_id", schema_map, where)
        if book_id not in store.books:
            store.add_book(book_id, book_id)
        store.add_summary(
            summary_id,
            book_id,
            _mapped(raw, "model", schema_map, where),
            refused=bool(_mapped(raw, "refused", schema_map, where, required=False, default=False)),
        )
        claims_raw = _mapped(raw, "claims", schema_map, where, required=False, default=[]) or []
        claim_objs = []
        for j, claim_raw in enumerate(claims_raw):
            cwhere = f"{where}.claims[{j}]"
            if not isinstance(claim_raw, dict):
                raise SchemaMismatch(f"{cwhere}: expected an object")
            claim_objs.append(
                Claim(
                    id=_mapped(claim_raw, "claim_id", schema_map, cwhere, scope="claim"),
                    summary_id=summary_id,
                    index=int(
                        _mapped(claim_raw, "index", schema_map, cwhere, required=False, default=j, scope="claim")
                    ),
                    text=_mapped(claim_raw, "text", schema_map, cwhere, scope="claim"),
                )
            )
        store.add_claims(summary_id, claim_objs)
        for j, claim_raw in enumerate(claims_raw):
            cwhere = f"{where}.claims[{j}]"
            for k, ann_raw in enumerate(
                _mapped(claim_raw, "annotations", schema_map, cwhere, required=False, default=[]) or []
            ):
                awhere = f"{cwhere}.annotations[{k}]"
                if not isinstance(ann_raw, dict):
                    raise SchemaMismatch(f"{awhere}: expected an object")
                evidence = []
                for q in _mapped(ann_raw, "evidence", schema_map, awhere, required=False, default=[]) or []:
                    if isinstance(q, str):
                        evidence.append(Quote(text=q))
                    elif isinstance(q, dict):
                        evidence.append(Quote.from_json(q))
                    else:
                        raise SchemaMismatch(f"{awhere}.evidence: expected strings or objects")
                store.save_annotation(
                    ClaimAnnotation(
                        claim_id=claim_objs[j].id,
                        annotator_id=_mapped(ann_raw, "annotator_id", schema_map, awhere, scope="annotation"),
                        label=_normalize_label(
                            _mapped(ann_raw, "label", schema_map, awhere, scope="annotation"), schema_map, awhere
                        ),
                        reason=_mapped(ann_raw, "reason", schema_map, awhere, required=False, scope="annotation"),
                        evidence=evidence,
                    )
                )
        for k, com_raw in enumerate(
            _mapped(raw, "comments", schema_map, where, required=False, default=[]) or []
        ):
            cwhere = f"{where}.comments[{k}]"
            store.save_comment(
                SummaryComment(
                    summary_id=summary_id,
                    annotator_id=_mapped(com_raw, "annotator_id", schema_map, cwhere, scope="comment"),
                    text=_mapped(com_raw, "text", schema_map, cwhere, scope="comment"),
                )
            )

    for i, code_raw in enumerate(_mapped(data, "codes", schema_map, "$", required=False, default=[]) or []):
        where = f"codes[{i}]"
        try:
            store.add_code(
                TaxonomyCode(
                    subject=_mapped(code_raw, "subject", schema_map, where),
                    dimension=_mapped(code_raw, "dimension", schema_map, where),
                    value=_mapped(code_raw, "value", schema_map, where),
                )
            )
        except (ValueError, KeyError) as exc:
            raise SchemaMismatch(f"{where}: {exc}") from exc
    for i, pair_raw in enumerate(
        _mapped(data, "equivalence_pairs", schema_map, "$", required=False, default=[]) or []
    ):
        where = f"equivalence_pairs[{i}]"
        try:
            store.add_equivalence_pair(
                EquivalencePair(
                    claim_id_a=_mapped(pair_raw, "claim_id_a", schema_map, where),
                    claim_id_b=_mapped(pair_raw, "claim_id_b", schema_map, where),
                    marked_by=_mapped(pair_raw, "marked_by", schema_map, where),
                )
            )
        except (ValueError, KeyError) as exc:
            raise SchemaMismatch(f"{where}: {exc}") from exc
    return store
