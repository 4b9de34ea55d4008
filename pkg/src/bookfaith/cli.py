"""Command-line drive of the pipeline: ingest, summarize, extract-claims,
build-index, verify, score, report, sweep-bm25, import-fables, serve.

Every command validates inputs, supports --dry-run (zero network calls,
prints the plan and worst-case cost), writes artifacts with manifests, and
exits 0 on success, 2 on validation errors, 3 on backend failures, and 4
when the budget guard trips. Interrupted verify runs leave a checkpoint
and resume where they stopped.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from threading import Lock

from . import artifacts, claims as claims_mod, corpus, metrics, retrieval, verifier
from .config import ConfigError, RunConfig, load_config
from .gateway import Gateway, GatewayError, PromptRequest
from .store import AnnotationStore, AnnotationLabel, SchemaMismatch, import_fables
from .summarizer import (
    DEFAULT_CHUNK_TEMPLATE,
    DEFAULT_MERGE_TEMPLATE,
    MergeRefused,
    SummarizerConfig,
    SummaryRecord,
    hierarchical_summarize,
)


class BudgetExceeded(RuntimeError):
    pass


def _emit_error(exc: Exception) -> None:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")


def _print(obj) -> None:
    sys.stdout.write(json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2) + "\n")


def _open_store(config: RunConfig) -> AnnotationStore:
    return AnnotationStore(config.data_dir)


def _book_dir(config: RunConfig, book_id: str) -> Path:
    return config.data_dir / "books" / book_id


def _load_book(config: RunConfig, book_id: str) -> corpus.BookDocument:
    book_dir = _book_dir(config, book_id)
    meta_path = book_dir / "book.json"
    if not meta_path.exists():
        raise ConfigError(f"book {book_id!r} is not ingested (missing {meta_path})")
    meta = artifacts.read_json(meta_path)
    body = (book_dir / "body.txt").read_text(encoding="utf-8")
    return corpus.BookDocument(id=meta["id"], title=meta["title"], body=body, token_count=meta["token_count"])


def _load_claims(path: Path) -> list[claims_mod.Claim]:
    return [claims_mod.Claim.from_json(raw) for raw in artifacts.read_jsonl(path)]


def _gold_from_dataset(dataset: AnnotationStore) -> tuple[dict[str, str], dict[str, str]]:
    """Binary gold labels (Faithful/Unfaithful only) and each claim's
    source model. Partial/unverifiable claims are excluded upstream."""
    gold: dict[str, str] = {}
    source: dict[str, str] = {}
    for record in dataset.query():
        if record.annotation.label in (AnnotationLabel.FAITHFUL, AnnotationLabel.UNFAITHFUL):
            if record.claim.id not in gold:
                gold[record.claim.id] = record.annotation.label.value
                source[record.claim.id] = record.model
    return gold, source


# ----------------------------------------------------------------------
# commands


def cmd_ingest(args) -> int:
    config = load_config(args.config)
    tokenizer = config.tokenizer()
    if args.dry_run:
        _print({"dry_run": True, "command": "ingest", "path": args.path, "estimated_cost": 0.0})
        return 0
    doc = corpus.ingest_book(args.path, args.title, tokenizer, book_id=args.book_id)
    book_dir = _book_dir(config, doc.id)
    book_dir.mkdir(parents=True, exist_ok=True)
    (book_dir / "body.txt").write_text(doc.body, encoding="utf-8")
    artifacts.write_json(
        book_dir / "book.json",
        {"id": doc.id, "title": doc.title, "token_count": doc.token_count, "tokenizer_name": tokenizer.name},
    )
    artifacts.write_manifest(
        book_dir,
        artifacts.build_manifest(
            "ingest",
            config_json=config.source_raw,
            inputs={Path(args.path).name: artifacts.file_digest(args.path)},
            totals={"token_count": doc.token_count},
        ),
    )
    store = _open_store(config)
    store.add_book(doc.id, doc.title)
    _print({"book_id": doc.id, "token_count": doc.token_count})
    return 0


def cmd_chunk(args) -> int:
    config = load_config(args.config)
    tokenizer = config.tokenizer()
    doc = _load_book(config, args.book)
    chunks = corpus.chunk_text(doc, args.chunk_size, tokenizer)
    manifest = corpus.chunk_manifest(doc, chunks, args.chunk_size, tokenizer)
    out = _book_dir(config, doc.id) / f"chunks-{args.chunk_size}.json"
    artifacts.write_json(out, manifest)
    _print({"book_id": doc.id, "chunks": len(chunks), "manifest": str(out)})
    return 0


def cmd_summarize(args) -> int:
    config = load_config(args.config)
    tokenizer = config.tokenizer()
    spec = config.backends.get(args.backend)
    if spec is None:
        raise ConfigError(f"no backend named {args.backend!r}")
    doc = _load_book(config, args.book)
    chunk_size = args.chunk_size or spec.chunk_size
    backend = spec.build()
    gateway = Gateway(token_counter=tokenizer.count)
    chunk_template = config.template_text("chunk", DEFAULT_CHUNK_TEMPLATE)
    merge_template = config.template_text("merge", DEFAULT_MERGE_TEMPLATE)
    summarizer_config = SummarizerConfig(
        chunk_size=chunk_size,
        backend=backend,
        chunk_template=chunk_template,
        merge_template=merge_template,
        context_budget=config.summarizer.context_budget,
        word_budget=config.summarizer.word_budget,
        max_output_tokens=config.summarizer.max_output_tokens,
        parallelism=config.parallelism,
        tokenizer=tokenizer,
    )
    summary_id = f"{doc.id}--{args.backend}"
    out_dir = config.data_dir / "summaries" / summary_id

    if args.dry_run:
        chunks = corpus.chunk_text(doc, chunk_size, tokenizer)
        plan = [
            (
                PromptRequest(
                    user=chunk_template.format(chunk=c.text, word_budget=config.summarizer.word_budget),
                    max_output_tokens=config.summarizer.max_output_tokens,
                ),
                backend.config,
            )
            for c in chunks
        ]
        # Merge prompts depend on completions; budget them at worst case.
        merge_overhead = (
            2 * config.summarizer.max_output_tokens
            + config.summarizer.context_budget
            + tokenizer.count(merge_template)
        )
        merge_request = PromptRequest(
            user="x " * merge_overhead, max_output_tokens=config.summarizer.max_output_tokens
        )
        plan.extend((merge_request, backend.config) for _ in range(max(0, len(chunks) - 1)))
        estimate = gateway.estimate_run_cost(plan)
        _print(
            {
                "dry_run": True,
                "command": "summarize",
                "summary_id": summary_id,
                "chunks": len(chunks),
                "merge_calls": max(0, len(chunks) - 1),
                "estimated_cost": estimate,
            }
        )
        return 0

    store = _open_store(config)
    store.add_book(doc.id, doc.title)
    try:
        record = hierarchical_summarize(doc, summarizer_config, gateway)
    except MergeRefused as refused:
        artifacts.write_json(
            out_dir / "refusal.json",
            {
                "book_id": doc.id,
                "backend": args.backend,
                "node_id": refused.node_id,
                "raw_text": refused.raw_text,
                "partial_tree": refused.partial_tree.to_json() if refused.partial_tree else None,
            },
        )
        artifacts.write_manifest(
            out_dir,
            artifacts.build_manifest(
                "summarize",
                config_json=config.source_raw,
                inputs={"body.txt": artifacts.file_digest(_book_dir(config, doc.id) / "body.txt")},
                templates={"chunk": chunk_template, "merge": merge_template},
                parameters={"chunk_size": chunk_size, "backend": args.backend},
                totals={"refused": True},
            ),
        )
        store.add_summary(summary_id, doc.id, args.backend, refused=True)
        _print({"summary_id": summary_id, "refused": True, "node_id": refused.node_id})
        return 0
    artifacts.write_json(out_dir / "summary.json", record.to_json())
    artifacts.write_manifest(
        out_dir,
        artifacts.build_manifest(
            "summarize",
            config_json=config.source_raw,
            inputs={"body.txt": artifacts.file_digest(_book_dir(config, doc.id) / "body.txt")},
            templates={"chunk": chunk_template, "merge": merge_template},
            parameters={"chunk_size": chunk_size, "backend": args.backend},
            totals={
                "chunks": len(record.tree.leaves),
                "merge_calls": record.tree.merge_count,
                "cost": record.tree.total_cost(),
                "final_token_count": record.final_token_count,
            },
        ),
    )
    store.add_summary(summary_id, doc.id, args.backend)
    _print({"summary_id": summary_id, "final_token_count": record.final_token_count})
    return 0


def cmd_extract_claims(args) -> int:
    config = load_config(args.config)
    summary_dir = config.data_dir / "summaries" / args.summary
    summary_path = summary_dir / "summary.json"
    if not summary_path.exists():
        raise ConfigError(f"summary {args.summary!r} not found at {summary_path}")
    record = SummaryRecord.from_json(artifacts.read_json(summary_path))
    backend = config.backend(args.backend)
    gateway = Gateway(token_counter=config.tokenizer().count)
    template = config.template_text("extraction", claims_mod.DEFAULT_EXTRACTION_TEMPLATE)
    request = claims_mod.build_extraction_prompt(record.final_text, template=template)
    if args.dry_run:
        _print(
            {
                "dry_run": True,
                "command": "extract-claims",
                "summary_id": args.summary,
                "estimated_cost": gateway.estimate_run_cost([(request, backend.config)]),
            }
        )
        return 0
    completion = gateway.complete(request, backend)
    texts = claims_mod.parse_claims(completion.text)
    claim_objs = [
        claims_mod.Claim(id=f"{args.summary}--c{i:03d}", summary_id=args.summary, index=i, text=t)
        for i, t in enumerate(texts)
    ]
    lints = claims_mod.lint_summary_claims(claim_objs)
    out = config.data_dir / "claims" / f"{args.summary}.jsonl"
    artifacts.write_jsonl(out, [c.to_json() for c in claim_objs])
    artifacts.write_manifest(
        out.parent / args.summary,
        artifacts.build_manifest(
            "extract-claims",
            config_json=config.source_raw,
            inputs={"summary.json": artifacts.file_digest(summary_path)},
            templates={"extraction": template},
            parameters={"backend": args.backend},
            totals={
                "claims": len(claim_objs),
                "cost": completion.cost,
                "lint_warnings": sum(len(l.warnings) for l in lints),
            },
        ),
    )
    store = _open_store(config)
    store.add_book(record.book_id, record.book_id)
    store.add_summary(args.summary, record.book_id, record.model_name)
    store.add_claims(args.summary, claim_objs)
    count = len(claim_objs)
    low, high = claims_mod.EXPECTED_CLAIMS_RANGE
    _print(
        {
            "summary_id": args.summary,
            "claims": count,
            "outside_expected_range": not (low <= count <= high),
            "claims_file": str(out),
        }
    )
    return 0


def cmd_build_index(args) -> int:
    config = load_config(args.config)
    tokenizer = config.tokenizer()
    doc = _load_book(config, args.book)
    limit = args.passage_tokens or config.retrieval.passage_token_limit
    params = retrieval.Bm25Params(k1=config.retrieval.k1, b=config.retrieval.b)
    index = retrieval.build_index(doc, tokenizer, passage_token_limit=limit, params=params)
    out = config.data_dir / "indexes" / f"{doc.id}--{limit}.json"
    artifacts.write_json(out, index.to_json())
    artifacts.write_manifest(
        out.parent / f"{doc.id}--{limit}",
        artifacts.build_manifest(
            "build-index",
            config_json=config.source_raw,
            inputs={"body.txt": artifacts.file_digest(_book_dir(config, doc.id) / "body.txt")},
            parameters={"passage_token_limit": limit, "k1": params.k1, "b": params.b},
            totals={"passages": index.passage_count, "average_length": index.average_length},
        ),
    )
    _print({"book_id": doc.id, "passages": index.passage_count, "index_file": str(out)})
    return 0


_EVIDENCE_FLAGS = {
    "none": verifier.NO_CONTEXT,
    "human": verifier.HUMAN_EVIDENCE,
    "bm25": verifier.BM25,
    "book": verifier.ENTIRE_BOOK,
}


def _load_or_build_index(config: RunConfig, doc: corpus.BookDocument, limit: int) -> retrieval.PassageIndex:
    path = config.data_dir / "indexes" / f"{doc.id}--{limit}.json"
    if path.exists():
        return retrieval.PassageIndex.from_json(artifacts.read_json(path))
    params = retrieval.Bm25Params(k1=config.retrieval.k1, b=config.retrieval.b)
    return retrieval.build_index(doc, config.tokenizer(), passage_token_limit=limit, params=params)


def cmd_verify(args) -> int:
    config = load_config(args.config)
    tokenizer = config.tokenizer()
    variant = _EVIDENCE_FLAGS.get(args.evidence)
    if variant is None:
        raise ConfigError(f"--evidence must be one of {sorted(_EVIDENCE_FLAGS)}")
    claims_path = Path(args.claims) if args.claims else config.data_dir / "claims" / f"{args.summary}.jsonl"
    if not claims_path.exists():
        raise ConfigError(f"claims file not found: {claims_path}")
    claim_objs = _load_claims(claims_path)
    doc = _load_book(config, args.book) if args.book else None
    backend = config.backend(args.backend)
    gateway = Gateway(token_counter=tokenizer.count)
    template = config.template_text("evaluation", verifier.DEFAULT_EVALUATION_TEMPLATE)
    evidence_config = verifier.EvidenceConfig(
        variant=variant,
        k=args.k or config.retrieval.k,
        passage_token_limit=args.passage_tokens or config.retrieval.passage_token_limit,
        margin_tokens=args.margin_tokens,
    )
    index = None
    annotations = None
    if variant == verifier.BM25:
        if doc is None:
            raise ConfigError("--book is required for BM25 evidence")
        index = _load_or_build_index(config, doc, evidence_config.passage_token_limit)
    if variant == verifier.ENTIRE_BOOK and doc is None:
        raise ConfigError("--book is required for entire-book evidence")
    if variant == verifier.HUMAN_EVIDENCE:
        annotations = import_fables(args.gold) if args.gold else _open_store(config)

    run_name = args.run_name or f"verify-{args.evidence}-{args.backend}"
    run_dir = config.data_dir / "runs" / run_name

    def _build_prompt(claim: claims_mod.Claim) -> PromptRequest:
        evidence = verifier.build_evidence(
            claim,
            evidence_config,
            doc=doc,
            index=index,
            annotations=annotations,
            backend=backend,
            tokenizer=tokenizer,
            template=template,
        )
        return verifier.build_verification_prompt(claim, evidence, template=template)

    if args.dry_run or args.max_cost is not None:
        plan = [(_build_prompt(c), backend.config) for c in claim_objs]
        estimate = gateway.estimate_run_cost(plan)
        if args.dry_run:
            _print(
                {
                    "dry_run": True,
                    "command": "verify",
                    "run_name": run_name,
                    "claims": len(claim_objs),
                    "evidence": evidence_config.to_json(),
                    "estimated_cost": estimate,
                }
            )
            return 0
        if estimate > args.max_cost:
            raise BudgetExceeded(f"estimated cost {estimate:.4f} exceeds --max-cost {args.max_cost:.4f}")

    checkpoint_path = run_dir / "checkpoint.jsonl"
    done: dict[str, dict] = {}
    if checkpoint_path.exists():
        done = {raw["claim_id"]: raw for raw in artifacts.read_jsonl(checkpoint_path)}
    run_dir.mkdir(parents=True, exist_ok=True)
    checkpoint_lock = Lock()

    def _verify(claim: claims_mod.Claim) -> dict:
        record = verifier.verify_claim(
            claim,
            evidence_config,
            backend,
            gateway,
            doc=doc,
            index=index,
            annotations=annotations,
            tokenizer=tokenizer,
            template=template,
        )
        raw = record.to_json()
        with checkpoint_lock:
            with open(checkpoint_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(raw, sort_keys=True, ensure_ascii=False) + "\n")
        return raw

    pending = [c for c in claim_objs if c.id not in done]
    workers = max(1, min(config.parallelism, backend.config.max_parallel))
    if workers == 1:
        for claim in pending:
            done[claim.id] = _verify(claim)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_verify, claim): claim for claim in pending}
            for future in as_completed(futures):
                raw = future.result()
                done[raw["claim_id"]] = raw

    ordered = [done[c.id] for c in claim_objs]
    artifacts.write_jsonl(run_dir / "records.jsonl", ordered)
    scored = sum(1 for r in ordered if r["verdict"])
    artifacts.write_manifest(
        run_dir,
        artifacts.build_manifest(
            "verify",
            config_json=config.source_raw,
            inputs={claims_path.name: artifacts.file_digest(claims_path)},
            templates={"evaluation": template},
            parameters={"evidence": evidence_config.to_json(), "backend": args.backend},
            totals={
                "claims": len(ordered),
                "scored": scored,
                "ambiguous": len(ordered) - scored,
                "cost": sum(r["cost"] for r in ordered),
            },
        ),
    )
    checkpoint_path.unlink(missing_ok=True)
    _print({"run_name": run_name, "records": len(ordered), "ambiguous": len(ordered) - scored})
    return 0


def _score_table(gold: dict[str, str], source: dict[str, str], predictions: dict[str, str]) -> dict:
    models = sorted(set(source.values()))
    rows = {}
    for model in models + ["Overall"]:
        subset = {cid: g for cid, g in gold.items() if model == "Overall" or source.get(cid) == model}
        scores = {}
        for label in (AnnotationLabel.FAITHFUL.value, AnnotationLabel.UNFAITHFUL.value):
            scores[label] = metrics.per_label_prf(predictions, subset, label).to_json()
        rows[model] = scores
    return rows


def cmd_score(args) -> int:
    dataset = import_fables(args.gold)
    gold, source = _gold_from_dataset(dataset)
    pred_dir = Path(args.pred)
    records_path = pred_dir / "records.jsonl"
    if not records_path.exists():
        raise ConfigError(f"no records.jsonl under {pred_dir}")
    predictions = {
        raw["claim_id"]: raw["verdict"]
        for raw in artifacts.read_jsonl(records_path)
        if raw.get("verdict")
    }
    table = _score_table(gold, source, predictions)
    out_dir = Path(args.out) if args.out else pred_dir
    artifacts.write_json(out_dir / "score.json", table)
    confusion = metrics.confusion_matrix(predictions, gold, source)
    artifacts.write_json(
        out_dir / "confusion.json",
        {
            model: {f"{gold_label}->{predicted}": count for (gold_label, predicted), count in sorted(cells.items())}
            for model, cells in sorted(confusion.items())
        },
    )
    headers = ["model", "faithful_f1", "unfaithful_f1", "faithful_support", "unfaithful_support"]
    rows = [
        [
            model,
            f"{scores['Faithful']['f1']:.3f}",
            f"{scores['Unfaithful']['f1']:.3f}",
            scores["Faithful"]["support"],
            scores["Unfaithful"]["support"],
        ]
        for model, scores in table.items()
    ]
    (out_dir / "score.csv").write_text(metrics.table_to_csv(headers, rows), encoding="utf-8")
    _print({"scored_claims": len([c for c in predictions if c in gold]), "table": str(out_dir / "score.json")})
    return 0


def cmd_report(args) -> int:
    dataset = import_fables(args.dataset)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = dataset.query()
    distributions = metrics.label_distribution(records)
    artifacts.write_json(out_dir / "label_distribution.json", [d.to_json() for d in distributions])
    headers = ["model", "total"] + metrics.LABEL_ORDER
    rows = [
        [d.group, d.total] + [f"{d.percentages.get(label, 0.0):.2f}" for label in metrics.LABEL_ORDER]
        for d in distributions
    ]
    (out_dir / "label_distribution.csv").write_text(metrics.table_to_csv(headers, rows), encoding="utf-8")

    def write_flag_table(name: str, table: dict[str, dict[str, float]]) -> None:
        artifacts.write_json(out_dir / f"{name}.json", table)
        if table:
            columns = sorted(next(iter(table.values())))
            csv_rows = [[model] + [f"{table[model][c]:.2f}" for c in columns] for model in sorted(table)]
            (out_dir / f"{name}.csv").write_text(
                metrics.table_to_csv(["model"] + columns, csv_rows), encoding="utf-8"
            )

    summaries = list(dataset.summaries.values())
    write_flag_table("comment_issues", metrics.comment_issue_table(dataset.codes, summaries))
    write_flag_table("omissions", metrics.omission_table(dataset.codes, summaries))
    problem = metrics.problem_rate_per_summary(records)
    artifacts.write_json(out_dir / "problem_rates.json", problem)
    (out_dir / "problem_rates.csv").write_text(
        metrics.table_to_csv(
            ["book_id", "model", "summary_id", "claims", "problem_rate"],
            [[r["book_id"], r["model"], r["summary_id"], r["claims"], f"{r['problem_rate']:.2f}"] for r in problem],
        ),
        encoding="utf-8",
    )
    agreement = {"pairwise": metrics.pairwise_agreement(records)}
    if dataset.equivalence_pairs:
        agreement["self_consistency"] = metrics.self_consistency(
            dataset.equivalence_pairs,
            lambda claim_id, annotator: (
                ann.label.value if (ann := dataset.get_annotation(claim_id, annotator)) else None
            ),
        )
    artifacts.write_json(out_dir / "agreement.json", agreement)

    report = {"counts": dataset.counts(), "integrity_problems": dataset.check_referential_integrity()}
    if args.reference:
        reference = artifacts.read_json(args.reference)
        report["discrepancies_vs_published"] = metrics.compare_with_reference(distributions, reference)
    artifacts.write_json(out_dir / "report.json", report)
    _print({"out": str(out_dir), **report["counts"]})
    return 0


def cmd_sweep_bm25(args) -> int:
    config = load_config(args.config)
    tokenizer = config.tokenizer()
    doc = _load_book(config, args.book)
    claim_objs = _load_claims(Path(args.claims))
    dataset = import_fables(args.gold)
    gold, _ = _gold_from_dataset(dataset)
    gold = {cid: label for cid, label in gold.items() if any(c.id == cid for c in claim_objs)}
    backend = config.backend(args.backend)
    gateway = Gateway(token_counter=tokenizer.count)
    template = config.template_text("evaluation", verifier.DEFAULT_EVALUATION_TEMPLATE)
    limits = [int(x) for x in args.limits.split(",") if x.strip()]

    def verify_fn(claim, evidence_text):
        request = verifier.build_verification_prompt(claim, evidence_text, template=template)
        completion = gateway.complete(request, backend)
        try:
            return verifier.parse_verdict(completion.text).value
        except verifier.AmbiguousVerdict:
            return None

    table = retrieval.sweep_passage_limit(
        doc,
        limits,
        [c for c in claim_objs if c.id in gold],
        gold,
        verify_fn,
        tokenizer,
        k=args.k or config.retrieval.k,
        params=retrieval.Bm25Params(k1=config.retrieval.k1, b=config.retrieval.b),
    )
    run_dir = config.data_dir / "runs" / (args.run_name or "sweep-bm25")
    serializable = {
        str(limit): {label: score.to_json() for label, score in by_label.items()}
        for limit, by_label in table.items()
    }
    artifacts.write_json(run_dir / "sweep.json", serializable)
    headers = ["passage_token_limit", "label", "precision", "recall", "f1", "support"]
    rows = []
    for limit in limits:
        for label, score in sorted(table[limit].items()):
            rows.append(
                [limit, label, f"{score.precision:.3f}", f"{score.recall:.3f}", f"{score.f1:.3f}", score.support]
            )
    (run_dir / "sweep.csv").write_text(metrics.table_to_csv(headers, rows), encoding="utf-8")
    artifacts.write_manifest(
        run_dir,
        artifacts.build_manifest(
            "sweep-bm25",
            config_json=config.source_raw,
            inputs={Path(args.claims).name: artifacts.file_digest(args.claims)},
            templates={"evaluation": template},
            parameters={"limits": limits, "backend": args.backend},
            totals={"claims": len(gold)},
        ),
    )
    _print({"limits": limits, "sweep": str(run_dir / "sweep.json")})
    return 0


def cmd_import_fables(args) -> int:
    schema_map = artifacts.read_json(args.schema_map) if args.schema_map else None
    dataset = import_fables(args.path, schema_map=schema_map)
    problems = dataset.check_referential_integrity()
    counts = dataset.counts()
    counts["unfaithful_annotations"] = len(dataset.query(label=AnnotationLabel.UNFAITHFUL))
    if args.out:
        dataset.export_dataset_file(args.out)
    _print({**counts, "integrity_problems": problems})
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    if args.dataset:
        store = import_fables(args.dataset)
        books_dir = None
    else:
        config = load_config(args.config)
        store = _open_store(config)
        books_dir = config.data_dir / "books"
    app = create_app(store, books_dir=books_dir, dataset_only=args.dataset_only, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bookfaith", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a plain-text book into the data directory")
    p.add_argument("--config", required=True)
    p.add_argument("--path", required=True)
    p.add_argument("--title", required=True)
    p.add_argument("--book-id")
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("chunk", help="write a chunk manifest for an ingested book")
    p.add_argument("--config", required=True)
    p.add_argument("--book", required=True)
    p.add_argument("--chunk-size", type=int, required=True)
    p.set_defaults(func=cmd_chunk)

    p = sub.add_parser("summarize", help="hierarchically summarize an ingested book")
    p.add_argument("--config", required=True)
    p.add_argument("--book", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--chunk-size", type=int)
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("extract-claims", help="decompose a summary into atomic claims")
    p.add_argument("--config", required=True)
    p.add_argument("--summary", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=cmd_extract_claims)

    p = sub.add_parser("build-index", help="build the BM25 passage index for a book")
    p.add_argument("--config", required=True)
    p.add_argument("--book", required=True)
    p.add_argument("--passage-tokens", type=int)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("verify", help="verify claims under an evidence strategy")
    p.add_argument("--config", required=True)
    p.add_argument("--book")
    p.add_argument("--summary")
    p.add_argument("--claims")
    p.add_argument("--evidence", required=True, choices=sorted(_EVIDENCE_FLAGS))
    p.add_argument("--backend", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--passage-tokens", type=int)
    p.add_argument("--margin-tokens", type=int, default=verifier.DEFAULT_MARGIN_TOKENS)
    p.add_argument("--gold", help="dataset file supplying human evidence quotes")
    p.add_argument("--run-name")
    p.add_argument("--max-cost", type=float)
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("score", help="per-label F1 of a verify run against gold labels")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="tables over an annotation dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--reference", help="published percentages to diff against")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep-bm25", help="per-label F1 across passage size limits")
    p.add_argument("--config", required=True)
    p.add_argument("--book", required=True)
    p.add_argument("--claims", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--limits", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--run-name")
    p.set_defaults(func=cmd_sweep_bm25)

    p = sub.add_parser("import-fables", help="load and validate a released annotation dataset")
    p.add_argument("--path", required=True)
    p.add_argument("--schema-map")
    p.add_argument("--out", help="write the normalized dataset here")
    p.set_defaults(func=cmd_import_fables)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--config")
    p.add_argument("--dataset", help="serve a released dataset instead of the data directory")
    p.add_argument("--dataset-only", action="store_true")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--ui", help="directory of built UI assets to mount at /ui")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        _emit_error(exc)
        return 4
    except GatewayError as exc:
        _emit_error(exc)
        return 3
    except MergeRefused as exc:
        _emit_error(exc)
        return 3
    except (
        ConfigError,
        SchemaMismatch,
        FileNotFoundError,
        corpus.InvalidEncoding,
        corpus.EmptyDocument,
        corpus.InvalidChunkSize,
        claims_mod.NoClaimsFound,
        verifier.MissingIndex,
        verifier.MissingHumanEvidence,
        verifier.BookTooLarge,
        ValueError,
        KeyError,
    ) as exc:
        _emit_error(exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
