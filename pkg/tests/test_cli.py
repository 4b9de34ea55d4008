from __future__ import annotations

import json
from pathlib import Path

import pytest

from bookfaith.cli import main

from pipeline_fixtures import gold_dataset_for, write_workspace


@pytest.fixture(autouse=True)
def fixed_epoch(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")


def run(argv, capsys) -> tuple[int, dict]:
    code = main(argv)
    captured = capsys.readouterr()
    out = json.loads(captured.out) if captured.out.strip() else {}
    return code, out


def ingest(root: Path, capsys) -> str:
    config = str(root / "config.json")
    code, out = run(
        ["ingest", "--config", config, "--path", str(root / "book.txt"), "--title", "The Quiet Gull"],
        capsys,
    )
    assert code == 0
    return out["book_id"]


def run_pipeline(root: Path, capsys, evidence: str = "bm25") -> dict:
    """ingest -> summarize -> extract-claims -> verify -> score."""
    config = str(root / "config.json")
    book_id = ingest(root, capsys)
    code, out = run(["summarize", "--config", config, "--book", book_id, "--backend", "mock"], capsys)
    assert code == 0
    summary_id = out["summary_id"]
    code, out = run(
        ["extract-claims", "--config", config, "--summary", summary_id, "--backend", "mock"], capsys
    )
    assert code == 0
    claims_file = root / "data" / "claims" / f"{summary_id}.jsonl"
    gold_path = root / "gold.json"
    gold_path.write_text(
        json.dumps(gold_dataset_for(claims_file, book_id, summary_id), sort_keys=True), encoding="utf-8"
    )
    code, _ = run(
        [
            "verify",
            "--config",
            config,
            "--book",
            book_id,
            "--summary",
            summary_id,
            "--evidence",
            evidence,
            "--backend",
            "mock",
            "--run-name",
            "run1",
        ],
        capsys,
    )
    assert code == 0
    code, _ = run(
        ["score", "--gold", str(gold_path), "--pred", str(root / "data" / "runs" / "run1")], capsys
    )
    assert code == 0
    return {"book_id": book_id, "summary_id": summary_id}


def tree_bytes(base: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(base)): p.read_bytes() for p in sorted(base.rglob("*")) if p.is_file()
    }


class TestPipeline:
    def test_full_pipeline_artifacts(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(write_workspace(tmp_path / "w").parent)
        ids = run_pipeline(tmp_path / "w", capsys)
        data = tmp_path / "w" / "data"
        assert (data / "books" / ids["book_id"] / "body.txt").exists()
        assert (data / "summaries" / ids["summary_id"] / "summary.json").exists()
        assert (data / "claims" / f"{ids['summary_id']}.jsonl").exists()
        run_dir = data / "runs" / "run1"
        assert (run_dir / "records.jsonl").exists()
        assert (run_dir / "manifest.json").exists()
        assert not (run_dir / "checkpoint.jsonl").exists()
        score = json.loads((run_dir / "score.json").read_text())
        # The salt claim is predicted False and gold Unfaithful.
        assert score["Overall"]["Unfaithful"]["f1"] == 1.0
        assert score["Overall"]["Faithful"]["f1"] == 1.0
        confusion = json.loads((run_dir / "confusion.json").read_text())
        assert confusion["mock"]["Faithful->Faithful"] == 4
        assert confusion["mock"]["Unfaithful->Unfaithful"] == 1

    def test_manifest_fields(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(write_workspace(tmp_path / "w").parent)
        ids = run_pipeline(tmp_path / "w", capsys)
        manifest = json.loads(
            (tmp_path / "w" / "data" / "runs" / "run1" / "manifest.json").read_text()
        )
        assert manifest["config_hash"]
        assert manifest["template_hashes"]["evaluation"]
        assert manifest["totals"]["claims"] == 5
        assert manifest["inputs"]

    def test_byte_identical_across_runs(self, tmp_path, capsys, monkeypatch):
        trees = []
        for name in ("a", "b"):
            root = tmp_path / name
            write_workspace(root)
            monkeypatch.chdir(root)
            run_pipeline(root, capsys)
            trees.append(tree_bytes(root / "data"))
        assert trees[0].keys() == trees[1].keys()
        for key in trees[0]:
            assert trees[0][key] == trees[1][key], f"artifact differs: {key}"

    def test_byte_identical_parallelism(self, tmp_path, capsys, monkeypatch):
        trees = []
        for name, parallelism in (("p1", 1), ("p8", 8)):
            root = tmp_path / name
            write_workspace(root)
            monkeypatch.setenv("BOOKFAITH_PARALLELISM", str(parallelism))
            monkeypatch.chdir(root)
            run_pipeline(root, capsys)
            tree = tree_bytes(root / "data")
            trees.append(tree)
        assert trees[0] == trees[1]

    def test_verify_resume_from_checkpoint(self, tmp_path, capsys, monkeypatch):
        root = write_workspace(tmp_path / "w").parent
        monkeypatch.chdir(root)
        config = str(root / "config.json")
        book_id = ingest(root, capsys)
        run(["summarize", "--config", config, "--book", book_id, "--backend", "mock"], capsys)
        summary_id = f"{book_id}--mock"
        run(["extract-claims", "--config", config, "--summary", summary_id, "--backend", "mock"], capsys)

        # Simulate an interrupted run: pre-seed a checkpoint with one claim.
        from bookfaith import verifier as vf

        run_dir = root / "data" / "runs" / "resumed"
        run_dir.mkdir(parents=True)
        claims = [json.loads(l) for l in (root / "data" / "claims" / f"{summary_id}.jsonl").read_text().splitlines()]
        fake = vf.VerificationRecord(
            claim_id=claims[0]["claim_id"],
            config=vf.EvidenceConfig(variant=vf.NO_CONTEXT),
            evidence_text="",
            prompt="p",
            raw_answer="True",
            verdict=vf.Verdict.FAITHFUL,
            backend="mock",
            cost=0.0,
        )
        (run_dir / "checkpoint.jsonl").write_text(json.dumps(fake.to_json(), sort_keys=True) + "\n")
        code, out = run(
            [
                "verify",
                "--config",
                config,
                "--book",
                book_id,
                "--summary",
                summary_id,
                "--evidence",
                "none",
                "--backend",
                "mock",
                "--run-name",
                "resumed",
            ],
            capsys,
        )
        assert code == 0
        records = [json.loads(l) for l in (run_dir / "records.jsonl").read_text().splitlines()]
        assert len(records) == 5
        # The checkpointed record was reused verbatim, not recomputed.
        assert records[0]["prompt"] == "p"


class TestDryRunAndGuards:
    def test_dry_run_no_artifacts(self, tmp_path, capsys, monkeypatch):
        root = write_workspace(tmp_path / "w").parent
        monkeypatch.chdir(root)
        config = str(root / "config.json")
        book_id = ingest(root, capsys)
        code, out = run(
            ["summarize", "--config", config, "--book", book_id, "--backend", "mock", "--dry-run"],
            capsys,
        )
        assert code == 0
        assert out["dry_run"] is True
        assert out["estimated_cost"] == 0.0
        assert not (root / "data" / "summaries").exists()

    def test_verify_dry_run_counts_calls(self, tmp_path, capsys, monkeypatch):
        root = write_workspace(tmp_path / "w").parent
        monkeypatch.chdir(root)
        config = str(root / "config.json")
        book_id = ingest(root, capsys)
        run(["summarize", "--config", config, "--book", book_id, "--backend", "mock"], capsys)
        summary_id = f"{book_id}--mock"
        run(["extract-claims", "--config", config, "--summary", summary_id, "--backend", "mock"], capsys)
        code, out = run(
            [
                "verify",
                "--config",
                config,
                "--book",
                book_id,
                "--summary",
                summary_id,
                "--evidence",
                "bm25",
                "--backend",
                "mock",
                "--dry-run",
            ],
            capsys,
        )
        assert code == 0
        assert out["claims"] == 5
        assert out["evidence"]["k"] == 5
        assert out["evidence"]["passage_token_limit"] == 256

    def test_budget_guard_exit_4(self, tmp_path, capsys, monkeypatch):
        root = write_workspace(tmp_path / "w").parent
        # Give the mock a price so the estimate is positive.
        config_raw = json.loads((root / "config.json").read_text())
        config_raw["backends"]["mock"]["input_price"] = 1000.0
        config_raw["backends"]["mock"]["output_price"] = 1000.0
        (root / "config.json").write_text(json.dumps(config_raw, sort_keys=True))
        monkeypatch.chdir(root)
        config = str(root / "config.json")
        book_id = ingest(root, capsys)
        run(["summarize", "--config", config, "--book", book_id, "--backend", "mock"], capsys)
        summary_id = f"{book_id}--mock"
        run(["extract-claims", "--config", config, "--summary", summary_id, "--backend", "mock"], capsys)
        code = main(
            [
                "verify",
                "--config",
                config,
                "--book",
                book_id,
                "--summary",
                summary_id,
                "--evidence",
                "none",
                "--backend",
                "mock",
                "--max-cost",
                "0.0000001",
            ]
        )
        capsys.readouterr()
        assert code == 4

    def test_validation_error_exit_2_with_json_stderr(self, tmp_path, capsys, monkeypatch):
        root = write_workspace(tmp_path / "w").parent
        monkeypatch.chdir(root)
        code = main(["summarize", "--config", str(root / "config.json"), "--book", "ghost", "--backend", "mock"])
        captured = capsys.readouterr()
        assert code == 2
        error = json.loads(captured.err)
        assert error["error"]
        assert "ghost" in error["message"]

    def test_unknown_backend_exit_2(self, tmp_path, capsys, monkeypatch):
        root = write_workspace(tmp_path / "w").parent
        monkeypatch.chdir(root)
        book_id = ingest(root, capsys)
        code = main(
            ["summarize", "--config", str(root / "config.json"), "--book", book_id, "--backend", "nope"]
        )
        capsys.readouterr()
        assert code == 2


class TestReportAndImport:
    def _gold(self, root, capsys) -> Path:
        config = str(root / "config.json")
        book_id = ingest(root, capsys)
        run(["summarize", "--config", config, "--book", book_id, "--backend", "mock"], capsys)
        summary_id = f"{book_id}--mock"
        run(["extract-claims", "--config", config, "--summary", summary_id, "--backend", "mock"], capsys)
        claims_file = root / "data" / "claims" / f"{summary_id}.jsonl"
        gold_path = root / "gold.json"
        gold_path.write_text(json.dumps(gold_dataset_for(claims_file, book_id, summary_id)), encoding="utf-8")
        return gold_path

    def test_import_fables_counts(self, tmp_path, capsys, monkeypatch):
        root = write_workspace(tmp_path / "w").parent
        monkeypatch.chdir(root)
        gold = self._gold(root, capsys)
        code, out = run(["import-fables", "--path", str(gold)], capsys)
        assert code == 0
        assert out["claims"] == 5
        assert out["unfaithful_annotations"] == 1
        assert out["integrity_problems"] == []

    def test_report_tables(self, tmp_path, capsys, monkeypatch):
        root = write_workspace(tmp_path / "w").parent
        monkeypatch.chdir(root)
        gold = self._gold(root, capsys)
        out_dir = root / "report"
        code, out = run(["report", "--dataset", str(gold), "--out", str(out_dir)], capsys)
        assert code == 0
        dist = json.loads((out_dir / "label_distribution.json").read_text())
        assert dist[0]["percentages"]["Faithful"] == 80.0
        assert (out_dir / "label_distribution.csv").exists()
        assert (out_dir / "problem_rates.json").exists()
        agreement = json.loads((out_dir / "agreement.json").read_text())
        assert agreement["pairwise"] == []  # single annotator in the fixture
        for table in ("comment_issues", "omissions", "problem_rates"):
            assert (out_dir / f"{table}.json").exists()
            assert (out_dir / f"{table}.csv").exists()
        rates_csv = (out_dir / "problem_rates.csv").read_text().splitlines()
        assert rates_csv[0] == "book_id,model,summary_id,claims,problem_rate"
        assert rates_csv[1].endswith("20.00")  # 1 of 5 claims problematic

    def test_sweep_bm25(self, tmp_path, capsys, monkeypatch):
        root = write_workspace(tmp_path / "w").parent
        monkeypatch.chdir(root)
        config = str(root / "config.json")
        gold = self._gold(root, capsys)
        book_id = json.loads(gold.read_text())["books"][0]["id"]
        summary_id = f"{book_id}--mock"
        code, out = run(
            [
                "sweep-bm25",
                "--config",
                config,
                "--book",
                book_id,
                "--claims",
                str(root / "data" / "claims" / f"{summary_id}.jsonl"),
                "--gold",
                str(gold),
                "--limits",
                "16,64",
                "--backend",
                "mock",
            ],
            capsys,
        )
        assert code == 0
        sweep = json.loads((root / "data" / "runs" / "sweep-bm25" / "sweep.json").read_text())
        assert set(sweep) == {"16", "64"}
        assert "Faithful" in sweep["16"]
