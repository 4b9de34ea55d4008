"""Run configuration: backends, tokenizer, templates, retrieval params.

Loaded from a JSON file with environment overrides; referenced files must
exist at load time and per-backend chunk sizes must fit their windows.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .gateway import Backend, BackendConfig, HttpBackend, MockBackend
from .tokenizers import Tokenizer, TokenizerSpec


class ConfigError(ValueError):
    pass


@dataclass
class BackendSpec:
    name: str
    kind: str = "mock"  # "mock" | "http"
    context_window: int = 1_000_000
    input_price: float = 0.0
    output_price: float = 0.0
    max_parallel: int = 4
    timeout: float = 120.0
    endpoint: str | None = None
    model: str | None = None
    chunk_size: int = 2048  # summarization chunk size for this backend
    fixtures_file: str | None = None

    def to_config(self) -> BackendConfig:
        return BackendConfig(
            name=self.name,
            context_window=self.context_window,
            input_price=self.input_price,
            output_price=self.output_price,
            max_parallel=self.max_parallel,
            timeout=self.timeout,
            endpoint=self.endpoint,
            model=self.model,
        )

    def build(self) -> Backend:
        if self.kind == "mock":
            fixtures = {}
            if self.fixtures_file:
                fixtures = json.loads(Path(self.fixtures_file).read_text(encoding="utf-8"))
            return MockBackend(self.to_config(), fixtures)
        if self.kind == "http":
            return HttpBackend(self.to_config())
        raise ConfigError(f"backend {self.name!r}: unknown kind {self.kind!r}")


@dataclass
class RetrievalSettings:
    k: int = 5
    passage_token_limit: int = 256
    k1: float = 1.5
    b: float = 0.75


@dataclass
class SummarizerSettings:
    context_budget: int = 2000
    word_budget: int = 600
    max_output_tokens: int = 900


@dataclass
class RunConfig:
    data_dir: Path
    tokenizer_spec: TokenizerSpec = TokenizerSpec(kind="whitespace", name="whitespace")
    backends: dict[str, BackendSpec] = field(default_factory=dict)
    retrieval: RetrievalSettings = field(default_factory=RetrievalSettings)
    summarizer: SummarizerSettings = field(default_factory=SummarizerSettings)
    templates: dict[str, str | None] = field(
        default_factory=lambda: {"chunk": None, "merge": None, "extraction": None, "evaluation": None}
    )
    parallelism: int = 1
    source_path: Path | None = None
    source_raw: dict = field(default_factory=dict)  # file content as parsed, for hashing

    def tokenizer(self) -> Tokenizer:
        return self.tokenizer_spec.load()

    def backend(self, name: str) -> Backend:
        spec = self.backends.get(name)
        if spec is None:
            raise ConfigError(f"no backend named {name!r} in config (have: {sorted(self.backends)})")
        return spec.build()

    def template_text(self, which: str, default: str) -> str:
        path = self.templates.get(which)
        if path:
            return Path(path).read_text(encoding="utf-8")
        return default

    def raw_json(self) -> dict:
        return {
            "data_dir": str(self.data_dir),
            "tokenizer": {
                "kind": self.tokenizer_spec.kind,
                "name": self.tokenizer_spec.name,
                "vocab_file": self.tokenizer_spec.vocab_file,
                "merges_file": self.tokenizer_spec.merges_file,
            },
            "backends": {
                name: {
                    "kind": spec.kind,
                    "context_window": spec.context_window,
                    "input_price": spec.input_price,
                    "output_price": spec.output_price,
                    "max_parallel": spec.max_parallel,
                    "timeout": spec.timeout,
                    "endpoint": spec.endpoint,
                    "model": spec.model,
                    "chunk_size": spec.chunk_size,
                    "fixtures_file": spec.fixtures_file,
                }
                for name, spec in sorted(self.backends.items())
            },
            "retrieval": vars(self.retrieval),
            "summarizer": vars(self.summarizer),
            "templates": self.templates,
            "parallelism": self.parallelism,
        }


def _require_file(path: str | None, what: str) -> None:
    if path and not Path(path).exists():
        raise ConfigError(f"{what} does not exist: {path}")


def load_config(path: str | Path, env: dict | None = None) -> RunConfig:
    env = env if env is not None else dict(os.environ)
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc

    base = path.parent

    def resolve(p: str | None) -> str | None:
        if not p:
            return None
        candidate = Path(p)
        return str(candidate if candidate.is_absolute() else base / candidate)

    data_dir = env.get("BOOKFAITH_DATA_DIR") or raw.get("data_dir", "data")
    tok_raw = raw.get("tokenizer", {"kind": "whitespace"})
    tokenizer_spec = TokenizerSpec(
        kind=tok_raw.get("kind", "whitespace"),
        name=tok_raw.get("name", tok_raw.get("kind", "whitespace")),
        vocab_file=resolve(tok_raw.get("vocab_file")),
        merges_file=resolve(tok_raw.get("merges_file")),
    )
    _require_file(tokenizer_spec.vocab_file, "tokenizer vocab_file")
    _require_file(tokenizer_spec.merges_file, "tokenizer merges_file")

    backends: dict[str, BackendSpec] = {}
    for name, spec_raw in raw.get("backends", {}).items():
        spec = BackendSpec(
            name=name,
            kind=spec_raw.get("kind", "mock"),
            context_window=int(spec_raw.get("context_window", 1_000_000)),
            input_price=float(spec_raw.get("input_price", 0.0)),
            output_price=float(spec_raw.get("output_price", 0.0)),
            max_parallel=int(spec_raw.get("max_parallel", 4)),
            timeout=float(spec_raw.get("timeout", 120.0)),
            endpoint=spec_raw.get("endpoint"),
            model=spec_raw.get("model"),
            chunk_size=int(spec_raw.get("chunk_size", 2048)),
            fixtures_file=resolve(spec_raw.get("fixtures_file")),
        )
        if spec.chunk_size > spec.context_window:
            raise ConfigError(
                f"backend {name!r}: chunk_size {spec.chunk_size} exceeds context_window {spec.context_window}"
            )
        _require_file(spec.fixtures_file, f"backend {name!r} fixtures_file")
        backends[name] = spec

    retrieval_raw = raw.get("retrieval", {})
    summarizer_raw = raw.get("summarizer", {})
    templates = {
        which: resolve(raw.get("templates", {}).get(which))
        for which in ("chunk", "merge", "extraction", "evaluation")
    }
    for which, template_path in templates.items():
        _require_file(template_path, f"{which} template")

    parallelism = int(env.get("BOOKFAITH_PARALLELISM") or raw.get("parallelism", 1))

    config = RunConfig(
        data_dir=Path(data_dir),
        tokenizer_spec=tokenizer_spec,
        backends=backends,
        retrieval=RetrievalSettings(
            k=int(retrieval_raw.get("k", 5)),
            passage_token_limit=int(retrieval_raw.get("passage_token_limit", 256)),
            k1=float(retrieval_raw.get("k1", 1.5)),
            b=float(retrieval_raw.get("b", 0.75)),
        ),
        summarizer=SummarizerSettings(
            context_budget=int(summarizer_raw.get("context_budget", 2000)),
            word_budget=int(summarizer_raw.get("word_budget", 600)),
            max_output_tokens=int(summarizer_raw.get("max_output_tokens", 900)),
        ),
        templates=templates,
        parallelism=parallelism,
        source_path=path,
        source_raw=raw,
    )
    return config
