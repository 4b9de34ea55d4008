"""Artifact directories and run manifests.

Every command leaves a manifest next to its outputs carrying the config
hash, template hashes, input digests, and totals, so tables can be
regenerated from the artifact tree alone.
"""

from __future__ import annotations

import json
from pathlib import Path

from .util import canonical_json, canonical_json_line, now, sha256_hex


def write_json(path: str | Path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(obj), encoding="utf-8")


def read_json(path: str | Path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_jsonl(path: str | Path, objs) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objs:
            fh.write(canonical_json_line(obj) + "\n")


def read_jsonl(path: str | Path) -> list:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(json.loads(line))
    return out


def file_digest(path: str | Path) -> str:
    return sha256_hex(Path(path).read_bytes())


def build_manifest(
    command: str,
    config_json: dict | None = None,
    inputs: dict[str, str] | None = None,
    templates: dict[str, str] | None = None,
    parameters: dict | None = None,
    totals: dict | None = None,
) -> dict:
    return {
        "command": command,
        "created_at": now(),
        "config_hash": sha256_hex(canonical_json(config_json)) if config_json is not None else None,
        "inputs": inputs or {},
        "template_hashes": {name: sha256_hex(text) for name, text in (templates or {}).items()},
        "parameters": parameters or {},
        "totals": totals or {},
    }


def write_manifest(directory: str | Path, manifest: dict) -> None:
    write_json(Path(directory) / "manifest.json", manifest)
