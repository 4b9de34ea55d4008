"""Small shared helpers: reproducible clock, canonical JSON, digests."""

from __future__ import annotations

import hashlib
import json
import os
import time


def now() -> float:
    """Current time, overridable via SOURCE_DATE_EPOCH for reproducible
    artifact trees."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        return float(epoch)
    return time.time()


def canonical_json(obj) -> str:
    """Stable JSON rendering: sorted keys, trailing newline."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def canonical_json_line(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def sha256_hex(data: str | bytes) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()
