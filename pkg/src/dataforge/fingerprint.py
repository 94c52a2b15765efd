"""Content hashing and canonical JSON used for fingerprints and cache keys.

A fingerprint is always the lowercase hex SHA-256 of some canonical byte
sequence. Canonical JSON is the unique text form of a JSON document with
sorted object keys and no insignificant whitespace, so structurally equal
documents hash identically.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

FINGERPRINT_LEN = 64  # hex chars of a SHA-256


def canonical_json(obj: Any) -> str:
    """Serialize *obj* with sorted keys and compact separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def hash_parts(*parts: bytes | str) -> str:
    """Hash a sequence of parts with unambiguous length-prefixed framing.

    Each part (strings are taken as utf-8) is framed as ``u64-le length ||
    bytes`` so that no two distinct part sequences produce the same digest
    input.
    """
    h = hashlib.sha256()
    for part in parts:
        data = part.encode("utf-8") if isinstance(part, str) else part
        h.update(len(data).to_bytes(8, "little"))
        h.update(data)
    return h.hexdigest()


def is_fingerprint(s: str) -> bool:
    return len(s) == FINGERPRINT_LEN and all(c in "0123456789abcdef" for c in s)
