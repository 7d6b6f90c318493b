"""Shared helpers: text normalization, seeding, hashing."""

from __future__ import annotations

import hashlib
import json
import re
import unicodedata

_WS = re.compile(r"\s+")


class SenseforgeError(Exception):
    """Base class for all domain errors raised by this package."""


def normalize_text(text: str) -> str:
    """NFC-normalize, collapse whitespace runs to single spaces, strip ends."""
    return _WS.sub(" ", unicodedata.normalize("NFC", text)).strip()


def nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def dedup_key(text: str) -> str:
    """Case-folded, whitespace-collapsed NFC form used for duplicate detection."""
    return normalize_text(text).casefold()


def canonical_json(obj) -> str:
    """Stable JSON encoding (sorted keys, no whitespace) for hashing."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def derive_seed(seed: int, *parts) -> int:
    """Derive a stable sub-seed from a root seed and discriminator parts.

    Uses SHA-256 over a canonical encoding, so identical inputs give identical
    sub-seeds on every platform and Python version (unlike hash()).
    """
    payload = canonical_json([seed, *parts]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


def config_digest(obj) -> str:
    """Short content digest of a config-like structure."""
    return sha256_hex(canonical_json(obj).encode("utf-8"))[:16]
