"""JSON Lines files with an optional leading provenance line.

Pipeline outputs start with {"_meta": {...}} carrying the stage name, config
digest and input content hashes; readers skip that line. Meta content never
includes wall-clock values, so identical runs write identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional


def dump_record(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False)


def write_jsonl(path: str | Path, records: Iterable[dict], meta: Optional[dict] = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(dump_record({"_meta": meta}) + "\n")
        for rec in records:
            fh.write(dump_record(rec) + "\n")


def read_jsonl(path: str | Path) -> tuple[list[dict], Optional[dict]]:
    records: list[dict] = []
    meta: Optional[dict] = None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if isinstance(obj, dict) and "_meta" in obj:
            meta = obj["_meta"]
            continue
        records.append(obj)
    return records, meta


def write_json(path: str | Path, obj: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
