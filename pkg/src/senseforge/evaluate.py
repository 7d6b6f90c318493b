"""Classification-accuracy evaluation for WiC, WSD and WSI runs.

Baselines: majority label for WiC (0.5 on a balanced set), most frequent
sense in the training data for WSD, and the majority of the known-vs-new
decision for WSI.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .forge import SenseExample, SenseInventory, WicPair
from .resolver import NEW_SENSE, Resolution
from .util import SenseforgeError

_SPLIT_ORDER = {"pure-oov": 0, "partial-oov": 1, "non-oov": 2}
_TASK_ORDER = {"wic": 0, "wsd": 1, "wsi": 2}

CSV_COLUMNS = ["task", "split_type", "dataset_desc", "accuracy", "baseline", "n", "config_digest"]


class EvalError(SenseforgeError):
    pass


@dataclass
class EvalReport:
    task: str
    split_type: str
    accuracy: float
    baseline_accuracy: float
    n_instances: int
    per_lemma: dict[str, dict] = field(default_factory=dict)
    dataset_desc: str = ""
    config_digest: str = ""

    def to_json_dict(self) -> dict:
        return {
            "task": self.task,
            "split_type": self.split_type,
            "dataset_desc": self.dataset_desc,
            "accuracy": self.accuracy,
            "baseline": self.baseline_accuracy,
            "n": self.n_instances,
            "per_lemma": {k: self.per_lemma[k] for k in sorted(self.per_lemma)},
            "config_digest": self.config_digest,
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping) -> "EvalReport":
        return cls(
            task=obj["task"],
            split_type=obj.get("split_type", ""),
            accuracy=float(obj["accuracy"]),
            baseline_accuracy=float(obj["baseline"]),
            n_instances=int(obj["n"]),
            per_lemma={k: dict(v) for k, v in obj.get("per_lemma", {}).items()},
            dataset_desc=obj.get("dataset_desc", ""),
            config_digest=obj.get("config_digest", ""),
        )


def _per_lemma(rows: Sequence[tuple[str, bool]]) -> dict[str, dict]:
    stats: dict[str, dict] = {}
    for lemma, ok in rows:
        entry = stats.setdefault(lemma, {"n": 0, "correct": 0})
        entry["n"] += 1
        entry["correct"] += int(ok)
    for entry in stats.values():
        entry["accuracy"] = entry["correct"] / entry["n"]
    return stats


def eval_wic(
    predictions: Mapping[str, int],
    gold_pairs: Sequence[WicPair],
    *,
    split_type: str = "",
    dataset_desc: str = "",
    config_digest: str = "",
) -> EvalReport:
    if not gold_pairs:
        raise EvalError("gold pair set is empty")
    missing = [p.id for p in gold_pairs if p.id not in predictions]
    if missing:
        raise EvalError(f"missing predictions for {len(missing)} ids: {missing[:5]}")
    rows = [(p.lemma, int(predictions[p.id]) == p.label) for p in gold_pairs]
    correct = sum(ok for _, ok in rows)
    label_counts = Counter(p.label for p in gold_pairs)
    baseline = max(label_counts.values()) / len(gold_pairs)
    return EvalReport("wic", split_type, correct / len(gold_pairs), baseline,
                      len(gold_pairs), _per_lemma(rows), dataset_desc, config_digest)


def _join(resolutions: Sequence[Resolution], gold: Sequence[SenseExample]):
    by_id = {r.example_id: r for r in resolutions}
    missing = [g.id for g in gold if g.id not in by_id]
    if missing:
        raise EvalError(f"missing resolutions for {len(missing)} ids: {missing[:5]}")
    return [(g, by_id[g.id]) for g in gold]


def most_frequent_senses(train: Sequence[SenseExample]) -> dict[str, str]:
    """Per-lemma most frequent sense; count ties go to the smaller sense id."""
    counts: dict[str, Counter] = {}
    for ex in train:
        counts.setdefault(ex.lemma, Counter())[ex.sense_id] += 1
    return {
        lemma: min(c, key=lambda s: (-c[s], s))
        for lemma, c in counts.items()
    }


def eval_wsd(
    resolutions: Sequence[Resolution],
    gold: Sequence[SenseExample],
    train: Sequence[SenseExample],
    *,
    split_type: str = "",
    dataset_desc: str = "",
    config_digest: str = "",
) -> EvalReport:
    if not gold:
        raise EvalError("gold example set is empty")
    offenders = [r.example_id for r in resolutions if r.predicted == NEW_SENSE]
    if offenders:
        raise EvalError(f"NEW_SENSE present in resolutions ({offenders[:5]}); use eval_wsi")
    joined = _join(resolutions, gold)
    rows = [(g.lemma, r.predicted == g.sense_id) for g, r in joined]
    mfs = most_frequent_senses(train)
    baseline_hits = sum(mfs.get(g.lemma) == g.sense_id for g, _ in joined)
    return EvalReport("wsd", split_type, sum(ok for _, ok in rows) / len(rows),
                      baseline_hits / len(rows), len(rows), _per_lemma(rows),
                      dataset_desc, config_digest)


def eval_wsi(
    resolutions: Sequence[Resolution],
    gold: Sequence[SenseExample],
    train_inventory: SenseInventory,
    *,
    split_type: str = "",
    dataset_desc: str = "",
    config_digest: str = "",
) -> EvalReport:
    """An instance is correct when a known gold sense is predicted exactly, or
    an unknown gold sense is flagged NEW_SENSE."""
    if not gold:
        raise EvalError("gold example set is empty")
    joined = _join(resolutions, gold)
    rows = []
    known_count = 0
    for g, r in joined:
        known = g.sense_id in train_inventory.senses.get(g.lemma, set())
        known_count += int(known)
        ok = (r.predicted == g.sense_id) if known else (r.predicted == NEW_SENSE)
        rows.append((g.lemma, ok))
    baseline = max(known_count, len(rows) - known_count) / len(rows)
    return EvalReport("wsi", split_type, sum(ok for _, ok in rows) / len(rows),
                      baseline, len(rows), _per_lemma(rows), dataset_desc, config_digest)


def render_report(reports: Sequence[EvalReport]) -> tuple[str, str]:
    """Render reports as an aligned text table and RFC-4180-style CSV.

    Rows are ordered by task (wic, wsd, wsi), then split (pure, partial,
    non-OOV), then dataset description.
    """
    ordered = sorted(
        reports,
        key=lambda r: (_TASK_ORDER.get(r.task, 9), _SPLIT_ORDER.get(r.split_type, 9), r.dataset_desc),
    )

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_COLUMNS)
    for r in ordered:
        writer.writerow([r.task, r.split_type, r.dataset_desc, r.accuracy,
                         r.baseline_accuracy, r.n_instances, r.config_digest])
    csv_text = buf.getvalue()

    header = ["Dataset used", "Task", "Task type", "CA", "Default", "n"]
    body = [
        [r.dataset_desc or "-", r.task, r.split_type or "-",
         f"{r.accuracy:.3f}", f"{r.baseline_accuracy:.3f}", str(r.n_instances)]
        for r in ordered
    ]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = [
        "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(header)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in body:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n", csv_text
