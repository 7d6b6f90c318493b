"""Assemble sense-labeled datasets and forge balanced WiC pair datasets.

Pairing algorithm (documented precisely because tests re-derive it):

1. Examples are grouped by lemma; lemmas are processed in ascending order,
   each with its own RNG seeded from (seed, lemma).
2. Within a lemma, examples are ordered ascending by (sense_id, id). For each
   example in that order (the anchor), up to partners_per_anchor/2 same-sense
   and partners_per_anchor/2 different-sense partners are drawn without
   replacement (random.Random.sample over the ordered pool, same-sense pool
   first). Pools exclude the anchor itself and any example with an identical
   sentence. Each draw yields an unordered pair; a pair already produced for
   this lemma is skipped.
3. Same-sense pairs are grouped by sense, ordered ascending by their sorted
   id pair, and truncated to max_pairs_per_sense per sense.
4. If either label is absent the lemma is skipped. Otherwise the majority
   label is downsampled to the minority count (random.Random.sample over the
   pairs ordered by sorted id pair).
5. The lemma's final pairs are sorted by their sorted id pair and assigned
   ids "<dataset_id>:<lemma>#<k>"; the sentence with the smaller example id
   becomes side 1.
"""

from __future__ import annotations

import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .expansion import KEPT, GeneratedSentence, LemmaMatchPolicy, locate_target
from .util import SenseforgeError, derive_seed, normalize_text

logger = logging.getLogger(__name__)


class ForgeError(SenseforgeError):
    pass


@dataclass
class SenseExample:
    """One full sentence with a located target span and a sense label."""

    id: str
    lemma: str
    sentence: str
    target_span: tuple[int, int]
    sense_id: str
    inventory_id: str
    source: str  # generated | dictionary-snippet | corpus


@dataclass
class SenseInventory:
    inventory_id: str
    senses: dict[str, set[str]] = field(default_factory=dict)


@dataclass
class WicPair:
    id: str
    lemma: str
    s1: str
    s1_span: tuple[int, int]
    s2: str
    s2_span: tuple[int, int]
    label: int
    provenance: dict  # {"src": [dataset ids], "ex": [example id 1, example id 2]}


@dataclass
class ForgeConfig:
    partners_per_anchor: int = 12
    max_pairs_per_sense: int = 100
    max_examples_per_sense: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.partners_per_anchor <= 0 or self.partners_per_anchor % 2:
            raise ValueError("partners_per_anchor must be a positive even integer")
        if self.max_pairs_per_sense <= 0 or self.max_examples_per_sense <= 0:
            raise ValueError("per-sense caps must be positive")


def build_wsd_dataset(
    generations: Iterable[GeneratedSentence],
    inventory_id: str,
    policy: LemmaMatchPolicy,
    *,
    source: str = "generated",
) -> tuple[list[SenseExample], SenseInventory]:
    """One SenseExample per kept generation, lemmas with a single sense excluded.

    A kept generation whose target cannot be located is excluded and logged;
    the filter's soundness makes that unreachable in normal pipelines.
    """
    per_sense_counter: Counter = Counter()
    staged: list[SenseExample] = []
    for gen in generations:
        if gen.status != KEPT:
            continue
        lemma, ordinal, _ = gen.source_snippet
        try:
            span = locate_target(gen.text, lemma, policy)
        except ValueError:
            logger.warning("target %r not locatable in kept generation %r; excluded", lemma, gen.text)
            continue
        sense_id = f"{lemma}.{ordinal}"
        k = per_sense_counter[(lemma, ordinal)]
        per_sense_counter[(lemma, ordinal)] += 1
        staged.append(
            SenseExample(f"{sense_id}.g{k}", lemma, gen.text, span, sense_id, inventory_id, source)
        )

    senses_by_lemma: dict[str, set[str]] = {}
    for ex in staged:
        senses_by_lemma.setdefault(ex.lemma, set()).add(ex.sense_id)
    multisense = {l for l, s in senses_by_lemma.items() if len(s) >= 2}
    dropped = set(senses_by_lemma) - multisense
    if dropped:
        logger.info("dropping %d single-sense lemma(s): %s", len(dropped), sorted(dropped))

    examples = [ex for ex in staged if ex.lemma in multisense]
    inventory = SenseInventory(inventory_id, {l: set(senses_by_lemma[l]) for l in multisense})
    return examples, inventory


def cap_examples_per_sense(examples: Sequence[SenseExample], k: int) -> list[SenseExample]:
    """Keep at most the first k examples per (lemma, sense), in dataset order."""
    if k <= 0:
        raise ValueError("cap must be positive")
    counts: Counter = Counter()
    out = []
    for ex in examples:
        counts[(ex.lemma, ex.sense_id)] += 1
        if counts[(ex.lemma, ex.sense_id)] <= k:
            out.append(ex)
    return out


def _pair_key(a: SenseExample, b: SenseExample) -> tuple[str, str]:
    return (a.id, b.id) if a.id < b.id else (b.id, a.id)


def build_wic_pairs(
    examples: Sequence[SenseExample],
    config: ForgeConfig,
    *,
    dataset_id: str = "wic",
) -> list[WicPair]:
    """Forge a balanced same-lemma WiC pair dataset (see module docstring)."""
    capped = cap_examples_per_sense(examples, config.max_examples_per_sense)
    by_lemma: dict[str, list[SenseExample]] = {}
    for ex in capped:
        by_lemma.setdefault(ex.lemma, []).append(ex)

    pairs: list[WicPair] = []
    for lemma in sorted(by_lemma):
        exs = sorted(by_lemma[lemma], key=lambda e: (e.sense_id, e.id))
        rng = random.Random(derive_seed(config.seed, lemma))
        quota = config.partners_per_anchor // 2

        seen: set[tuple[str, str]] = set()
        candidates: list[tuple[SenseExample, SenseExample, int]] = []
        for anchor in exs:
            same_pool = [
                e for e in exs
                if e.id != anchor.id and e.sense_id == anchor.sense_id and e.sentence != anchor.sentence
            ]
            diff_pool = [
                e for e in exs
                if e.sense_id != anchor.sense_id and e.sentence != anchor.sentence
            ]
            drawn = rng.sample(same_pool, min(quota, len(same_pool)))
            drawn += rng.sample(diff_pool, min(quota, len(diff_pool)))
            for partner in drawn:
                key = _pair_key(anchor, partner)
                if key in seen:
                    continue
                seen.add(key)
                label = int(
                    (anchor.inventory_id, anchor.sense_id) == (partner.inventory_id, partner.sense_id)
                )
                candidates.append((anchor, partner, label))

        same_by_sense: dict[str, list] = {}
        diff_cands = []
        for cand in candidates:
            if cand[2] == 1:
                same_by_sense.setdefault(cand[0].sense_id, []).append(cand)
            else:
                diff_cands.append(cand)
        same_cands = []
        for sense in sorted(same_by_sense):
            ranked = sorted(same_by_sense[sense], key=lambda c: _pair_key(c[0], c[1]))
            same_cands.extend(ranked[: config.max_pairs_per_sense])

        if not same_cands or not diff_cands:
            logger.info("lemma %r cannot produce both labels; skipped", lemma)
            continue
        same_cands.sort(key=lambda c: _pair_key(c[0], c[1]))
        diff_cands.sort(key=lambda c: _pair_key(c[0], c[1]))
        n = min(len(same_cands), len(diff_cands))
        if len(same_cands) > n:
            same_cands = rng.sample(same_cands, n)
        if len(diff_cands) > n:
            diff_cands = rng.sample(diff_cands, n)

        final = sorted(same_cands + diff_cands, key=lambda c: _pair_key(c[0], c[1]))
        for k, (a, b, label) in enumerate(final):
            first, second = (a, b) if a.id < b.id else (b, a)
            pairs.append(
                WicPair(
                    id=f"{dataset_id}:{lemma}#{k}",
                    lemma=lemma,
                    s1=first.sentence,
                    s1_span=first.target_span,
                    s2=second.sentence,
                    s2_span=second.target_span,
                    label=label,
                    provenance={"src": [dataset_id], "ex": [first.id, second.id]},
                )
            )
    return pairs


def forge_stats(pairs: Sequence[WicPair]) -> dict:
    """Counts reported alongside a forged dataset (pairs vs distinct sentences)."""
    sentences = {p.s1 for p in pairs} | {p.s2 for p in pairs}
    return {
        "pairs": len(pairs),
        "distinct_sentences": len(sentences),
        "lemmas": len({p.lemma for p in pairs}),
        "label_1": sum(p.label for p in pairs),
        "label_0": sum(1 - p.label for p in pairs),
    }


def merge_wic(datasets: Sequence[tuple[str, Sequence[WicPair]]]) -> list[WicPair]:
    """Concatenate WiC datasets, re-identifying every pair with its source prefix.

    Labels are never recomputed across inventories; provenance is preserved.
    """
    ids = [ds_id for ds_id, _ in datasets]
    if len(set(ids)) != len(ids):
        raise ForgeError(f"duplicate dataset ids in merge: {ids}")
    merged: list[WicPair] = []
    seen: set[str] = set()
    for ds_id, ds_pairs in datasets:
        for p in ds_pairs:
            new_id = f"{ds_id}:{p.id}"
            if new_id in seen:
                raise ForgeError(f"duplicate pair id after re-identification: {new_id}")
            seen.add(new_id)
            merged.append(
                WicPair(new_id, p.lemma, p.s1, p.s1_span, p.s2, p.s2_span, p.label, p.provenance)
            )
    return merged


# --- WSD JSONL record format ---

_WSD_FIELDS = {
    "id": str, "lemma": str, "sentence": str, "target_start": int,
    "target_end": int, "sense_id": str, "inventory": str, "source": str,
}


def sense_example_to_record(ex: SenseExample) -> dict:
    return {
        "id": ex.id,
        "lemma": ex.lemma,
        "sentence": ex.sentence,
        "target_start": ex.target_span[0],
        "target_end": ex.target_span[1],
        "sense_id": ex.sense_id,
        "inventory": ex.inventory_id,
        "source": ex.source,
    }


def sense_example_from_record(rec: Mapping) -> SenseExample:
    return SenseExample(
        id=rec["id"],
        lemma=rec["lemma"],
        sentence=rec["sentence"],
        target_span=(rec["target_start"], rec["target_end"]),
        sense_id=rec["sense_id"],
        inventory_id=rec["inventory"],
        source=rec["source"],
    )


@dataclass
class ImportResult:
    examples: list[SenseExample]
    inventory: SenseInventory
    rejected: list[tuple[dict, str]]


def _check_record(rec: Mapping, policy: LemmaMatchPolicy, inventory_id: str) -> Optional[str]:
    for name, typ in _WSD_FIELDS.items():
        if name not in rec:
            return f"missing field {name!r}"
        if not isinstance(rec[name], typ) or (typ is int and isinstance(rec[name], bool)):
            return f"field {name!r} has wrong type"
    if rec["inventory"] != inventory_id:
        return f"inventory mismatch: {rec['inventory']!r} != {inventory_id!r}"
    sentence, lemma = rec["sentence"], rec["lemma"]
    if sentence != normalize_text(sentence) or lemma != normalize_text(lemma):
        return "text is not NFC-normalized with collapsed whitespace"
    start, end = rec["target_start"], rec["target_end"]
    if not (0 <= start < end <= len(sentence)):
        return f"target span ({start}, {end}) outside sentence bounds"
    from .expansion import lemma_present

    if not lemma_present(sentence[start:end], lemma, policy):
        return f"span text {sentence[start:end]!r} does not match lemma {lemma!r}"
    return None


def import_external_wsd(
    records: Iterable[Mapping],
    inventory_id: str,
    policy: Optional[LemmaMatchPolicy] = None,
) -> ImportResult:
    """Validate and import WSD JSONL records from an external inventory."""
    policy = policy or LemmaMatchPolicy()
    examples: list[SenseExample] = []
    rejected: list[tuple[dict, str]] = []
    inventory = SenseInventory(inventory_id)
    seen_ids: set[str] = set()
    for rec in records:
        reason = _check_record(rec, policy, inventory_id)
        if reason is None and rec["id"] in seen_ids:
            reason = f"duplicate id {rec['id']!r}"
        if reason is not None:
            rejected.append((dict(rec), reason))
            continue
        seen_ids.add(rec["id"])
        ex = sense_example_from_record(rec)
        examples.append(ex)
        inventory.senses.setdefault(ex.lemma, set()).add(ex.sense_id)
    return ImportResult(examples, inventory, rejected)


# --- WiC JSONL record format ---

def wic_pair_to_record(p: WicPair) -> dict:
    return {
        "id": p.id,
        "lemma": p.lemma,
        "s1": p.s1,
        "s1_start": p.s1_span[0],
        "s1_end": p.s1_span[1],
        "s2": p.s2,
        "s2_start": p.s2_span[0],
        "s2_end": p.s2_span[1],
        "label": p.label,
        "provenance": p.provenance,
    }


def wic_pair_from_record(rec: Mapping) -> WicPair:
    return WicPair(
        id=rec["id"],
        lemma=rec["lemma"],
        s1=rec["s1"],
        s1_span=(rec["s1_start"], rec["s1_end"]),
        s2=rec["s2"],
        s2_span=(rec["s2_start"], rec["s2_end"]),
        label=int(rec["label"]),
        provenance=dict(rec.get("provenance") or {"src": [], "ex": []}),
    )


def inventory_to_dict(inv: SenseInventory) -> dict:
    return {
        "inventory_id": inv.inventory_id,
        "senses": {lemma: sorted(ids) for lemma, ids in sorted(inv.senses.items())},
    }


def inventory_from_dict(obj: Mapping) -> SenseInventory:
    return SenseInventory(
        obj["inventory_id"], {l: set(v) for l, v in obj["senses"].items()}
    )
