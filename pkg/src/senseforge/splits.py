"""Reproducible Pure-/Partial-/Non-OOV partitions over WiC datasets.

All randomness flows through sub-seeds derived from (seed, op, lemma), so
identical inputs and seeds always produce identical manifests.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .forge import WicPair
from .util import SenseforgeError, derive_seed

logger = logging.getLogger(__name__)

SPLIT_TYPES = ("pure-oov", "partial-oov", "non-oov")


class SplitError(SenseforgeError):
    pass


@dataclass
class SplitManifest:
    split_type: str
    seed: int
    train_ids: list[str]
    validation_ids: list[str]
    test_ids: list[str]
    lemma_sets: dict[str, list[str]] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "type": self.split_type,
            "seed": self.seed,
            "train": list(self.train_ids),
            "validation": list(self.validation_ids),
            "test": list(self.test_ids),
            "lemmas": {k: list(v) for k, v in self.lemma_sets.items()},
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping) -> "SplitManifest":
        return cls(
            split_type=obj["type"],
            seed=int(obj["seed"]),
            train_ids=list(obj["train"]),
            validation_ids=list(obj.get("validation", [])),
            test_ids=list(obj["test"]),
            lemma_sets={k: list(v) for k, v in obj.get("lemmas", {}).items()},
        )


def _lemma_of(pairs: Sequence[WicPair]) -> dict[str, str]:
    return {p.id: p.lemma for p in pairs}


def _check_inputs(sskj: Sequence[WicPair], elexis: Sequence[WicPair]) -> None:
    ids = [p.id for p in sskj] + [p.id for p in elexis]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise SplitError(f"pair ids are not globally unique: {dupes[:5]}")


def _lemma_sets(manifest: SplitManifest, lemma_of: Mapping[str, str]) -> dict[str, list[str]]:
    return {
        "train": sorted({lemma_of[i] for i in manifest.train_ids}),
        "validation": sorted({lemma_of[i] for i in manifest.validation_ids}),
        "test": sorted({lemma_of[i] for i in manifest.test_ids}),
    }


def split_pure_oov(sskj: Sequence[WicPair], elexis: Sequence[WicPair], seed: int) -> SplitManifest:
    """Test on all of elexis; train on sskj pairs whose lemma never occurs in test."""
    if not sskj or not elexis:
        raise SplitError("both datasets must be non-empty")
    _check_inputs(sskj, elexis)
    test_lemmas = {p.lemma for p in elexis}
    train_ids = [p.id for p in sskj if p.lemma not in test_lemmas]
    if not train_ids:
        raise SplitError("no training pairs remain after excluding test lemmas")
    manifest = SplitManifest("pure-oov", seed, train_ids, [], [p.id for p in elexis])
    manifest.lemma_sets = _lemma_sets(manifest, _lemma_of(list(sskj) + list(elexis)))
    return manifest


def split_partial_oov(sskj: Sequence[WicPair], elexis: Sequence[WicPair], seed: int) -> SplitManifest:
    """Split elexis lemmas into two pair-count-balanced halves; one joins train.

    Lemmas are shuffled with the seed, then assigned greedily in descending
    pair-count order (stable, so the shuffle breaks count ties) to whichever
    half currently holds fewer pairs.
    """
    if not sskj or not elexis:
        raise SplitError("both datasets must be non-empty")
    _check_inputs(sskj, elexis)
    counts: dict[str, int] = {}
    for p in elexis:
        counts[p.lemma] = counts.get(p.lemma, 0) + 1
    if len(counts) < 2:
        raise SplitError("partial-oov needs at least two elexis lemmas")

    lemmas = sorted(counts)
    random.Random(derive_seed(seed, "partial-oov")).shuffle(lemmas)
    lemmas.sort(key=lambda l: -counts[l])

    half_a: set[str] = set()
    half_b: set[str] = set()
    total_a = total_b = 0
    for lemma in lemmas:
        if total_a <= total_b:
            half_a.add(lemma)
            total_a += counts[lemma]
        else:
            half_b.add(lemma)
            total_b += counts[lemma]

    train_ids = [p.id for p in sskj] + [p.id for p in elexis if p.lemma in half_a]
    test_ids = [p.id for p in elexis if p.lemma in half_b]
    manifest = SplitManifest("partial-oov", seed, train_ids, [], test_ids)
    manifest.lemma_sets = _lemma_sets(manifest, _lemma_of(list(sskj) + list(elexis)))
    return manifest


def split_non_oov(sskj: Sequence[WicPair], elexis: Sequence[WicPair], seed: int) -> SplitManifest:
    """Divide each elexis lemma's pairs 50/50 between train and test.

    Odd counts put the extra pair in train; a single-pair lemma goes entirely
    to train (logged), so every test lemma also occurs in train.
    """
    if not sskj or not elexis:
        raise SplitError("both datasets must be non-empty")
    _check_inputs(sskj, elexis)
    by_lemma: dict[str, list[str]] = {}
    for p in elexis:
        by_lemma.setdefault(p.lemma, []).append(p.id)

    train_ids = [p.id for p in sskj]
    test_ids: list[str] = []
    for lemma in sorted(by_lemma):
        ids = list(by_lemma[lemma])
        if len(ids) == 1:
            logger.info("lemma %r has a single pair; assigned to train", lemma)
            train_ids.extend(ids)
            continue
        random.Random(derive_seed(seed, "non-oov", lemma)).shuffle(ids)
        cut = math.ceil(len(ids) / 2)
        train_ids.extend(ids[:cut])
        test_ids.extend(ids[cut:])
    manifest = SplitManifest("non-oov", seed, train_ids, [], test_ids)
    manifest.lemma_sets = _lemma_sets(manifest, _lemma_of(list(sskj) + list(elexis)))
    return manifest


def holdout_validation(
    manifest: SplitManifest,
    sskj: Sequence[WicPair],
    elexis: Sequence[WicPair],
    *,
    fraction: float = 0.10,
    seed: int = 0,
    lemma_disjoint: bool = False,
) -> SplitManifest:
    """Move a fraction of the manifest's elexis-origin ids into validation.

    The quota is ceil(fraction * count of elexis-origin ids), apportioned per
    lemma by largest remainder and sampled with per-lemma sub-seeds. With
    lemma_disjoint=True, whole lemmas are moved instead (in seeded order)
    until the quota is reached, so validation lemmas never overlap train/test.
    """
    if not (0.0 < fraction < 1.0):
        raise SplitError(f"fraction must be in (0, 1), got {fraction}")
    if manifest.validation_ids:
        raise SplitError("manifest already has a validation partition")

    elexis_ids = {p.id for p in elexis}
    lemma_of = _lemma_of(list(sskj) + list(elexis))
    in_manifest = [i for i in list(manifest.train_ids) + list(manifest.test_ids) if i in elexis_ids]
    if not in_manifest:
        raise SplitError("manifest contains no elexis-origin ids to hold out")
    total_quota = math.ceil(fraction * len(in_manifest))

    by_lemma: dict[str, list[str]] = {}
    for i in in_manifest:
        by_lemma.setdefault(lemma_of[i], []).append(i)

    chosen: list[str] = []
    if lemma_disjoint:
        lemmas = sorted(by_lemma)
        random.Random(derive_seed(seed, "holdout-lemmas")).shuffle(lemmas)
        for lemma in lemmas:
            if len(chosen) >= total_quota:
                break
            chosen.extend(sorted(by_lemma[lemma]))
    else:
        quotas: dict[str, int] = {}
        remainders: list[tuple[float, str]] = []
        for lemma in sorted(by_lemma):
            exact = fraction * len(by_lemma[lemma])
            quotas[lemma] = math.floor(exact)
            remainders.append((exact - quotas[lemma], lemma))
        missing = total_quota - sum(quotas.values())
        for _, lemma in sorted(remainders, key=lambda t: (-t[0], t[1]))[:missing]:
            quotas[lemma] += 1
        for lemma in sorted(by_lemma):
            if quotas[lemma] == 0:
                continue
            rng = random.Random(derive_seed(seed, "holdout", lemma))
            chosen.extend(rng.sample(sorted(by_lemma[lemma]), quotas[lemma]))

    moved = set(chosen)
    out = SplitManifest(
        manifest.split_type,
        manifest.seed,
        [i for i in manifest.train_ids if i not in moved],
        chosen,
        [i for i in manifest.test_ids if i not in moved],
    )
    out.lemma_sets = _lemma_sets(out, lemma_of)
    return out


def validate_manifest(manifest: SplitManifest, known_ids: set[str]) -> None:
    """Assert pairwise disjointness and that all ids exist in the sources."""
    train, val, test = map(set, (manifest.train_ids, manifest.validation_ids, manifest.test_ids))
    if train & val or train & test or val & test:
        raise SplitError("manifest partitions are not pairwise disjoint")
    unknown = (train | val | test) - known_ids
    if unknown:
        raise SplitError(f"manifest references unknown ids: {sorted(unknown)[:5]}")
