"""Deterministic synthetic fixtures for tests, demos and offline pipelines."""

from __future__ import annotations

import random

from .dictionary import DictionaryEntry, Sense, SpecialExample, UsageSnippet
from .forge import SenseExample, SenseInventory
from .util import derive_seed

# Small Slovene-flavoured word material; includes non-ASCII to exercise NFC paths.
_STEMS = [
    "klop", "list", "vrsta", "miza", "reka", "polje", "možgan", "črta",
    "žoga", "šola", "veja", "okno", "cesta", "zvezek", "gora", "morje",
    "pesem", "kamen", "trava", "oblak", "sveča", "ključ", "riba", "pot",
]
_FILLERS = [
    "velik", "star", "nov", "lep", "zelen", "hiter", "globok", "svetel",
    "ima", "je", "stoji", "leži", "raste", "teče", "vidi", "pozna",
]
_TAGS = ["ekspr", "jezikosl", "zastar", "nav"]


def _pseudo_lemma(rng: random.Random, taken: set[str]) -> str:
    lemma = rng.choice(_STEMS) + rng.choice(["", "a", "je", "ica", "nik", "ost"])
    while lemma in taken:  # the base space is small; disambiguate with a counter
        lemma = f"{lemma}{rng.randint(2, 10 * (len(taken) + 2))}"
    taken.add(lemma)
    return lemma


def _phrase(rng: random.Random, lemma: str, with_lemma: bool = True) -> str:
    words = rng.sample(_FILLERS, rng.randint(1, 3))
    if with_lemma:
        words.insert(rng.randrange(len(words) + 1), lemma)
    return " ".join(words)


def random_entries(count: int, seed: int, max_senses: int = 5) -> list[DictionaryEntry]:
    """Generate canonical-grammar entries for round-trip fuzzing."""
    rng = random.Random(seed)
    taken: set[str] = set()
    entries = []
    for _ in range(count):
        lemma = _pseudo_lemma(rng, taken)
        senses = []
        for ordinal in range(1, rng.randint(1, max_senses) + 1):
            definition = _phrase(rng, lemma, with_lemma=False) or "pomen"
            snippets: list[UsageSnippet] = []
            group = 0
            for _ in range(rng.randint(0, 3)):
                for _ in range(rng.randint(1, 2)):
                    snippets.append(
                        UsageSnippet(_phrase(rng, lemma), lemma, (lemma, ordinal), group, len(snippets))
                    )
                group += 1
            special = [
                SpecialExample(rng.choice(_TAGS), _phrase(rng, lemma))
                for _ in range(rng.randint(0, 2))
            ]
            senses.append(Sense(ordinal, definition, snippets, special))
        entries.append(DictionaryEntry(lemma, senses))
    return entries


def multisense_entries(count: int, seed: int, min_senses: int = 2) -> list[DictionaryEntry]:
    """Entries guaranteed to have >= min_senses senses and >= 1 snippet per sense."""
    rng = random.Random(seed)
    taken: set[str] = set()
    entries = []
    for _ in range(count):
        lemma = _pseudo_lemma(rng, taken)
        senses = []
        for ordinal in range(1, rng.randint(min_senses, min_senses + 2) + 1):
            snippets = [
                UsageSnippet(_phrase(rng, lemma), lemma, (lemma, ordinal), g, g)
                for g in range(rng.randint(1, 3))
            ]
            senses.append(Sense(ordinal, _phrase(rng, lemma, with_lemma=False) or "pomen", snippets))
        entries.append(DictionaryEntry(lemma, senses))
    return entries


def synthetic_sense_corpus(
    n_lemmas: int,
    seed: int,
    inventory_id: str = "synthetic",
    senses_range: tuple[int, int] = (2, 4),
    examples_per_sense: int = 3,
) -> tuple[list[SenseExample], SenseInventory]:
    """Sense-labeled full sentences with located target spans.

    Every sentence starts with the lemma (span at the front) followed by a
    sense-specific keyword, so gold senses are recoverable from the text.
    """
    rng = random.Random(derive_seed(seed, "sense-corpus"))
    taken: set[str] = set()
    examples: list[SenseExample] = []
    senses: dict[str, set[str]] = {}
    for _ in range(n_lemmas):
        lemma = _pseudo_lemma(rng, taken)
        n_senses = rng.randint(*senses_range)
        keywords = rng.sample(_FILLERS, n_senses)
        for ordinal in range(1, n_senses + 1):
            sense_id = f"{lemma}.{ordinal}"
            senses.setdefault(lemma, set()).add(sense_id)
            for j in range(examples_per_sense):
                tail = " ".join(rng.sample(_FILLERS, 2))
                sentence = f"{lemma} {keywords[ordinal - 1]} {tail} {j}"
                examples.append(
                    SenseExample(
                        id=f"{sense_id}.e{j}",
                        lemma=lemma,
                        sentence=sentence,
                        target_span=(0, len(lemma)),
                        sense_id=sense_id,
                        inventory_id=inventory_id,
                        source="corpus",
                    )
                )
    return examples, SenseInventory(inventory_id, senses)
