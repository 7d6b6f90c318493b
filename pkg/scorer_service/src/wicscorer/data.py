"""WiC pair data handling: JSONL loading, target marking, vocabulary, fixtures.

Input records follow the WiC JSONL schema: {"id", "lemma", "s1", "s1_start",
"s1_end", "s2", "s2_start", "s2_end", "label", ...}. Target words are wrapped
with the reserved marker tokens [TGT] ... [/TGT] before tokenization; span-to-
token alignment is validated per example so markers never shift which surface
tokens are marked.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from pathlib import Path

PAD, UNK, CLS, SEP, TGT_OPEN, TGT_CLOSE = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[TGT]", "[/TGT]"
SPECIALS = [PAD, UNK, CLS, SEP, TGT_OPEN, TGT_CLOSE]

_TOKEN = re.compile(r"\[/?TGT\]|\w+", re.UNICODE)


class MarkingError(ValueError):
    """The target span does not align with token boundaries."""


def load_wic_jsonl(path) -> list[dict]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if "_meta" in obj:
            continue
        records.append(obj)
    return records


def tokenize(text: str) -> list[str]:
    return [t if t in (TGT_OPEN, TGT_CLOSE) else t.casefold() for t in _TOKEN.findall(text)]


def mark_target(text: str, start: int, end: int) -> str:
    if not (0 <= start < end <= len(text)):
        raise MarkingError(f"span ({start}, {end}) outside text of length {len(text)}")
    return f"{text[:start]}{TGT_OPEN} {text[start:end]} {TGT_CLOSE}{text[end:]}"


def check_marker_alignment(text: str, start: int, end: int) -> None:
    """Marked tokens must be exactly the span's tokens, and nothing else moves."""
    marked = tokenize(mark_target(text, start, end))
    open_i, close_i = marked.index(TGT_OPEN), marked.index(TGT_CLOSE)
    inside = marked[open_i + 1 : close_i]
    if inside != tokenize(text[start:end]):
        raise MarkingError(f"span ({start}, {end}) cuts through a token in {text!r}")
    outside = marked[:open_i] + inside + marked[close_i + 1 :]
    if outside != tokenize(text):
        raise MarkingError(f"marking shifted surface tokens in {text!r}")


@dataclass
class Vocab:
    token_to_id: dict[str, int]

    @classmethod
    def build(cls, texts, max_size: int = 20000) -> "Vocab":
        counts: dict[str, int] = {}
        for text in texts:
            for tok in tokenize(text):
                if tok not in SPECIALS:
                    counts[tok] = counts.get(tok, 0) + 1
        ranked = sorted(counts, key=lambda t: (-counts[t], t))[: max_size - len(SPECIALS)]
        mapping = {tok: i for i, tok in enumerate(SPECIALS)}
        for tok in ranked:
            mapping[tok] = len(mapping)
        return cls(mapping)

    def __len__(self):
        return len(self.token_to_id)

    def encode_tokens(self, tokens) -> list[int]:
        unk = self.token_to_id[UNK]
        return [self.token_to_id.get(t, unk) for t in tokens]

    def to_dict(self) -> dict:
        return dict(self.token_to_id)

    @classmethod
    def from_dict(cls, obj: dict) -> "Vocab":
        return cls({str(k): int(v) for k, v in obj.items()})


def encode_pair(vocab: Vocab, rec: dict, max_len: int = 256) -> tuple[list[int], list[int]]:
    """[CLS] marked-s1 [SEP] marked-s2 [SEP] -> (token ids, segment ids)."""
    s1 = mark_target(rec["s1"], rec["s1_start"], rec["s1_end"])
    s2 = mark_target(rec["s2"], rec["s2_start"], rec["s2_end"])
    ids = [vocab.token_to_id[CLS]]
    segs = [0]
    for seg, text in ((0, s1), (1, s2)):
        toks = vocab.encode_tokens(tokenize(text)) + [vocab.token_to_id[SEP]]
        ids.extend(toks)
        segs.extend([seg] * len(toks))
    return ids[:max_len], segs[:max_len]


# --- separable synthetic fixture ---

_KEYWORDS = ["mrak", "zora", "vihar", "plima", "sneg", "žerjavica"]
_FILLERS = ["zelo", "precej", "vedno", "nikoli", "morda", "spet", "tiho", "hitro", "daleč"]


def _sentence(rng, lemma, keyword):
    tail = " ".join(rng.choice(_FILLERS) for _ in range(rng.randint(2, 4)))
    return f"{lemma} {keyword} {tail}"


def make_separable_fixture(
    seed: int = 11,
    n_lemmas: int = 10,
    senses_per_lemma: int = 2,
    train_sentences_per_sense: int = 6,
    held_sentences_per_sense: int = 4,
    n_train_pairs: int = 200,
    n_held_pairs: int = 200,
) -> dict:
    """Keyword-separable corpus: same-sense sentences share a planted keyword.

    Returns train/held WiC pair records plus WSD-form records (held targets,
    train support) so the same fixture drives pair classification and
    sense-resolution tests.
    """
    rng = random.Random(seed)
    train_corpus: dict[tuple, list] = {}
    held_corpus: dict[tuple, list] = {}
    wsd_support, wsd_targets = [], []
    for li in range(n_lemmas):
        lemma = f"beseda{li}"
        keywords = rng.sample(_KEYWORDS, senses_per_lemma)
        for s in range(senses_per_lemma):
            sense_id = f"{lemma}.{s + 1}"
            train_corpus[(lemma, sense_id)] = [
                _sentence(rng, lemma, keywords[s]) for _ in range(train_sentences_per_sense)
            ]
            held_corpus[(lemma, sense_id)] = [
                _sentence(rng, lemma, keywords[s]) for _ in range(held_sentences_per_sense)
            ]
            for kind, corpus, sink in (("sup", train_corpus, wsd_support),
                                       ("tgt", held_corpus, wsd_targets)):
                for j, sentence in enumerate(corpus[(lemma, sense_id)]):
                    sink.append({
                        "id": f"{sense_id}.{kind}{j}",
                        "lemma": lemma,
                        "sentence": sentence,
                        "target_start": 0,
                        "target_end": len(lemma),
                        "sense_id": sense_id,
                        "inventory": "fixture",
                        "source": "corpus",
                    })

    def pair_up(corpus, n, prefix, pair_rng):
        keys = sorted(corpus)
        pairs = []
        while len(pairs) < n:
            lemma, sense = pair_rng.choice(keys)
            if pair_rng.random() < 0.5:
                a, b = pair_rng.sample(corpus[(lemma, sense)], 2)
                label = 1
            else:
                others = [k for k in keys if k[0] == lemma and k[1] != sense]
                if not others:
                    continue
                a = pair_rng.choice(corpus[(lemma, sense)])
                b = pair_rng.choice(corpus[pair_rng.choice(others)])
                label = 0
            pairs.append({
                "id": f"{prefix}#{len(pairs)}",
                "lemma": lemma,
                "s1": a, "s1_start": 0, "s1_end": len(lemma),
                "s2": b, "s2_start": 0, "s2_end": len(lemma),
                "label": label,
                "provenance": {"src": ["fixture"], "ex": ["", ""]},
            })
        return pairs

    return {
        "train_pairs": pair_up(train_corpus, n_train_pairs, "train", random.Random(seed + 1)),
        "held_pairs": pair_up(held_corpus, n_held_pairs, "held", random.Random(seed + 2)),
        "wsd_support": wsd_support,
        "wsd_targets": wsd_targets,
    }


def write_jsonl(path, records) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
