"""Turn any WiC scorer into a WSD classifier and a WSI new-sense detector.

A target sentence is paired with every sense-labeled support sentence of the
same lemma; pair scores are aggregated per sense (max by default) and the
best sense wins. For WSI, when every aggregated score falls below the
calibrated threshold tau = multiplier * validation mean, NEW_SENSE is
predicted instead.
"""

from __future__ import annotations

import logging
import random
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import httpx

from .forge import SenseExample, WicPair
from .util import SenseforgeError

logger = logging.getLogger(__name__)

NEW_SENSE = "NEW_SENSE"
AGGREGATIONS = ("max", "mean")
DEFAULT_C_GRID = tuple(round(1.0 + 0.1 * i, 1) for i in range(11))

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


class ScorerError(SenseforgeError):
    pass


class ScorerProtocolError(ScorerError):
    pass


@dataclass(frozen=True)
class ScoreQuery:
    """A label-free WiC pair sent to a scorer; example ids ride along for oracles."""

    lemma: str
    s1: str
    s1_span: tuple[int, int]
    s2: str
    s2_span: tuple[int, int]
    ex1_id: Optional[str] = None
    ex2_id: Optional[str] = None


class ScorerBackend:
    """Order-preserving batch scorer; every score must lie in [0, 1]."""

    def score_batch(self, queries: Sequence[ScoreQuery]) -> list[float]:
        raise NotImplementedError


class OracleScorer(ScorerBackend):
    """Test double: 1.0 when the gold senses of both examples match, else 0.0."""

    def __init__(self, gold: Mapping[str, object]):
        self._gold = dict(gold)

    def score_batch(self, queries):
        out = []
        for q in queries:
            if q.ex1_id not in self._gold or q.ex2_id not in self._gold:
                missing = q.ex1_id if q.ex1_id not in self._gold else q.ex2_id
                raise ScorerError(f"oracle scorer has no gold sense for example {missing!r}")
            out.append(1.0 if self._gold[q.ex1_id] == self._gold[q.ex2_id] else 0.0)
        return out


class RandomScorer(ScorerBackend):
    """Seeded uniform scores; the sequence is stable across runs for a fixed seed."""

    def __init__(self, seed: int):
        self._rng = random.Random(seed)

    def score_batch(self, queries):
        return [self._rng.random() for _ in queries]


class OverlapScorer(ScorerBackend):
    """Jaccard overlap of the two sentences' case-folded token sets."""

    def score_batch(self, queries):
        out = []
        for q in queries:
            a = {t.casefold() for t in _TOKEN_RE.findall(q.s1)}
            b = {t.casefold() for t in _TOKEN_RE.findall(q.s2)}
            union = a | b
            out.append(len(a & b) / len(union) if union else 1.0)
        return out


class RemoteScorer(ScorerBackend):
    """Client for the HTTP scorer wire protocol.

    POSTs {"pairs": [{"s1", "s1_start", "s1_end", "s2", "s2_start",
    "s2_end", "lemma"}]} and expects {"scores": [float]} of equal length.
    Queries are chunked into batches; transient failures are retried with
    exponential backoff before the batch is reported failed.
    """

    def __init__(
        self,
        url: str,
        *,
        batch_size: int = 100,
        timeout: float = 120.0,
        retries: int = 3,
        backoff: float = 0.5,
        client: Optional[httpx.Client] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.url = url
        self.batch_size = batch_size
        self.retries = retries
        self.backoff = backoff
        self._client = client or httpx.Client(timeout=timeout)
        self._sleep = sleep

    def _post_batch(self, batch: Sequence[ScoreQuery], batch_index: int) -> list[float]:
        payload = {
            "pairs": [
                {
                    "s1": q.s1, "s1_start": q.s1_span[0], "s1_end": q.s1_span[1],
                    "s2": q.s2, "s2_start": q.s2_span[0], "s2_end": q.s2_span[1],
                    "lemma": q.lemma,
                }
                for q in batch
            ]
        }
        last: Optional[Exception] = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._client.post(self.url, json=payload)
                resp.raise_for_status()
                scores = resp.json().get("scores")
                if not isinstance(scores, list) or len(scores) != len(batch):
                    raise ScorerProtocolError(
                        f"batch {batch_index}: expected {len(batch)} scores, "
                        f"got {len(scores) if isinstance(scores, list) else type(scores).__name__}"
                    )
                scores = [float(s) for s in scores]
                if any(not (0.0 <= s <= 1.0) for s in scores):
                    raise ScorerProtocolError(f"batch {batch_index}: score outside [0, 1]")
                return scores
            except ScorerProtocolError:
                raise
            except (httpx.HTTPError, ValueError, TypeError) as exc:
                last = exc
                if attempt < self.retries:
                    self._sleep(self.backoff * (2 ** attempt))
        ids = [q.ex1_id or "?" for q in batch]
        raise ScorerError(f"batch {batch_index} failed after retries ({ids[:5]}...): {last}")

    def score_batch(self, queries):
        out: list[float] = []
        for bi in range(0, len(queries), self.batch_size):
            out.extend(self._post_batch(queries[bi : bi + self.batch_size], bi // self.batch_size))
        return out


def oracle_scorer(gold: Mapping[str, object]) -> OracleScorer:
    return OracleScorer(gold)


def random_scorer(seed: int) -> RandomScorer:
    return RandomScorer(seed)


def overlap_scorer() -> OverlapScorer:
    return OverlapScorer()


def remote_scorer(url: str, **kwargs) -> RemoteScorer:
    return RemoteScorer(url, **kwargs)


@dataclass
class ThresholdConfig:
    """NEW_SENSE cutoff tau = multiplier * mean validation score."""

    multiplier: float = 1.2
    validation_mean: Optional[float] = None

    def __post_init__(self):
        if self.multiplier <= 0:
            raise ValueError("multiplier must be positive")

    @property
    def tau(self) -> float:
        if self.validation_mean is None:
            raise ScorerError("threshold is not calibrated (validation mean unset)")
        return self.multiplier * self.validation_mean


@dataclass
class Resolution:
    example_id: str
    score_vector: dict[str, float]
    predicted: str
    threshold_used: Optional[float] = None
    aggregation: str = "max"


def _aggregate(values: Sequence[float], how: str) -> float:
    return max(values) if how == "max" else sum(values) / len(values)


def _score_vector(
    target: SenseExample,
    support: Sequence[SenseExample],
    scorer: ScorerBackend,
    aggregation: str,
) -> dict[str, float]:
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation: {aggregation!r}")
    support = [s for s in support if s.id != target.id]
    if not support:
        raise ScorerError(f"no support examples for target {target.id!r}")
    bad = [s.id for s in support if s.lemma != target.lemma]
    if bad:
        raise ScorerError(f"support lemma mismatch for {target.id!r}: {bad[:3]}")
    queries = [
        ScoreQuery(target.lemma, target.sentence, target.target_span,
                   s.sentence, s.target_span, target.id, s.id)
        for s in support
    ]
    scores = scorer.score_batch(queries)
    if len(scores) != len(queries):
        raise ScorerProtocolError("scorer returned a wrong-length score list")
    per_sense: dict[str, list[float]] = {}
    for s, score in zip(support, scores):
        per_sense.setdefault(s.sense_id, []).append(score)
    return {sense: _aggregate(vals, aggregation) for sense, vals in per_sense.items()}


def _argmax_sense(vector: Mapping[str, float]) -> str:
    best = max(vector.values())
    return min(s for s, v in vector.items() if v == best)


def resolve_wsd(
    target: SenseExample,
    support: Sequence[SenseExample],
    scorer: ScorerBackend,
    aggregation: str = "max",
) -> Resolution:
    """Pick the support sense with the highest aggregated WiC score.

    Ties resolve to the lexicographically smallest sense id.
    """
    vector = _score_vector(target, support, scorer, aggregation)
    return Resolution(target.id, vector, _argmax_sense(vector), None, aggregation)


def resolve_wsi(
    target: SenseExample,
    support: Sequence[SenseExample],
    scorer: ScorerBackend,
    threshold: ThresholdConfig,
    aggregation: str = "max",
) -> Resolution:
    """As resolve_wsd, but predict NEW_SENSE when every score is below tau."""
    tau = threshold.tau  # raises when uncalibrated
    vector = _score_vector(target, support, scorer, aggregation)
    predicted = _argmax_sense(vector) if max(vector.values()) >= tau else NEW_SENSE
    return Resolution(target.id, vector, predicted, tau, aggregation)


@dataclass
class WsiValidationTarget:
    """A held-out example with gold sense, used to pick the threshold multiplier."""

    target: SenseExample
    support: list[SenseExample] = field(default_factory=list)


def calibrate_threshold(
    scorer: ScorerBackend,
    validation_pairs: Sequence[WicPair],
    c_grid: Sequence[float] = DEFAULT_C_GRID,
    wsi_targets: Optional[Sequence[WsiValidationTarget]] = None,
    aggregation: str = "max",
) -> ThresholdConfig:
    """Set the validation mean and choose the best multiplier from the grid.

    The mean is the arithmetic mean of scorer outputs over all validation
    pairs. When WSI validation targets are provided, the multiplier that
    maximizes WSI accuracy is chosen (ties go to the smallest multiplier);
    otherwise the 1.2 default is kept.
    """
    if not validation_pairs:
        raise ScorerError("validation pairs must be non-empty")
    queries = [
        ScoreQuery(p.lemma, p.s1, p.s1_span, p.s2, p.s2_span,
                   (p.provenance.get("ex") or [None, None])[0],
                   (p.provenance.get("ex") or [None, None])[1])
        for p in validation_pairs
    ]
    scores = scorer.score_batch(queries)
    if len(scores) != len(queries):
        raise ScorerProtocolError("scorer returned a wrong-length score list")
    mean = sum(scores) / len(scores)

    if not wsi_targets:
        return ThresholdConfig(1.2, mean)

    prepared = []
    for vt in wsi_targets:
        vector = _score_vector(vt.target, vt.support, scorer, aggregation)
        known = vt.target.sense_id in {s.sense_id for s in vt.support}
        prepared.append((vector, vt.target.sense_id, known))

    best_c, best_acc = None, -1.0
    for c in c_grid:
        tau = c * mean
        correct = 0
        for vector, gold, known in prepared:
            predicted = _argmax_sense(vector) if max(vector.values()) >= tau else NEW_SENSE
            if known:
                correct += int(predicted == gold)
            else:
                correct += int(predicted == NEW_SENSE)
        acc = correct / len(prepared)
        if acc > best_acc:
            best_c, best_acc = c, acc
    return ThresholdConfig(best_c, mean)


def predict_wic(
    pairs: Sequence[WicPair], scorer: ScorerBackend, threshold: float = 0.5
) -> dict[str, int]:
    """Binary WiC predictions by thresholding raw pair scores."""
    queries = [
        ScoreQuery(p.lemma, p.s1, p.s1_span, p.s2, p.s2_span) for p in pairs
    ]
    scores = scorer.score_batch(queries)
    if len(scores) != len(queries):
        raise ScorerProtocolError("scorer returned a wrong-length score list")
    return {p.id: int(s >= threshold) for p, s in zip(pairs, scores)}


def resolve_dataset(
    targets: Sequence[SenseExample],
    support: Sequence[SenseExample],
    scorer: ScorerBackend,
    *,
    mode: str = "wsd",
    threshold: Optional[ThresholdConfig] = None,
    aggregation: str = "max",
) -> tuple[list[Resolution], list[str]]:
    """Resolve every target against same-lemma support examples.

    Targets without any same-lemma support are skipped and reported, which is
    what makes Pure-OOV WSD undefined rather than an error.
    """
    if mode not in ("wsd", "wsi"):
        raise ValueError(f"unknown mode: {mode!r}")
    if mode == "wsi" and threshold is None:
        raise ScorerError("wsi mode requires a calibrated threshold")
    by_lemma: dict[str, list[SenseExample]] = {}
    for s in support:
        by_lemma.setdefault(s.lemma, []).append(s)

    resolutions: list[Resolution] = []
    skipped: list[str] = []
    for t in targets:
        sup = [s for s in by_lemma.get(t.lemma, []) if s.id != t.id]
        if not sup:
            logger.info("target %r has no same-lemma support; skipped", t.id)
            skipped.append(t.id)
            continue
        if mode == "wsd":
            resolutions.append(resolve_wsd(t, sup, scorer, aggregation))
        else:
            resolutions.append(resolve_wsi(t, sup, scorer, threshold, aggregation))
    return resolutions, skipped


def resolution_to_record(r: Resolution) -> dict:
    return {
        "id": r.example_id,
        "predicted": r.predicted,
        "scores": {k: r.score_vector[k] for k in sorted(r.score_vector)},
        "threshold": r.threshold_used,
        "aggregation": r.aggregation,
    }


def resolution_from_record(rec: Mapping) -> Resolution:
    return Resolution(
        example_id=rec["id"],
        score_vector=dict(rec["scores"]),
        predicted=rec["predicted"],
        threshold_used=rec.get("threshold"),
        aggregation=rec.get("aggregation", "max"),
    )
