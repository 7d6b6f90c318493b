import json
import random

import httpx
import pytest

from senseforge.fixtures import synthetic_sense_corpus
from senseforge.forge import SenseExample, WicPair
from senseforge.resolver import (
    DEFAULT_C_GRID,
    NEW_SENSE,
    RemoteScorer,
    ScoreQuery,
    ScorerBackend,
    ScorerError,
    ScorerProtocolError,
    ThresholdConfig,
    WsiValidationTarget,
    calibrate_threshold,
    oracle_scorer,
    overlap_scorer,
    predict_wic,
    random_scorer,
    resolution_from_record,
    resolution_to_record,
    resolve_dataset,
    resolve_wsd,
    resolve_wsi,
)


def example(ex_id, lemma, sentence, sense):
    return SenseExample(ex_id, lemma, sentence, (sentence.index(lemma), sentence.index(lemma) + len(lemma)),
                        sense, "inv", "corpus")


class StipulatedScorer(ScorerBackend):
    """Scores looked up by the support example id."""

    def __init__(self, by_support_id, default=0.0):
        self.by_support_id = dict(by_support_id)
        self.default = default

    def score_batch(self, queries):
        return [self.by_support_id.get(q.ex2_id, self.default) for q in queries]


class TestResolveWsd:
    def test_stipulated_scores_force_argmax(self):
        target = example("t", "bank", "She went to the bank to deposit money.", "?")
        support = [
            example("fin", "bank", "The bank was closed on Sunday.", "financial"),
            example("riv", "bank", "She sat on the river bank.", "river"),
        ]
        scorer = StipulatedScorer({"fin": 0.9, "riv": 0.2})
        res = resolve_wsd(target, support, scorer)
        assert res.predicted == "financial"
        assert res.score_vector == {"financial": 0.9, "river": 0.2}
        assert res.threshold_used is None

    def test_single_sense_always_predicted(self):
        target = example("t", "okno", "okno je zaprto", "?")
        support = [example("s", "okno", "okno je staro", "okno.1")]
        res = resolve_wsd(target, support, StipulatedScorer({}, default=0.0))
        assert res.predicted == "okno.1"

    def test_tie_breaks_lexicographically(self):
        target = example("t", "x", "x tukaj", "?")
        support = [example("a", "x", "x prvi", "s2"), example("b", "x", "x drugi", "s1")]
        res = resolve_wsd(target, support, StipulatedScorer({"a": 0.7, "b": 0.7}))
        assert res.predicted == "s1"

    def test_mean_vs_max_aggregation(self):
        target = example("t", "x", "x tukaj", "?")
        support = [example("a1", "x", "x ena", "A"), example("a2", "x", "x dva", "A")]
        scorer = StipulatedScorer({"a1": 1.0, "a2": 0.2})
        as_max = resolve_wsd(target, support, scorer, aggregation="max")
        as_mean = resolve_wsd(target, support, scorer, aggregation="mean")
        assert as_max.score_vector["A"] == 1.0
        assert as_mean.score_vector["A"] == pytest.approx(0.6)
        assert as_mean.score_vector["A"] <= as_max.score_vector["A"]

    def test_empty_support_errors(self):
        target = example("t", "x", "x tukaj", "?")
        with pytest.raises(ScorerError):
            resolve_wsd(target, [], StipulatedScorer({}))

    def test_lemma_mismatch_errors(self):
        target = example("t", "x", "x tukaj", "?")
        with pytest.raises(ScorerError):
            resolve_wsd(target, [example("s", "y", "y tam", "s1")], StipulatedScorer({}))

    def test_oracle_is_exact_on_synthetic_fixture(self):
        examples, _ = synthetic_sense_corpus(20, seed=80, senses_range=(2, 4), examples_per_sense=3)
        gold = {e.id: (e.inventory_id, e.sense_id) for e in examples}
        scorer = oracle_scorer(gold)
        by_sense = {}
        for e in examples:
            by_sense.setdefault(e.sense_id, []).append(e)
        targets = [group[0] for group in by_sense.values()]
        support = [e for group in by_sense.values() for e in group[1:]]
        for t in targets:
            sup = [s for s in support if s.lemma == t.lemma]
            assert resolve_wsd(t, sup, scorer).predicted == t.sense_id

    def test_score_vector_covers_support_senses(self):
        examples, _ = synthetic_sense_corpus(5, seed=81)
        target = examples[0]
        sup = [e for e in examples if e.lemma == target.lemma and e.id != target.id]
        res = resolve_wsd(target, sup, random_scorer(1))
        assert set(res.score_vector) == {e.sense_id for e in sup}


class TestResolveWsi:
    def target_and_support(self):
        target = example("t", "x", "x tukaj", "?")
        support = [example("a", "x", "x ena", "A"), example("b", "x", "x dva", "B")]
        return target, support

    def test_all_low_scores_give_new_sense(self):
        target, support = self.target_and_support()
        res = resolve_wsi(target, support, StipulatedScorer({}, default=0.0),
                          ThresholdConfig(1.2, 0.5))
        assert res.predicted == NEW_SENSE
        assert res.threshold_used == pytest.approx(0.6)

    def test_high_score_picks_sense(self):
        target, support = self.target_and_support()
        res = resolve_wsi(target, support, StipulatedScorer({"a": 1.0}),
                          ThresholdConfig(1.2, 0.5))
        assert res.predicted == "A"

    def test_uncalibrated_threshold_errors(self):
        target, support = self.target_and_support()
        with pytest.raises(ScorerError):
            resolve_wsi(target, support, StipulatedScorer({}), ThresholdConfig(1.2, None))

    def test_new_sense_count_monotone_in_multiplier(self):
        rng = random.Random(82)
        examples, _ = synthetic_sense_corpus(10, seed=83)
        by_sense = {}
        for e in examples:
            by_sense.setdefault(e.sense_id, []).append(e)
        targets = [g[0] for g in by_sense.values()]
        support = [e for g in by_sense.values() for e in g[1:]]
        scorer = StipulatedScorer({e.id: rng.random() for e in support})
        counts = []
        for c in DEFAULT_C_GRID:
            threshold = ThresholdConfig(c, 0.5)
            n_new = 0
            for t in targets:
                sup = [s for s in support if s.lemma == t.lemma]
                n_new += resolve_wsi(t, sup, scorer, threshold).predicted == NEW_SENSE
            counts.append(n_new)
        assert counts == sorted(counts)


def balanced_pairs(n, seed):
    examples, _ = synthetic_sense_corpus(max(4, n // 20), seed=seed, examples_per_sense=6)
    from senseforge.forge import ForgeConfig, build_wic_pairs

    pairs = build_wic_pairs(examples, ForgeConfig(seed=seed), dataset_id="d")
    ones = [p for p in pairs if p.label == 1][: n // 2]
    zeros = [p for p in pairs if p.label == 0][: n // 2]
    assert len(ones) == len(zeros) == n // 2
    return ones + zeros


class TestCalibrateThreshold:
    def test_mean_times_multiplier(self):
        pairs = balanced_pairs(40, seed=84)
        scorer = StipulatedScorer({}, default=0.5)
        cfg = calibrate_threshold(scorer, pairs)
        assert cfg.multiplier == 1.2
        assert cfg.validation_mean == pytest.approx(0.5)
        assert cfg.tau == pytest.approx(0.6)

    def test_singleton_grid(self):
        pairs = balanced_pairs(20, seed=85)
        examples, _ = synthetic_sense_corpus(4, seed=86)
        by_sense = {}
        for e in examples:
            by_sense.setdefault(e.sense_id, []).append(e)
        targets = [WsiValidationTarget(g[0], [e for e in examples
                                              if e.lemma == g[0].lemma and e.id != g[0].id])
                   for g in by_sense.values()]
        cfg = calibrate_threshold(StipulatedScorer({}, default=0.5), pairs,
                                  c_grid=[1.2], wsi_targets=targets)
        assert cfg.multiplier == 1.2

    def test_grid_choice_matches_exhaustive_search(self):
        rng = random.Random(87)
        examples, _ = synthetic_sense_corpus(12, seed=88, senses_range=(2, 3), examples_per_sense=3)
        by_lemma = {}
        for e in examples:
            by_lemma.setdefault(e.lemma, []).append(e)
        targets, scores = [], {}
        for lemma, group in sorted(by_lemma.items()):
            senses = sorted({e.sense_id for e in group})
            target = group[0]
            # every other lemma's support omits the target's gold sense -> gold-new case
            if rng.random() < 0.5:
                support = [e for e in group if e.id != target.id and e.sense_id != target.sense_id]
            else:
                support = [e for e in group if e.id != target.id]
            if not support:
                continue
            for s in support:
                scores[s.id] = round(rng.random(), 3)
            targets.append(WsiValidationTarget(target, support))
        pairs = balanced_pairs(30, seed=89)
        scorer = StipulatedScorer(scores, default=0.35)
        cfg = calibrate_threshold(scorer, pairs, wsi_targets=targets)

        mean = 0.35  # every validation-pair query falls through to the default
        best_c, best_acc = None, -1.0
        for c in DEFAULT_C_GRID:
            correct = 0
            for vt in targets:
                vec = {}
                for s in vt.support:
                    vec[s.sense_id] = max(vec.get(s.sense_id, 0.0), scores[s.id])
                top = max(vec.values())
                pred = min(s for s, v in vec.items() if v == top) if top >= c * mean else NEW_SENSE
                known = vt.target.sense_id in {s.sense_id for s in vt.support}
                correct += (pred == vt.target.sense_id) if known else (pred == NEW_SENSE)
            acc = correct / len(targets)
            if acc > best_acc:
                best_c, best_acc = c, acc
        assert cfg.multiplier == best_c

    def test_empty_validation_errors(self):
        with pytest.raises(ScorerError):
            calibrate_threshold(StipulatedScorer({}), [])


class TestMockScorers:
    def test_oracle_same_and_different(self):
        scorer = oracle_scorer({"a": ("i", "s1"), "b": ("i", "s1"), "c": ("i", "s2")})
        q = lambda x, y: ScoreQuery("l", "sa", (0, 1), "sb", (0, 1), x, y)
        assert scorer.score_batch([q("a", "b"), q("a", "c")]) == [1.0, 0.0]

    def test_oracle_unknown_id_errors(self):
        scorer = oracle_scorer({"a": "s1"})
        with pytest.raises(ScorerError):
            scorer.score_batch([ScoreQuery("l", "x", (0, 1), "y", (0, 1), "a", "zz")])

    def test_oracle_batch_order_preserved(self):
        gold = {f"e{i}": f"s{i % 3}" for i in range(30)}
        scorer = oracle_scorer(gold)
        queries = [ScoreQuery("l", "x", (0, 1), "y", (0, 1), f"e{i}", f"e{(i + 3) % 30}")
                   for i in range(30)]
        out = scorer.score_batch(queries)
        assert len(out) == 30
        assert out == [1.0 if gold[q.ex1_id] == gold[q.ex2_id] else 0.0 for q in queries]

    def test_random_scorer_seed_contract(self):
        queries = [ScoreQuery("l", "a", (0, 1), "b", (0, 1)) for _ in range(50)]
        first = random_scorer(123).score_batch(queries)
        second = random_scorer(123).score_batch(queries)
        assert first == second
        assert all(0.0 <= s <= 1.0 for s in first)

    def test_overlap_identical_sentences(self):
        q = ScoreQuery("l", "isti stavek tukaj", (0, 4), "isti stavek tukaj", (0, 4))
        assert overlap_scorer().score_batch([q]) == [1.0]

    def test_overlap_disjoint_sentences(self):
        q = ScoreQuery("l", "eno dva", (0, 3), "tri štiri", (0, 3))
        assert overlap_scorer().score_batch([q]) == [0.0]


class TestRemoteScorer:
    def make(self, handler, **kwargs):
        client = httpx.Client(transport=httpx.MockTransport(handler))
        return RemoteScorer("http://scorer/v1/score", client=client,
                            sleep=lambda s: None, **kwargs)

    def queries(self, n):
        return [ScoreQuery("l", f"a {i}", (0, 1), f"b {i}", (0, 1), f"x{i}", f"y{i}")
                for i in range(n)]

    def test_healthy_endpoint(self):
        def handler(request):
            n = len(json.loads(request.content)["pairs"])
            return httpx.Response(200, json={"scores": [0.5] * n})

        assert self.make(handler).score_batch(self.queries(7)) == [0.5] * 7

    def test_wrong_length_is_protocol_error(self):
        def handler(request):
            return httpx.Response(200, json={"scores": [0.5]})

        with pytest.raises(ScorerProtocolError):
            self.make(handler).score_batch(self.queries(3))

    def test_chunking_preserves_order(self):
        calls = []

        def handler(request):
            pairs = json.loads(request.content)["pairs"]
            calls.append(len(pairs))
            return httpx.Response(200, json={"scores": [float(p["s1"].split()[1]) / 1000
                                                        for p in pairs]})

        scorer = self.make(handler, batch_size=100)
        out = scorer.score_batch(self.queries(250))
        assert calls == [100, 100, 50]
        assert out == [i / 1000 for i in range(250)]

    def test_transient_failure_retried(self):
        state = {"n": 0}

        def handler(request):
            state["n"] += 1
            if state["n"] == 1:
                return httpx.Response(500)
            n = len(json.loads(request.content)["pairs"])
            return httpx.Response(200, json={"scores": [0.25] * n})

        assert self.make(handler, retries=2).score_batch(self.queries(4)) == [0.25] * 4

    def test_persistent_failure_reports_batch(self):
        def handler(request):
            return httpx.Response(503)

        with pytest.raises(ScorerError, match="batch 0"):
            self.make(handler, retries=1).score_batch(self.queries(4))

    def test_score_out_of_range_is_protocol_error(self):
        def handler(request):
            n = len(json.loads(request.content)["pairs"])
            return httpx.Response(200, json={"scores": [1.5] * n})

        with pytest.raises(ScorerProtocolError):
            self.make(handler).score_batch(self.queries(2))


def test_predict_wic_thresholds_scores():
    pairs = balanced_pairs(10, seed=90)
    preds = predict_wic(pairs, StipulatedScorer({}, default=0.7))
    assert set(preds.values()) == {1}
    preds = predict_wic(pairs, StipulatedScorer({}, default=0.2))
    assert set(preds.values()) == {0}


def test_resolve_dataset_skips_unsupported_lemmas():
    examples, _ = synthetic_sense_corpus(3, seed=91)
    lemmas = sorted({e.lemma for e in examples})
    targets = [e for e in examples if e.lemma == lemmas[0]][:1]
    orphan = SenseExample("orphan", "neznanka", "neznanka tukaj", (0, 8), "n.1", "inv", "corpus")
    support = [e for e in examples if e.id != targets[0].id]
    resolutions, skipped = resolve_dataset(targets + [orphan], support,
                                           oracle_scorer({e.id: e.sense_id for e in examples}))
    assert [r.example_id for r in resolutions] == [targets[0].id]
    assert skipped == ["orphan"]


def test_resolution_record_roundtrip():
    res = resolve_wsd(example("t", "x", "x tukaj", "?"),
                      [example("a", "x", "x ena", "A")],
                      StipulatedScorer({"a": 0.4}))
    rec = resolution_to_record(res)
    assert resolution_from_record(rec) == res
    assert json.loads(json.dumps(rec)) == rec
