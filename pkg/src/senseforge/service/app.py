"""FastAPI service exposing the pipeline stages over HTTP.

The CLI drives this app either in-process (default) or over the network.
Domain errors surface as 400 responses with {"error": ...} bodies; request
schema violations are mapped to the same shape.
"""

from __future__ import annotations

import os

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..dictionary import (
    entry_from_dict,
    entry_to_dict,
    extract_snippets,
    filter_multisense,
    parse_dictionary,
    restrict_to_lemmas,
)
from ..evaluate import EvalError, EvalReport, eval_wic, eval_wsd, eval_wsi, render_report
from ..expansion import (
    ExpansionCache,
    ExpansionSettings,
    GeneratedSentence,
    HttpChatBackend,
    LemmaMatchPolicy,
    TemplateBackend,
    expand_corpus,
)
from ..forge import (
    ForgeConfig,
    build_wic_pairs,
    build_wsd_dataset,
    cap_examples_per_sense,
    forge_stats,
    import_external_wsd,
    inventory_from_dict,
    inventory_to_dict,
    merge_wic,
    sense_example_from_record,
    sense_example_to_record,
    wic_pair_from_record,
    wic_pair_to_record,
)
from ..resolver import (
    DEFAULT_C_GRID,
    ScorerError,
    ThresholdConfig,
    WsiValidationTarget,
    calibrate_threshold,
    oracle_scorer,
    overlap_scorer,
    predict_wic,
    random_scorer,
    remote_scorer,
    resolution_from_record,
    resolution_to_record,
    resolve_dataset,
)
from ..splits import (
    holdout_validation,
    split_non_oov,
    split_partial_oov,
    split_pure_oov,
)
from ..util import SenseforgeError
from . import schemas as sm


def _policy(model: sm.PolicyModel) -> LemmaMatchPolicy:
    return LemmaMatchPolicy(model.kind, model.min_stem_length, model.case_sensitive)


def _examples(models):
    return [sense_example_from_record(m.model_dump()) for m in models]


def _pairs(models):
    return [wic_pair_from_record(m.model_dump()) for m in models]


def _build_scorer(model: sm.ScorerModel, gold_examples=()):
    if model.kind == "oracle":
        gold = dict(model.gold) if model.gold else {}
        for ex in gold_examples:
            gold.setdefault(ex.id, ex.sense_id)
        return oracle_scorer(gold)
    if model.kind == "random":
        return random_scorer(model.seed)
    if model.kind == "remote":
        if not model.url:
            raise ScorerError("remote scorer needs a url")
        return remote_scorer(model.url, batch_size=model.batch_size)
    return overlap_scorer()


def create_app() -> FastAPI:
    app = FastAPI(title="senseforge", version=__version__)

    @app.exception_handler(SenseforgeError)
    async def domain_error(request: Request, exc: SenseforgeError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def schema_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": "request schema violation", "detail": exc.errors()},
        )

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/v1/dictionary/parse", response_model=sm.ParseResponse)
    def parse(req: sm.ParseRequest):
        if (req.text is None) == (req.entries is None):
            raise SenseforgeError("provide exactly one of 'text' or 'entries'")
        if req.text is not None:
            result = parse_dictionary(req.text, strict=req.strict)
            entries, issues = result.entries, result.issues
        else:
            entries, issues = [entry_from_dict(e.model_dump()) for e in req.entries], []
        if req.multisense_only:
            entries = filter_multisense(entries)
        if req.restrict_lemmas is not None:
            entries = restrict_to_lemmas(entries, req.restrict_lemmas)
        return sm.ParseResponse(
            entries=[sm.EntryModel(**entry_to_dict(e)) for e in entries],
            issues=[sm.IssueModel(line=i.line, message=i.message, lemma=i.lemma) for i in issues],
        )

    @app.post("/v1/expand", response_model=sm.ExpandResponse)
    def expand(req: sm.ExpandRequest):
        entries = [entry_from_dict(e.model_dump()) for e in req.entries]
        snippets = extract_snippets(entries, req.mode)
        s = req.settings
        settings = ExpansionSettings(s.model_id, s.temperature, s.max_tokens,
                                     s.n_generations, s.prompt_template, s.retries)
        if s.backend == "template":
            backend = TemplateBackend(s.prompt_template)
        else:
            backend = HttpChatBackend(s.endpoint, api_key=os.environ.get(s.api_key_env))
        try:
            cache = ExpansionCache(req.cache_path)
            generations = expand_corpus(snippets, settings, backend, cache,
                                        _policy(req.policy), max_workers=s.max_workers)
        except OSError as exc:
            raise SenseforgeError(f"cache path unusable: {exc}") from exc
        out = [
            sm.GenerationModel(
                lemma=g.source_snippet[0], sense=g.source_snippet[1],
                snippet_index=g.source_snippet[2], generation_index=g.generation_index,
                text=g.text, status=g.status,
            )
            for g in generations
        ]
        return sm.ExpandResponse(generations=out, kept=sum(g.status == "kept" for g in out))

    @app.post("/v1/forge/wsd", response_model=sm.ForgeWsdResponse)
    def forge_wsd(req: sm.ForgeWsdRequest):
        gens = [
            GeneratedSentence(g.text, (g.lemma, g.sense, g.snippet_index),
                              g.generation_index, g.status)
            for g in req.generations
        ]
        examples, inventory = build_wsd_dataset(gens, req.inventory_id, _policy(req.policy),
                                                source=req.source)
        if req.cap is not None:
            examples = cap_examples_per_sense(examples, req.cap)
        return sm.ForgeWsdResponse(
            examples=[sm.ExampleModel(**sense_example_to_record(e)) for e in examples],
            inventory=sm.InventoryModel(**inventory_to_dict(inventory)),
        )

    @app.post("/v1/forge/wic", response_model=sm.ForgeWicResponse)
    def forge_wic(req: sm.ForgeWicRequest):
        config = ForgeConfig(req.config.partners_per_anchor, req.config.max_pairs_per_sense,
                             req.config.max_examples_per_sense, req.config.seed)
        pairs = build_wic_pairs(_examples(req.examples), config, dataset_id=req.dataset_id)
        return sm.ForgeWicResponse(
            pairs=[sm.PairModel(**wic_pair_to_record(p)) for p in pairs],
            stats=forge_stats(pairs),
        )

    @app.post("/v1/forge/merge", response_model=sm.MergeResponse)
    def forge_merge(req: sm.MergeRequest):
        merged = merge_wic([(d.id, _pairs(d.pairs)) for d in req.datasets])
        return sm.MergeResponse(pairs=[sm.PairModel(**wic_pair_to_record(p)) for p in merged])

    @app.post("/v1/import/wsd", response_model=sm.ImportResponse)
    def import_wsd(req: sm.ImportRequest):
        result = import_external_wsd(req.records, req.inventory_id, _policy(req.policy))
        return sm.ImportResponse(
            examples=[sm.ExampleModel(**sense_example_to_record(e)) for e in result.examples],
            inventory=sm.InventoryModel(**inventory_to_dict(result.inventory)),
            rejected=[sm.RejectedModel(record=r, reason=why) for r, why in result.rejected],
        )

    @app.post("/v1/split", response_model=sm.ManifestModel)
    def split(req: sm.SplitRequest):
        ops = {"pure-oov": split_pure_oov, "partial-oov": split_partial_oov,
               "non-oov": split_non_oov}
        sskj, elexis = _pairs(req.sskj), _pairs(req.elexis)
        manifest = ops[req.split_type](sskj, elexis, req.seed)
        if req.validation_fraction is not None:
            manifest = holdout_validation(
                manifest, sskj, elexis,
                fraction=req.validation_fraction,
                seed=req.validation_seed if req.validation_seed is not None else req.seed,
                lemma_disjoint=req.lemma_disjoint_validation,
            )
        return sm.ManifestModel(**manifest.to_json_dict())

    @app.post("/v1/resolve", response_model=sm.ResolveResponse)
    def resolve(req: sm.ResolveRequest):
        targets, support = _examples(req.targets), _examples(req.support)
        scorer = _build_scorer(req.scorer, targets + support)
        threshold = None
        if req.mode == "wsi":
            if req.calibration is not None:
                wsi_targets = None
                if req.calibration.wsi_targets:
                    cal_support = _examples(req.calibration.wsi_support or [])
                    by_lemma: dict[str, list] = {}
                    for s in cal_support:
                        by_lemma.setdefault(s.lemma, []).append(s)
                    wsi_targets = [
                        WsiValidationTarget(t, by_lemma.get(t.lemma, []))
                        for t in _examples(req.calibration.wsi_targets)
                        if by_lemma.get(t.lemma)
                    ]
                threshold = calibrate_threshold(
                    scorer, _pairs(req.calibration.validation_pairs),
                    c_grid=req.calibration.c_grid or DEFAULT_C_GRID,
                    wsi_targets=wsi_targets, aggregation=req.aggregation,
                )
            elif req.threshold is not None and req.threshold.validation_mean is not None:
                threshold = ThresholdConfig(req.threshold.multiplier, req.threshold.validation_mean)
            else:
                raise ScorerError("wsi mode needs a calibrated threshold or calibration pairs")
        resolutions, skipped = resolve_dataset(targets, support, scorer, mode=req.mode,
                                               threshold=threshold, aggregation=req.aggregation)
        return sm.ResolveResponse(
            resolutions=[sm.ResolutionModel(**resolution_to_record(r)) for r in resolutions],
            threshold=(sm.ThresholdModel(multiplier=threshold.multiplier,
                                         validation_mean=threshold.validation_mean)
                       if threshold else None),
            skipped=skipped,
        )

    @app.post("/v1/eval", response_model=sm.ReportModel)
    def evaluate(req: sm.EvalRequest):
        kw = dict(split_type=req.split_type, dataset_desc=req.dataset_desc,
                  config_digest=req.config_digest)
        if req.task == "wic":
            if req.wic is None:
                raise EvalError("wic payload missing")
            pairs = _pairs(req.wic.pairs)
            preds = req.wic.predictions
            if preds is None:
                if req.wic.scorer is None:
                    raise EvalError("wic eval needs predictions or a scorer")
                preds = predict_wic(pairs, _build_scorer(req.wic.scorer),
                                    req.wic.decision_threshold)
            report = eval_wic(preds, pairs, **kw)
        elif req.task == "wsd":
            if req.wsd is None:
                raise EvalError("wsd payload missing")
            report = eval_wsd([resolution_from_record(r.model_dump()) for r in req.wsd.resolutions],
                              _examples(req.wsd.gold), _examples(req.wsd.train), **kw)
        else:
            if req.wsi is None:
                raise EvalError("wsi payload missing")
            report = eval_wsi([resolution_from_record(r.model_dump()) for r in req.wsi.resolutions],
                              _examples(req.wsi.gold),
                              inventory_from_dict(req.wsi.inventory.model_dump()), **kw)
        return sm.ReportModel(**report.to_json_dict())

    @app.post("/v1/report", response_model=sm.RenderResponse)
    def report(req: sm.RenderRequest):
        reports = [EvalReport.from_json_dict(r.model_dump()) for r in req.reports]
        table, csv_text = render_report(reports)
        return sm.RenderResponse(table=table, csv=csv_text)

    return app
