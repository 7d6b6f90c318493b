"""HTTP scoring service.

POST /v1/score takes {"pairs": [{"s1", "s1_start", "s1_end", "s2",
"s2_start", "s2_end", "lemma"}]} and returns {"scores": [float]} with one
score per pair, in order. Malformed requests get 400 with an error body;
batches over the documented limit get 413. Inference runs with dropout off
and no gradient state, so identical inputs produce identical scores.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .data import MarkingError
from .train import load_artifact, score_pairs

MAX_BATCH = 1024


class WirePair(BaseModel):
    s1: str
    s1_start: int
    s1_end: int
    s2: str
    s2_start: int
    s2_end: int
    lemma: str = ""


class ScoreRequest(BaseModel):
    pairs: list[WirePair] = Field(default_factory=list)


class ScoreResponse(BaseModel):
    scores: list[float]


def create_app(model_dir) -> FastAPI:
    model, vocab, meta = load_artifact(model_dir)
    app = FastAPI(title="wicscorer", version="0.1.0")

    @app.exception_handler(RequestValidationError)
    async def bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"error": "request schema violation", "detail": exc.errors()})

    @app.exception_handler(MarkingError)
    async def bad_span(request: Request, exc: MarkingError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "model": meta["model_id"]}

    @app.post("/v1/score", response_model=ScoreResponse)
    def score(req: ScoreRequest):
        if len(req.pairs) > MAX_BATCH:
            return JSONResponse(
                status_code=413,
                content={"error": f"batch too large: {len(req.pairs)} > {MAX_BATCH}",
                         "max_batch": MAX_BATCH},
            )
        records = [p.model_dump() for p in req.pairs]
        scores = score_pairs(model, vocab, records, max_len=meta["max_len"])
        return ScoreResponse(scores=scores)

    return app
