"""FastAPI application wrapping the experiment and inference handlers."""

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import Mode
from ..experiment import StageError
from ..weightgen.types import BudgetError, TilingError
from . import handlers
from .schemas import (
    AnytimeRequest,
    AnytimeResponse,
    EvalRequest,
    EvalResponse,
    HealthResponse,
    InterpolateRequest,
    InterpolateResponse,
    PredictRequest,
    PredictResponse,
    RunRequest,
    RunResponse,
    SearchResponse,
)

_CLIENT_ERRORS = (
    ValueError,
    KeyError,
    FileNotFoundError,
    BudgetError,
    TilingError,
    StageError,
)


def _to_http(err: Exception) -> HTTPException:
    # StageError messages already carry the stage prefix.
    return HTTPException(status_code=422, detail=str(err))


def create_app() -> FastAPI:
    app = FastAPI(title="swnet", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        modes = list(Mode.__args__)
        return HealthResponse(status="ok", version=__version__, modes=modes)

    @app.post("/run", response_model=RunResponse)
    def run(req: RunRequest) -> RunResponse:
        try:
            report, run_dir = handlers.handle_run(
                req.config, req.overrides, req.out_root
            )
        except _CLIENT_ERRORS as err:
            raise _to_http(err)
        return RunResponse(report=report, run_dir=run_dir)

    @app.post("/search-only", response_model=SearchResponse)
    def search(req: RunRequest) -> SearchResponse:
        try:
            summary, run_dir = handlers.handle_search(
                req.config, req.overrides, req.out_root
            )
        except _CLIENT_ERRORS as err:
            raise _to_http(err)
        return SearchResponse(summary=summary, run_dir=run_dir)

    @app.post("/eval", response_model=EvalResponse)
    def evaluate(req: EvalRequest) -> EvalResponse:
        try:
            result = handlers.handle_eval(req.checkpoint, req.split)
        except _CLIENT_ERRORS as err:
            raise _to_http(err)
        return EvalResponse(result=result)

    @app.post("/anytime", response_model=AnytimeResponse)
    def anytime(req: AnytimeRequest) -> AnytimeResponse:
        try:
            entries, selected = handlers.handle_anytime(req.checkpoint, req.budget)
        except _CLIENT_ERRORS as err:
            raise _to_http(err)
        return AnytimeResponse(entries=entries, selected=selected)

    @app.post("/interpolate", response_model=InterpolateResponse)
    def interpolate(req: InterpolateRequest) -> InterpolateResponse:
        try:
            rows = handlers.handle_interpolate(
                req.checkpoint, req.member_a, req.member_b, req.steps
            )
        except _CLIENT_ERRORS as err:
            raise _to_http(err)
        return InterpolateResponse(rows=rows)

    @app.post("/predict", response_model=PredictResponse)
    def predict(req: PredictRequest) -> PredictResponse:
        try:
            probs, classes = handlers.handle_predict(
                req.checkpoint, req.inputs, req.member_ids
            )
        except _CLIENT_ERRORS as err:
            raise _to_http(err)
        return PredictResponse(probs=probs, classes=classes)

    return app
