"""Request and response bodies for the HTTP endpoints."""

from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RunRequest(_Strict):
    config: dict = Field(default_factory=dict)
    overrides: List[str] = Field(default_factory=list)
    out_root: str = "runs"


class RunResponse(_Strict):
    report: dict
    run_dir: str


class SearchResponse(_Strict):
    summary: dict
    run_dir: str


class EvalRequest(_Strict):
    checkpoint: str
    split: str = "test"


class EvalResponse(_Strict):
    result: dict


class AnytimeRequest(_Strict):
    checkpoint: str
    budget: Optional[int] = None


class AnytimeResponse(_Strict):
    entries: List[dict]
    selected: Optional[dict] = None


class InterpolateRequest(_Strict):
    checkpoint: str
    member_a: int = 0
    member_b: int = 1
    steps: int = 5


class InterpolateResponse(_Strict):
    rows: List[dict]


class PredictRequest(_Strict):
    checkpoint: str
    inputs: List[List[float]]
    member_ids: Optional[List[int]] = None


class PredictResponse(_Strict):
    probs: List[List[float]]
    classes: int


class HealthResponse(_Strict):
    status: str
    version: str
    modes: List[str]


class ErrorBody(_Strict):
    detail: str
    stage: Optional[str] = None
