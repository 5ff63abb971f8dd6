"""Shared dispatch used by both the CLI (in-process) and the HTTP app."""

from typing import List, Optional, Tuple

import numpy as np

from ..config import RunConfig, apply_overrides, config_from_dict
from ..ensembles import ensemble_predict
from ..experiment import (
    anytime_from_checkpoint,
    evaluate_checkpoint,
    interpolate_from_checkpoint,
    model_from_checkpoint,
    run_experiment,
    search_only,
)


def resolve_config(raw: dict, overrides: List[str]) -> RunConfig:
    return config_from_dict(apply_overrides(raw, overrides))


def handle_run(raw: dict, overrides: List[str], out_root: str) -> Tuple[dict, str]:
    cfg = resolve_config(raw, overrides)
    return run_experiment(cfg, out_root)


def handle_search(raw: dict, overrides: List[str], out_root: str) -> Tuple[dict, str]:
    cfg = resolve_config(raw, overrides)
    return search_only(cfg, out_root)


def handle_eval(checkpoint: str, split: str) -> dict:
    return evaluate_checkpoint(checkpoint, split=split)


def handle_anytime(
    checkpoint: str, budget: Optional[int]
) -> Tuple[List[dict], Optional[dict]]:
    return anytime_from_checkpoint(checkpoint, budget=budget)


def handle_interpolate(
    checkpoint: str, member_a: int, member_b: int, steps: int
) -> List[dict]:
    return interpolate_from_checkpoint(checkpoint, member_a, member_b, steps)


def handle_predict(
    checkpoint: str, inputs: List[List[float]], member_ids: Optional[List[int]]
) -> Tuple[List[List[float]], int]:
    model, cfg, _ = model_from_checkpoint(checkpoint)
    x = np.asarray(inputs, dtype=np.float32)
    if x.ndim != 2:
        raise ValueError(f"inputs must be a list of feature rows, got shape {x.shape}")
    probs = ensemble_predict(model, x, member_ids=member_ids)
    return [[float(v) for v in row] for row in probs], int(probs.shape[1])
