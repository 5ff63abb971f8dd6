"""Budgeted weight generation with shared template banks.

Layers draw their weights from small banks of trainable templates mixed by
per-layer coefficients. Where to share is decided by a gradient-similarity
search, then per-layer coefficients are split off once mid-training. The
package also covers ensembling over a shared store, anytime subset schedules,
calibration metrics, and an experiment harness with a service and CLI on top.
"""

from .config import RunConfig, apply_overrides, config_from_dict, load_config
from .experiment import (
    StageError,
    anytime_from_checkpoint,
    evaluate_checkpoint,
    interpolate_from_checkpoint,
    model_from_checkpoint,
    run_experiment,
    search_only,
)

__version__ = "0.1.0"

__all__ = [
    "RunConfig",
    "StageError",
    "anytime_from_checkpoint",
    "apply_overrides",
    "config_from_dict",
    "evaluate_checkpoint",
    "interpolate_from_checkpoint",
    "load_config",
    "model_from_checkpoint",
    "run_experiment",
    "search_only",
    "__version__",
]
