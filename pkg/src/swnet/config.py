"""Run configuration: validated models, YAML loading, dotted overrides."""

import hashlib
import json
from typing import Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

Mode = Literal[
    "swn",
    "single_cluster",
    "random_cluster",
    "depth_bin",
    "coeff_cluster",
    "no_refine",
    "no_grad_sim",
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DatasetConfig(_Strict):
    kind: Literal["spirals", "gaussians", "file"] = "spirals"
    n: int = Field(default=2000, ge=8)
    classes: int = Field(default=3, ge=2)
    noise: float = Field(default=0.15, ge=0.0)
    input_dim: int = Field(default=2, ge=2)
    separation: float = Field(default=4.0, gt=0.0)
    path: Optional[str] = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "file" and self.path is None:
            raise ValueError("file datasets need dataset.path")
        if self.kind == "spirals" and self.input_dim != 2:
            raise ValueError("spirals are 2-d; set dataset.input_dim to 2")
        return self


class SplitConfig(_Strict):
    train: float = Field(default=0.7, gt=0.0)
    val: float = Field(default=0.15, gt=0.0)
    test: float = Field(default=0.15, gt=0.0)

    @model_validator(mode="after")
    def _sums_to_one(self):
        total = self.train + self.val + self.test
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {total}")
        return self

    def as_dict(self) -> Dict[str, float]:
        return {"train": self.train, "val": self.val, "test": self.test}


class EnsembleConfig(_Strict):
    members: int = Field(default=4, ge=1)
    width: int = Field(default=32, ge=2)
    depth: int = Field(default=3, ge=1)  # generated layers per member


class SearchConfig(_Strict):
    tau: float = 0.1
    warmup_epochs: int = Field(default=1, ge=1)
    random_groups: int = Field(default=2, ge=1)
    depth_bins: int = Field(default=2, ge=1)
    coeff_clusters: int = Field(default=2, ge=1)


class RefineConfig(_Strict):
    beta: float = 0.9
    epoch: int = Field(default=10, ge=1)


class TrainConfig(_Strict):
    epochs: int = Field(default=12, ge=1)
    batch_size: int = Field(default=64, ge=1)
    lr: float = Field(default=0.05, gt=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    weight_decay: float = Field(default=5e-4, ge=0.0)
    lr_decay_factor: float = Field(default=0.2, gt=0.0, le=1.0)
    lr_decay_epochs: List[int] = Field(default_factory=list)


class EvalConfig(_Strict):
    ece_bins: int = Field(default=15, ge=1)
    anytime_budget: Optional[int] = Field(default=None, ge=0)
    interpolate_steps: int = Field(default=5, ge=2)


class RunConfig(_Strict):
    mode: Mode = "swn"
    seed: int = 0
    budget_fraction: float = Field(default=0.1, gt=0.0, le=1.0)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    splits: SplitConfig = Field(default_factory=SplitConfig)
    ensemble: EnsembleConfig = Field(default_factory=EnsembleConfig)
    search: SearchConfig = Field(default_factory=SearchConfig)
    refine: RefineConfig = Field(default_factory=RefineConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    @model_validator(mode="after")
    def _refine_before_end(self):
        if self.refine.epoch >= self.train.epochs:
            raise ValueError(
                f"refine.epoch ({self.refine.epoch}) must come before the last "
                f"training epoch ({self.train.epochs})"
            )
        return self

    def resolved(self) -> dict:
        return self.model_dump(mode="json")

    def config_hash(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:10]


def _format_validation_error(err: ValidationError) -> str:
    lines = []
    for item in err.errors():
        where = ".".join(str(p) for p in item["loc"]) or "<root>"
        lines.append(f"{where}: {item['msg']}")
    return "; ".join(lines)


def config_from_dict(raw: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as err:
        raise ValueError(f"invalid config: {_format_validation_error(err)}") from err


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path} must hold a mapping, got {type(raw).__name__}")
    return config_from_dict(raw)


def apply_overrides(raw: dict, overrides: List[str]) -> dict:
    """Apply key=value overrides with dotted paths; values parse as YAML."""
    out = json.loads(json.dumps(raw))  # deep copy of plain data
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} must look like key.path=value")
        key, _, value = item.partition("=")
        parts = key.strip().split(".")
        node = out
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValueError(f"override {key!r} descends into a non-mapping")
        node[parts[-1]] = yaml.safe_load(value)
    return out
