"""Weight generation: tiling plans, template banks, budget allocation."""

from .types import (
    BudgetError,
    Cluster,
    LayerSpec,
    SharingPlan,
    SuperWeightSlot,
    TilePlacement,
    TilingError,
    TilingPlan,
    diff_plans,
)
from .tiling import assemble_layer, plan_tiling, slice_layer_grad, split_into_chains
from .plan import build_feasible_plan, build_sharing_plan, compatible_for_merge, soften_plan
from .allocate import AllocationResult, allocate_templates
from .compose import compose_superweight, grads_to_templates_and_coeffs
from .store import CoefficientSet, ParameterStore, TemplateBank
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "BudgetError",
    "Cluster",
    "LayerSpec",
    "SharingPlan",
    "SuperWeightSlot",
    "TilePlacement",
    "TilingError",
    "TilingPlan",
    "assemble_layer",
    "diff_plans",
    "plan_tiling",
    "slice_layer_grad",
    "split_into_chains",
    "build_feasible_plan",
    "build_sharing_plan",
    "compatible_for_merge",
    "soften_plan",
    "AllocationResult",
    "allocate_templates",
    "compose_superweight",
    "grads_to_templates_and_coeffs",
    "CoefficientSet",
    "ParameterStore",
    "TemplateBank",
    "load_checkpoint",
    "save_checkpoint",
]
