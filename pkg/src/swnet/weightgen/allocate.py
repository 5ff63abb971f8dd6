"""Template-count allocation under a global trainable-parameter budget.

Accounting: the unshared reserve (biases, heads) is paid first. Each template
grant for a slot costs slot_size + owner_count: the template itself plus one
coefficient entry reserved for every owning layer, so later coefficient
decoupling never breaches the budget. Grants go round-robin in slot-id order,
first one mandatory template per slot, then each cluster spends a share of
the remainder proportional to its demanded weight count, then a global
top-up pass spends the pooled leftovers. The final leftover is smaller than
the cheapest single grant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List

from .types import BudgetError, SharingPlan


@dataclass
class AllocationResult:
    bank_sizes: Dict[int, int]
    budget: int
    reserve: int
    minimum: int  # minimum feasible budget for this plan
    leftover: int
    committed: int  # reserve + templates + reserved coefficient entries
    coeff_reserved: int = 0
    merge_log: List[str] = field(default_factory=list)


def _round_robin(
    slot_ids: List[int], costs: Dict[int, int], bank_sizes: Dict[int, int], share: int
) -> int:
    """Grant templates cyclically while anything still fits; return the rest."""
    while True:
        granted = False
        for sid in slot_ids:
            if costs[sid] <= share:
                bank_sizes[sid] += 1
                share -= costs[sid]
                granted = True
        if not granted:
            return share


def allocate_templates(plan: SharingPlan, budget: int, reserve: int) -> AllocationResult:
    """Decide per-bank template counts for a plan under the total budget."""
    if budget <= 0:
        raise ValueError(f"budget must be positive, got {budget}")
    if reserve < 0:
        raise ValueError(f"reserve must be non-negative, got {reserve}")
    slot_ids = sorted(plan.slots)
    owners = {sid: plan.slot_owners(sid) for sid in slot_ids}
    for sid in slot_ids:
        if not owners[sid]:
            raise ValueError(f"slot {sid} has no owning layers")
    costs = {sid: plan.slots[sid].size + len(owners[sid]) for sid in slot_ids}
    min_cost = sum(costs.values())
    minimum = reserve + min_cost
    remaining = budget - reserve
    if remaining < min_cost:
        raise BudgetError(budget, minimum)

    bank_sizes = {sid: 1 for sid in slot_ids}  # mandatory round: every bank N >= 1
    remaining -= min_cost

    # a cluster's demand is the total weight count its layers need, which the
    # exact tiling makes equal to the sum of placed slot sizes
    cluster_demand: Dict[int, int] = {}
    for cluster in plan.clusters:
        cluster_demand[cluster.cluster_id] = sum(
            plan.slots[p.slot_id].size
            for lid in cluster.layer_ids
            for p in plan.placements[lid]
        )
    total_demand = sum(cluster_demand.values())

    pool = remaining
    if total_demand > 0:
        for cluster in plan.clusters:
            share = (remaining * cluster_demand[cluster.cluster_id]) // total_demand
            pool -= share
            pool += _round_robin(sorted(cluster.slot_ids), costs, bank_sizes, share)
    leftover = _round_robin(slot_ids, costs, bank_sizes, pool)

    committed = reserve + sum(bank_sizes[sid] * costs[sid] for sid in slot_ids)
    return AllocationResult(
        bank_sizes=bank_sizes,
        budget=budget,
        reserve=reserve,
        minimum=minimum,
        leftover=leftover,
        committed=committed,
        coeff_reserved=sum(bank_sizes[sid] * len(owners[sid]) for sid in slot_ids),
    )
