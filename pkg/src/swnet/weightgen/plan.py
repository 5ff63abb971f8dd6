"""Sharing-plan assembly: from layer groups to clusters, slots, coefficients.

A group is an intended cluster. Groups are pre-split by kernel shape, then
into monotone chains that plan_tiling accepts. When the budget cannot cover a
grouping (each cluster must afford at least one template per slot), the two
compatible clusters with the smallest combined weight demand are merged until
allocation fits.
"""

from __future__ import annotations

from typing import Dict, Iterable, List, Sequence, Tuple

from .allocate import AllocationResult, allocate_templates
from .tiling import plan_tiling, split_into_chains
from .types import BudgetError, Cluster, LayerSpec, SharingPlan


def _split_group(group: Sequence[LayerSpec]) -> List[List[LayerSpec]]:
    """Pre-split one group by kernel shape, then into monotone chains."""
    by_kernel: Dict[tuple, List[LayerSpec]] = {}
    for layer in group:
        by_kernel.setdefault(layer.kernel, []).append(layer)
    clusters: List[List[LayerSpec]] = []
    for kernel in sorted(by_kernel):
        clusters.extend(split_into_chains(by_kernel[kernel]))
    return clusters


def build_sharing_plan(groups: Sequence[Sequence[LayerSpec]]) -> SharingPlan:
    """Build a hard-sharing plan: one coefficient set per slot."""
    ordered_groups = sorted(
        (list(g) for g in groups if g), key=lambda g: min(l.layer_id for l in g)
    )
    seen: set = set()
    for g in ordered_groups:
        for l in g:
            if l.layer_id in seen:
                raise ValueError(f"layer {l.layer_id} appears in more than one group")
            seen.add(l.layer_id)

    clusters: List[Cluster] = []
    slots = {}
    placements = {}
    coeff_assign = {}
    coeff_owners: Dict[int, List[int]] = {}
    coeff_slot: Dict[int, int] = {}
    next_slot = 0
    for group in ordered_groups:
        for chain in _split_group(group):
            tiling = plan_tiling(chain, slot_id_start=next_slot)
            next_slot += len(tiling.slots)
            for s in tiling.slots:
                slots[s.slot_id] = s
            placements.update(tiling.placements)
            clusters.append(
                Cluster(
                    cluster_id=len(clusters),
                    layer_ids=sorted(l.layer_id for l in chain),
                    slot_ids=[s.slot_id for s in tiling.slots],
                )
            )
    # one coefficient set per slot, numbered by slot id
    for sid in sorted(slots):
        owners = sorted(
            lid for lid, places in placements.items() if any(p.slot_id == sid for p in places)
        )
        cid = sid
        coeff_slot[cid] = sid
        coeff_owners[cid] = owners
        for lid in owners:
            coeff_assign[(lid, sid)] = cid
    plan = SharingPlan(
        clusters=clusters,
        slots=slots,
        placements=placements,
        coeff_assign=coeff_assign,
        coeff_owners=coeff_owners,
        coeff_slot=coeff_slot,
    )
    plan.validate()
    return plan


def compatible_for_merge(a: Sequence[LayerSpec], b: Sequence[LayerSpec]) -> bool:
    """True when the union of two clusters still forms one monotone chain."""
    layers = list(a) + list(b)
    if len({l.kernel for l in layers}) != 1:
        return False
    return len(split_into_chains(layers)) == 1


def build_feasible_plan(
    groups: Sequence[Sequence[LayerSpec]],
    budget: int,
    reserve: int,
    soft: bool = False,
) -> Tuple[SharingPlan, AllocationResult, List[str]]:
    """Build a plan and allocate templates, merging clusters until B fits.

    Returns the plan (bank_sizes filled in), the allocation, and a log of any
    feasibility merges performed. Raises BudgetError if even the fully merged
    grouping cannot fit.
    """
    merge_log: List[str] = []
    current: List[List[LayerSpec]] = [list(g) for g in groups if g]
    while True:
        plan = build_sharing_plan(current)
        if soft:
            _soften(plan)
        try:
            alloc = allocate_templates(plan, budget=budget, reserve=reserve)
            plan.bank_sizes = dict(alloc.bank_sizes)
            return plan, alloc, merge_log
        except BudgetError as err:
            # merge the two tiling-compatible clusters with the smallest
            # combined demand; operate on the realized clusters, not the
            # requested groups, so kernel pre-splits stay intact
            realized: List[List[LayerSpec]] = []
            by_id = {l.layer_id: l for g in current for l in g}
            for cluster in plan.clusters:
                realized.append([by_id[lid] for lid in cluster.layer_ids])
            best = None
            for i in range(len(realized)):
                for j in range(i + 1, len(realized)):
                    if not compatible_for_merge(realized[i], realized[j]):
                        continue
                    demand = sum(l.param_count for l in realized[i]) + sum(
                        l.param_count for l in realized[j]
                    )
                    key = (demand, i, j)
                    if best is None or key < best:
                        best = key
            if best is None:
                raise BudgetError(budget, err.minimum, "no compatible clusters left to merge")
            _, i, j = best
            merged = realized[i] + realized[j]
            merge_log.append(
                "feasibility merge: clusters "
                f"{sorted(l.layer_id for l in realized[i])} + "
                f"{sorted(l.layer_id for l in realized[j])}"
            )
            current = [c for k, c in enumerate(realized) if k not in (i, j)] + [merged]


def _soften(plan: SharingPlan) -> None:
    """Give every (layer, slot) pair its own coefficient set, in place."""
    plan.coeff_assign = {}
    plan.coeff_owners = {}
    plan.coeff_slot = {}
    next_cid = 0
    for sid in sorted(plan.slots):
        for lid in plan.slot_owners(sid):
            plan.coeff_assign[(lid, sid)] = next_cid
            plan.coeff_owners[next_cid] = [lid]
            plan.coeff_slot[next_cid] = sid
            next_cid += 1
    plan.validate()


def soften_plan(plan: SharingPlan) -> None:
    _soften(plan)
