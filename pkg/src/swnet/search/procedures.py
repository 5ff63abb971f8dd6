"""Search-and-refine steps built on the ledger and the grouping queue."""

from typing import Dict, List, Sequence, Tuple

from ..weightgen.store import ParameterStore
from ..weightgen.types import LayerSpec, SharingPlan
from .grouping import group_by_queue
from .ledger import GradientLedger
from .similarity import coefficient_similarity, superweight_similarity

Pair = Tuple[int, int]


def candidate_pairs(plan: SharingPlan) -> List[Pair]:
    """Ordered pairs of layer ids that share at least one slot."""
    ids = plan.layer_ids()
    out = []
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            if plan.shared_slots(ids[a], ids[b]):
                out.append((ids[a], ids[b]))
    return out


def similarity_table(ledger: GradientLedger) -> Dict[Pair, float]:
    return {
        (i, j): superweight_similarity(ledger, i, j)
        for i, j in candidate_pairs(ledger.plan)
    }


def propose_groups(
    layers: Sequence[LayerSpec], psis: Dict[Pair, float], tau: float
) -> List[List[LayerSpec]]:
    """Turn pairwise scores into layer groups at threshold tau."""
    by_id = {l.layer_id: l for l in layers}
    id_groups = group_by_queue(psis, tau, items=by_id.keys())
    return [[by_id[i] for i in g] for g in id_groups]


def refine_coefficients(
    store: ParameterStore, ledger: GradientLedger, beta: float
) -> List[str]:
    """Split multi-owner coefficient sets whose owners pull templates apart.

    Owners of one set are regrouped at threshold beta using per-layer
    coefficient-gradient similarity on that slot. Splits copy coefficient
    values, so composed weights are unchanged at the moment of the split.
    The copies were prepaid at allocation time, so the commitment total is
    invariant.
    """
    plan = store.plan
    committed_before = store.committed_trainable()
    log: List[str] = []
    snapshot = [(plan.coeff_slot[cid], cid) for cid in sorted(plan.coeff_slot)]
    snapshot.sort()
    for sid, cid in snapshot:
        owners = plan.coeff_owners[cid]
        if len(owners) < 2:
            continue
        scores = {}
        for a in range(len(owners)):
            for b in range(a + 1, len(owners)):
                scores[(owners[a], owners[b])] = coefficient_similarity(
                    ledger, sid, owners[a], owners[b]
                )
        groups = group_by_queue(scores, beta, items=owners)
        if len(groups) == 1:
            continue
        new_ids = store.split_coefficients(cid, groups)
        parts = ", ".join(
            f"set {nid} <- layers {g}" for nid, g in zip(new_ids, groups)
        )
        log.append(f"slot {sid}: split set {cid} into {parts}")
    if store.committed_trainable() != committed_before:
        raise RuntimeError("refinement changed the commitment total")
    return log
