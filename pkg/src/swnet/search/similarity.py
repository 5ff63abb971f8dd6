"""Gradient-direction similarity between layers."""

import numpy as np

from .ledger import GradientLedger

NORM_FLOOR = 1e-12


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; 0.0 when either vector is numerically zero."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ValueError(f"cosine needs equal lengths, got {u.size} and {v.size}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu < NORM_FLOOR or nv < NORM_FLOOR:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def superweight_similarity(ledger: GradientLedger, layer_i: int, layer_j: int) -> float:
    """Cosine of the two layers' accumulated weight gradients on shared slots.

    Blocks are concatenated in ascending slot id so both layers flatten the
    same way; slots only one layer touches are excluded by construction.
    """
    plan = ledger.plan
    shared = plan.shared_slots(layer_i, layer_j)
    if not shared:
        raise ValueError(f"layers {layer_i} and {layer_j} share no slot")
    u = np.concatenate([ledger.theta_sums[(layer_i, s)].ravel() for s in shared])
    v = np.concatenate([ledger.theta_sums[(layer_j, s)].ravel() for s in shared])
    return cosine(u, v)


def coefficient_similarity(
    ledger: GradientLedger, slot_id: int, layer_i: int, layer_j: int
) -> float:
    """Cosine of per-layer coefficient-gradient contributions on one slot."""
    plan = ledger.plan
    ci = plan.coeff_assign.get((layer_i, slot_id))
    cj = plan.coeff_assign.get((layer_j, slot_id))
    if ci is None or cj is None:
        raise ValueError(
            f"layers {layer_i} and {layer_j} must both place slot {slot_id}"
        )
    if ci != cj:
        raise ValueError(
            f"layers {layer_i} and {layer_j} do not share a coefficient set on slot {slot_id}"
        )
    return cosine(ledger.alpha_sums[(layer_i, slot_id)], ledger.alpha_sums[(layer_j, slot_id)])
