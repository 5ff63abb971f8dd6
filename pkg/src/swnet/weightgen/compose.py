"""SuperWeight composition and its analytic chain rule.

A composed SuperWeight is sum_i alpha_i * T_i over one bank's templates.
Gradients flowing into a composed block chain back linearly:
d/d alpha_i = <dL/dtheta, T_i>, d/d T_i = alpha_i * dL/dtheta, with the
per-layer blocks summed over every layer that shares the coefficient set.
The per-layer (pre-sum) coefficient contributions are returned as well; the
gradient ledger aggregates them for the similarity search.
"""

from __future__ import annotations

from typing import Dict, Tuple

import numpy as np

from ..numerics.tensor import GradMap
from .types import SharingPlan


def compose_superweight(templates, alpha) -> np.ndarray:
    """Linear combination sum_i alpha_i * templates_i.

    templates: (N, *slot_shape) array or a sequence of slot-shaped arrays.
    """
    stack = np.asarray(templates)
    alpha = np.asarray(alpha)
    if alpha.ndim != 1 or stack.shape[0] != alpha.shape[0]:
        raise ValueError(
            f"need one coefficient per template, got alpha {alpha.shape} "
            f"for {stack.shape[0]} templates"
        )
    return np.tensordot(alpha, stack, axes=1)


def grads_to_templates_and_coeffs(
    store,
    plan: SharingPlan,
    dl_dtheta: Dict[Tuple[int, int], np.ndarray],
) -> Tuple[GradMap, Dict[Tuple[int, int], np.ndarray]]:
    """Chain per-(layer, slot) composed-weight gradients back to the store.

    dl_dtheta maps (layer_id, slot_id) to that layer's gradient block for the
    slot. Returns GradMap entries for every template and coefficient
    parameter, plus the per-layer coefficient contributions keyed the same
    way as the input.
    """
    contribs: Dict[Tuple[int, int], np.ndarray] = {}
    for (lid, sid), g in sorted(dl_dtheta.items()):
        stack = store.bank_stack(plan.slots[sid].bank_id)
        if g.shape != stack.shape[1:]:
            raise ValueError(
                f"gradient block for layer {lid} slot {sid} has shape {g.shape}, "
                f"expected {stack.shape[1:]}"
            )
        flat = stack.reshape(stack.shape[0], -1)
        contribs[(lid, sid)] = flat @ g.reshape(-1)

    grads: GradMap = {}
    template_acc: Dict[int, np.ndarray] = {}
    for cid in sorted(plan.coeff_slot):
        sid = plan.coeff_slot[cid]
        cset = store.coeff_sets[cid]
        alpha_grad = np.zeros_like(cset.alpha.data)
        total = None
        for lid in plan.coeff_owners[cid]:
            key = (lid, sid)
            if key not in dl_dtheta:
                continue
            alpha_grad += contribs[key].astype(alpha_grad.dtype, copy=False)
            total = dl_dtheta[key] if total is None else total + dl_dtheta[key]
        grads[cset.alpha.pid] = alpha_grad
        if total is not None:
            bank_id = plan.slots[sid].bank_id
            stack = store.bank_stack(bank_id)
            acc = template_acc.get(bank_id)
            if acc is None:
                acc = np.zeros_like(stack)
                template_acc[bank_id] = acc
            acc += cset.alpha.data.reshape((-1,) + (1,) * total.ndim) * total[None, ...]
    for bank_id, bank in sorted(store.banks.items()):
        acc = template_acc.get(bank_id)
        for i, tpl in enumerate(bank.templates):
            grads[tpl.pid] = acc[i] if acc is not None else np.zeros_like(tpl.data)
    return grads, contribs
