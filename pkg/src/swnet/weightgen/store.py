"""The shared trainable store: template banks, coefficient sets, extras.

One bank per slot. Coefficient sets hold the mixing vector for one slot and
the layers that currently share it; under hard sharing there is exactly one
set per slot. Biases and classifier heads are unshared and live here too.

Initialization: template entries are uniform with bound sqrt(N / fan_in) of
the slot's creating layer and coefficients start at 1/N, so a composed
SuperWeight matches the variance of a standard fan-in uniform init.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..numerics.tensor import Parameter
from .tiling import assemble_layer
from .compose import compose_superweight
from .types import LayerSpec, SharingPlan


@dataclass
class TemplateBank:
    bank_id: int
    slot_shape: Tuple[int, int, int, int]
    templates: List[Parameter] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.templates)

    def stacked(self) -> np.ndarray:
        return np.stack([t.data for t in self.templates])


@dataclass
class CoefficientSet:
    coeff_id: int
    slot_id: int
    alpha: Parameter
    owner_layers: List[int]


class ParameterStore:
    """Materialized parameters for a SharingPlan plus unshared extras."""

    def __init__(
        self,
        plan: SharingPlan,
        layers: List[LayerSpec],
        head_shapes: Optional[Dict[int, Tuple[int, int]]] = None,
        dtype=np.float32,
        seed: int = 0,
    ):
        if not plan.bank_sizes:
            raise ValueError("plan has no bank sizes; run allocate_templates first")
        self.plan = plan
        self.dtype = np.dtype(dtype)
        self.layers = {l.layer_id: l for l in layers}
        rng = np.random.default_rng(seed)

        self.banks: Dict[int, TemplateBank] = {}
        for sid in sorted(plan.slots):
            slot = plan.slots[sid]
            n = plan.bank_sizes[slot.bank_id]
            bound = float(np.sqrt(n / slot.creator_fan_in))
            bank = TemplateBank(bank_id=slot.bank_id, slot_shape=slot.shape)
            for i in range(n):
                data = rng.uniform(-bound, bound, size=slot.shape).astype(self.dtype)
                bank.templates.append(Parameter(data, pid=f"tpl:{slot.bank_id}:{i}"))
            self.banks[slot.bank_id] = bank

        self.coeff_sets: Dict[int, CoefficientSet] = {}
        for cid in sorted(plan.coeff_slot):
            sid = plan.coeff_slot[cid]
            n = plan.bank_sizes[plan.slots[sid].bank_id]
            alpha = Parameter(np.full(n, 1.0 / n, dtype=self.dtype), pid=f"cf:{cid}")
            self.coeff_sets[cid] = CoefficientSet(
                coeff_id=cid, slot_id=sid, alpha=alpha,
                owner_layers=list(plan.coeff_owners[cid]),
            )
        self._next_coeff_id = max(self.coeff_sets, default=-1) + 1

        self.biases: Dict[int, Parameter] = {}
        for lid in sorted(self.layers):
            out_ch = self.layers[lid].out_ch
            self.biases[lid] = Parameter(
                np.zeros(out_ch, dtype=self.dtype), pid=f"bias:{lid}"
            )

        self.heads: Dict[int, Tuple[Parameter, Parameter]] = {}
        for member_id in sorted(head_shapes or {}):
            classes, feat = (head_shapes or {})[member_id]
            bound = float(np.sqrt(1.0 / feat))
            w = rng.uniform(-bound, bound, size=(classes, feat)).astype(self.dtype)
            self.heads[member_id] = (
                Parameter(w, pid=f"head:{member_id}:w"),
                Parameter(np.zeros(classes, dtype=self.dtype), pid=f"head:{member_id}:b"),
            )

    # ---- parameter access -------------------------------------------------

    def parameters(self) -> List[Parameter]:
        params: List[Parameter] = []
        for bank_id in sorted(self.banks):
            params.extend(self.banks[bank_id].templates)
        for cid in sorted(self.coeff_sets):
            params.append(self.coeff_sets[cid].alpha)
        for lid in sorted(self.biases):
            params.append(self.biases[lid])
        for mid in sorted(self.heads):
            params.extend(self.heads[mid])
        return params

    def decay_exempt_ids(self) -> frozenset:
        """Weight decay applies to everything except mixing coefficients."""
        return frozenset(c.alpha.pid for c in self.coeff_sets.values())

    def bank_stack(self, bank_id: int) -> np.ndarray:
        return self.banks[bank_id].stacked()

    def total_trainable(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def committed_trainable(self) -> int:
        """Materialized parameters plus coefficient entries still reserved."""
        reserved = 0
        for sid in sorted(self.plan.slots):
            n = self.plan.bank_sizes[self.plan.slots[sid].bank_id]
            owners = len(self.plan.slot_owners(sid))
            sets = len(self.plan.coeff_ids_for_slot(sid))
            reserved += (owners - sets) * n
        return self.total_trainable() + reserved

    # ---- weight generation ------------------------------------------------

    def compose_slot(self, slot_id: int, coeff_id: int) -> np.ndarray:
        bank = self.banks[self.plan.slots[slot_id].bank_id]
        return compose_superweight(bank.stacked(), self.coeff_sets[coeff_id].alpha.data)

    def layer_weight(self, layer_id: int) -> np.ndarray:
        """Assemble the full generated weight array for one layer."""
        spec = self.layers[layer_id]
        places = self.plan.placements[layer_id]
        blocks = {
            p.slot_id: self.compose_slot(p.slot_id, self.plan.coeff_assign[(layer_id, p.slot_id)])
            for p in places
        }
        return assemble_layer(spec.weight_shape, places, blocks, dtype=self.dtype)

    # ---- refinement support -------------------------------------------------

    def split_coefficients(self, coeff_id: int, owner_groups: List[List[int]]) -> List[int]:
        """Split one coefficient set into per-group copies.

        The first group keeps the original set; each later group gets a copy
        with identical values, so composed SuperWeights are unchanged at the
        instant of the split. Returns the coefficient ids in group order.
        Updates both the store and the plan.
        """
        cset = self.coeff_sets[coeff_id]
        current = sorted(cset.owner_layers)
        flat = sorted(l for g in owner_groups for l in g)
        if flat != current:
            raise ValueError(
                f"owner groups {flat} do not partition the owners {current} "
                f"of coefficient set {coeff_id}"
            )
        sid = cset.slot_id
        ids = []
        for gi, group in enumerate(owner_groups):
            group = sorted(group)
            if gi == 0:
                cset.owner_layers = group
                self.plan.coeff_owners[coeff_id] = group
                ids.append(coeff_id)
                continue
            cid = self._next_coeff_id
            self._next_coeff_id += 1
            alpha = Parameter(cset.alpha.data.copy(), pid=f"cf:{cid}")
            self.coeff_sets[cid] = CoefficientSet(
                coeff_id=cid, slot_id=sid, alpha=alpha, owner_layers=group
            )
            self.plan.coeff_owners[cid] = group
            self.plan.coeff_slot[cid] = sid
            for lid in group:
                self.plan.coeff_assign[(lid, sid)] = cid
            ids.append(cid)
        self.plan.validate()
        return ids
