"""Structural types for generated weights.

Weight shapes are always (out_ch, in_ch, kh, kw); affine layers carry
kh == kw == 1. A slot is a rectangular block of that grid backed by one
template bank; a tiling covers each layer's grid with slots exactly, no
overlap and no gap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Tuple


class TilingError(ValueError):
    """Raised when a cluster cannot be tiled as ordered."""


class BudgetError(ValueError):
    """Raised when the budget cannot cover the minimum allocation."""

    def __init__(self, budget: int, minimum: int, detail: str = ""):
        self.budget = int(budget)
        self.minimum = int(minimum)
        msg = f"budget {self.budget} below minimum feasible budget {self.minimum}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


@dataclass(frozen=True)
class LayerSpec:
    layer_id: int
    member_id: int
    kind: str  # "affine" | "conv2d"
    weight_shape: Tuple[int, int, int, int]

    def __post_init__(self):
        if self.kind not in ("affine", "conv2d"):
            raise ValueError(f"layer {self.layer_id}: kind must be affine or conv2d, got {self.kind!r}")
        if len(self.weight_shape) != 4 or any(d <= 0 for d in self.weight_shape):
            raise ValueError(f"layer {self.layer_id}: bad weight shape {self.weight_shape}")
        if self.kind == "affine" and self.weight_shape[2:] != (1, 1):
            raise ValueError(
                f"layer {self.layer_id}: affine layers need kh = kw = 1, got {self.weight_shape}"
            )

    @property
    def out_ch(self) -> int:
        return self.weight_shape[0]

    @property
    def in_ch(self) -> int:
        return self.weight_shape[1]

    @property
    def kernel(self) -> Tuple[int, int]:
        return self.weight_shape[2], self.weight_shape[3]

    @property
    def param_count(self) -> int:
        o, i, kh, kw = self.weight_shape
        return o * i * kh * kw


@dataclass(frozen=True)
class SuperWeightSlot:
    slot_id: int
    shape: Tuple[int, int, int, int]  # (out_span, in_span, kh, kw)
    bank_id: int
    creator_fan_in: int  # in_ch * kh * kw of the layer that created the slot

    @property
    def size(self) -> int:
        o, i, kh, kw = self.shape
        return o * i * kh * kw


@dataclass(frozen=True)
class TilePlacement:
    slot_id: int
    offset: Tuple[int, int]  # (out_offset, in_offset)


@dataclass
class TilingPlan:
    """Tiling of one cluster: slots in creation order plus per-layer placements."""

    slots: List[SuperWeightSlot]
    placements: Dict[int, List[TilePlacement]]
    new_slots_by_layer: Dict[int, List[int]]


@dataclass
class Cluster:
    cluster_id: int
    layer_ids: List[int]
    slot_ids: List[int]


@dataclass
class SharingPlan:
    """Full sharing structure: clusters, slots, tilings, coefficient sets.

    Coefficient values live in the ParameterStore; the plan records which
    coefficient set each (layer, slot) pair draws from.
    """

    clusters: List[Cluster]
    slots: Dict[int, SuperWeightSlot]
    placements: Dict[int, List[TilePlacement]]
    coeff_assign: Dict[Tuple[int, int], int]  # (layer_id, slot_id) -> coeff_id
    coeff_owners: Dict[int, List[int]]  # coeff_id -> sorted owner layer ids
    coeff_slot: Dict[int, int]  # coeff_id -> slot_id
    bank_sizes: Dict[int, int] = field(default_factory=dict)  # bank_id -> template count

    def layer_ids(self) -> List[int]:
        return sorted(self.placements)

    def slot_owners(self, slot_id: int) -> List[int]:
        return sorted(
            lid for lid, places in self.placements.items()
            if any(p.slot_id == slot_id for p in places)
        )

    def coeff_ids_for_slot(self, slot_id: int) -> List[int]:
        return sorted(c for c, s in self.coeff_slot.items() if s == slot_id)

    def shared_slots(self, layer_a: int, layer_b: int) -> List[int]:
        sa = {p.slot_id for p in self.placements[layer_a]}
        sb = {p.slot_id for p in self.placements[layer_b]}
        return sorted(sa & sb)

    def validate(self) -> None:
        seen: set = set()
        for cluster in self.clusters:
            for lid in cluster.layer_ids:
                if lid in seen:
                    raise ValueError(f"layer {lid} appears in more than one cluster")
                seen.add(lid)
        if seen != set(self.placements):
            raise ValueError("clusters do not partition the planned layers")
        for lid, places in self.placements.items():
            for p in places:
                if (lid, p.slot_id) not in self.coeff_assign:
                    raise ValueError(f"no coefficient set for layer {lid}, slot {p.slot_id}")
        for (lid, sid), cid in self.coeff_assign.items():
            if self.coeff_slot[cid] != sid:
                raise ValueError(f"coefficient set {cid} bound to wrong slot")
            if lid not in self.coeff_owners[cid]:
                raise ValueError(f"layer {lid} missing from owners of coefficient set {cid}")

    def to_dict(self) -> dict:
        return {
            "clusters": [
                {"cluster_id": c.cluster_id, "layers": list(c.layer_ids), "slots": list(c.slot_ids)}
                for c in self.clusters
            ],
            "slots": [
                {
                    "slot_id": s.slot_id,
                    "shape": list(s.shape),
                    "bank_id": s.bank_id,
                    "creator_fan_in": s.creator_fan_in,
                }
                for _, s in sorted(self.slots.items())
            ],
            "placements": {
                str(lid): [{"slot_id": p.slot_id, "offset": list(p.offset)} for p in places]
                for lid, places in sorted(self.placements.items())
            },
            "coeff_sets": [
                {
                    "coeff_id": cid,
                    "slot_id": self.coeff_slot[cid],
                    "owners": list(self.coeff_owners[cid]),
                }
                for cid in sorted(self.coeff_slot)
            ],
            "coeff_assign": [
                {"layer_id": lid, "slot_id": sid, "coeff_id": cid}
                for (lid, sid), cid in sorted(self.coeff_assign.items())
            ],
            "bank_sizes": {str(b): n for b, n in sorted(self.bank_sizes.items())},
        }

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "SharingPlan":
        slots = {
            s["slot_id"]: SuperWeightSlot(
                slot_id=s["slot_id"],
                shape=tuple(s["shape"]),
                bank_id=s["bank_id"],
                creator_fan_in=s["creator_fan_in"],
            )
            for s in d["slots"]
        }
        plan = cls(
            clusters=[
                Cluster(c["cluster_id"], list(c["layers"]), list(c["slots"]))
                for c in d["clusters"]
            ],
            slots=slots,
            placements={
                int(lid): [TilePlacement(p["slot_id"], tuple(p["offset"])) for p in places]
                for lid, places in d["placements"].items()
            },
            coeff_assign={
                (a["layer_id"], a["slot_id"]): a["coeff_id"] for a in d["coeff_assign"]
            },
            coeff_owners={c["coeff_id"]: list(c["owners"]) for c in d["coeff_sets"]},
            coeff_slot={c["coeff_id"]: c["slot_id"] for c in d["coeff_sets"]},
            bank_sizes={int(b): n for b, n in d["bank_sizes"].items()},
        )
        return plan

    @classmethod
    def from_text(cls, text: str) -> "SharingPlan":
        return cls.from_dict(json.loads(text))


def diff_plans(before: SharingPlan, after: SharingPlan) -> str:
    """Structured text description of coefficient-set changes between plans."""
    lines = []
    before_sets = set(before.coeff_slot)
    after_sets = set(after.coeff_slot)
    for cid in sorted(after_sets - before_sets):
        owners = after.coeff_owners[cid]
        lines.append(
            f"+ coeff_set {cid} slot {after.coeff_slot[cid]} owners {owners}"
        )
    for cid in sorted(before_sets & after_sets):
        if before.coeff_owners[cid] != after.coeff_owners[cid]:
            lines.append(
                f"~ coeff_set {cid} owners {before.coeff_owners[cid]} -> {after.coeff_owners[cid]}"
            )
    for cid in sorted(before_sets - after_sets):
        lines.append(f"- coeff_set {cid}")
    return "\n".join(lines) if lines else "(no coefficient changes)"
