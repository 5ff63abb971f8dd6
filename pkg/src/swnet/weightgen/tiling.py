"""Slot tiling: cover each layer's weight grid with shared rectangular slots.

Layers in a cluster are ordered smallest to largest by parameter count (ties
by layer id). The smallest layer becomes one slot. Every later layer reuses
all slots created so far and, when strictly larger, adds an extension along
the input dimension first (prev_out x delta_in) and then one along the output
dimension spanning the full new input width (delta_out x new_in). A later
layer that is smaller than the running grid in either dimension cannot be
tiled; callers split such clusters into monotone chains.
"""

from __future__ import annotations

from typing import Dict, List, Sequence

import numpy as np

from .types import LayerSpec, SuperWeightSlot, TilePlacement, TilingError, TilingPlan


def _sorted_layers(layers: Sequence[LayerSpec]) -> List[LayerSpec]:
    return sorted(layers, key=lambda l: (l.param_count, l.layer_id))


def plan_tiling(layers: Sequence[LayerSpec], slot_id_start: int = 0) -> TilingPlan:
    """Tile one cluster. All layers must share the same (kh, kw)."""
    if not layers:
        raise ValueError("plan_tiling needs at least one layer")
    kernel = layers[0].kernel
    for l in layers:
        if l.kernel != kernel:
            raise TilingError(
                f"layer {l.layer_id} kernel {l.kernel} does not match cluster kernel {kernel}"
            )
    kh, kw = kernel
    order = _sorted_layers(layers)
    slots: List[SuperWeightSlot] = []
    placements: Dict[int, List[TilePlacement]] = {}
    new_slots: Dict[int, List[int]] = {}
    next_id = slot_id_start

    first = order[0]
    base = SuperWeightSlot(
        slot_id=next_id,
        shape=(first.out_ch, first.in_ch, kh, kw),
        bank_id=next_id,
        creator_fan_in=first.in_ch * kh * kw,
    )
    next_id += 1
    slots.append(base)
    covering = [TilePlacement(base.slot_id, (0, 0))]
    placements[first.layer_id] = list(covering)
    new_slots[first.layer_id] = [base.slot_id]
    cur_out, cur_in = first.out_ch, first.in_ch

    for layer in order[1:]:
        out_ch, in_ch = layer.out_ch, layer.in_ch
        if out_ch < cur_out or in_ch < cur_in:
            raise TilingError(
                f"layer {layer.layer_id} grid ({out_ch}, {in_ch}) shrinks below the "
                f"running grid ({cur_out}, {cur_in}); split the cluster"
            )
        created: List[int] = []
        if in_ch > cur_in:
            slot = SuperWeightSlot(
                slot_id=next_id,
                shape=(cur_out, in_ch - cur_in, kh, kw),
                bank_id=next_id,
                creator_fan_in=in_ch * kh * kw,
            )
            next_id += 1
            slots.append(slot)
            covering.append(TilePlacement(slot.slot_id, (0, cur_in)))
            created.append(slot.slot_id)
        if out_ch > cur_out:
            slot = SuperWeightSlot(
                slot_id=next_id,
                shape=(out_ch - cur_out, in_ch, kh, kw),
                bank_id=next_id,
                creator_fan_in=in_ch * kh * kw,
            )
            next_id += 1
            slots.append(slot)
            covering.append(TilePlacement(slot.slot_id, (cur_out, 0)))
            created.append(slot.slot_id)
        cur_out, cur_in = out_ch, in_ch
        placements[layer.layer_id] = list(covering)
        new_slots[layer.layer_id] = created

    return TilingPlan(slots=slots, placements=placements, new_slots_by_layer=new_slots)


def split_into_chains(layers: Sequence[LayerSpec]) -> List[List[LayerSpec]]:
    """Split same-kernel layers into monotone chains tileable by plan_tiling.

    Greedy first-fit over layers sorted by parameter count: a layer joins the
    first chain whose running grid it dominates in both dimensions, else it
    starts a new chain. Deterministic.
    """
    chains: List[dict] = []
    for layer in _sorted_layers(layers):
        placed = False
        for chain in chains:
            if layer.out_ch >= chain["out"] and layer.in_ch >= chain["in"]:
                chain["layers"].append(layer)
                chain["out"], chain["in"] = layer.out_ch, layer.in_ch
                placed = True
                break
        if not placed:
            chains.append({"out": layer.out_ch, "in": layer.in_ch, "layers": [layer]})
    return [c["layers"] for c in chains]


def assemble_layer(
    weight_shape,
    placements: Sequence[TilePlacement],
    slot_arrays: Dict[int, np.ndarray],
    dtype=None,
) -> np.ndarray:
    """Write slot blocks into a fresh (out, in, kh, kw) weight array."""
    out_ch, in_ch, kh, kw = weight_shape
    if dtype is None:
        dtype = next(iter(slot_arrays.values())).dtype
    w = np.zeros((out_ch, in_ch, kh, kw), dtype=dtype)
    for p in placements:
        block = slot_arrays[p.slot_id]
        oo, io = p.offset
        so, si = block.shape[0], block.shape[1]
        if oo + so > out_ch or io + si > in_ch:
            raise ValueError(
                f"slot {p.slot_id} block {block.shape} at offset {p.offset} "
                f"exceeds layer grid ({out_ch}, {in_ch})"
            )
        w[oo : oo + so, io : io + si, :, :] = block
    return w


def slice_layer_grad(
    weight_grad: np.ndarray, placements: Sequence[TilePlacement], slot_shapes: Dict[int, tuple]
) -> Dict[int, np.ndarray]:
    """Cut a layer's weight gradient back into per-slot blocks (copies)."""
    out = {}
    for p in placements:
        so, si, _, _ = slot_shapes[p.slot_id]
        oo, io = p.offset
        out[p.slot_id] = weight_grad[oo : oo + so, io : io + si, :, :].copy()
    return out
