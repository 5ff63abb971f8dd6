"""Anytime inference: cost out every member subset, pick the best that fits."""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .model import MemberSpec


@dataclass(frozen=True)
class AnytimeEntry:
    bitmask: int
    member_ids: Tuple[int, ...]
    cost: int  # multiply-accumulate count per example


def member_cost(member: MemberSpec, input_shape: Sequence[int]) -> int:
    """Per-example MACs through the generated layers and the head.

    input_shape is (features,) for affine stacks or (channels, height,
    width) for conv stacks. Padding keeps spatial size, pooling is free.
    """
    shape = tuple(int(d) for d in input_shape)
    if len(shape) not in (1, 3):
        raise ValueError(f"input shape must be (d,) or (c, h, w), got {shape}")
    total = 0
    for spec in member.layers:
        out_ch, in_ch, kh, kw = spec.weight_shape
        if spec.kind == "conv2d":
            if len(shape) != 3:
                raise ValueError(
                    f"layer {spec.layer_id} is conv2d but the running "
                    f"activation shape is {shape}"
                )
            _, h, w = shape
            total += out_ch * in_ch * kh * kw * h * w
            shape = (out_ch, h, w)
        else:
            total += out_ch * in_ch
            shape = (out_ch,)
    classes, feat = member.head_shape
    total += classes * feat
    return total


def enumerate_anytime_schedule(
    members: Sequence[MemberSpec], input_shape: Sequence[int]
) -> List[AnytimeEntry]:
    """All non-empty member subsets, cheapest first (ties by bitmask).

    Bit i of the mask is member i in ascending member-id order.
    """
    ordered = sorted(members, key=lambda m: m.member_id)
    if not ordered:
        raise ValueError("schedule needs at least one member")
    costs = [member_cost(m, input_shape) for m in ordered]
    entries = []
    for mask in range(1, 2 ** len(ordered)):
        ids = tuple(
            ordered[i].member_id for i in range(len(ordered)) if mask >> i & 1
        )
        cost = sum(costs[i] for i in range(len(ordered)) if mask >> i & 1)
        entries.append(AnytimeEntry(mask, ids, cost))
    entries.sort(key=lambda e: (e.cost, e.bitmask))
    return entries


def select_under_budget(
    scored: Sequence[Tuple[AnytimeEntry, float]], budget: int
) -> Tuple[AnytimeEntry, float]:
    """Highest-accuracy entry whose cost fits; ties prefer cheaper, then
    lower bitmask."""
    if not scored:
        raise ValueError("no scored entries to select from")
    feasible = [(e, acc) for e, acc in scored if e.cost <= budget]
    if not feasible:
        minimum = min(e.cost for e, _ in scored)
        raise ValueError(
            f"budget {budget} fits no subset; the cheapest costs {minimum}"
        )
    return max(feasible, key=lambda ea: (ea[1], -ea[0].cost, -ea[0].bitmask))
