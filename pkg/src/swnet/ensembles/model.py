"""Ensemble members that assemble their weights from the shared store.

Each member runs its generated layers in forward order with a relu after
every one, pools spatial maps down to channel features before the first
affine that follows a conv stack, and finishes with its own unshared head.
Generated weights enter the tape as tracked leaves so their gradients can be
chained back into templates and coefficients analytically.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..numerics import Tensor, softmax_cross_entropy
from ..numerics.ops import affine, avg_pool, conv2d, relu
from ..numerics.tensor import GradMap, leaf, make_node, zero_grads
from ..weightgen.compose import grads_to_templates_and_coeffs
from ..weightgen.store import ParameterStore
from ..weightgen.tiling import slice_layer_grad
from ..weightgen.types import LayerSpec

LedgerFeed = Tuple[Dict[Tuple[int, int], np.ndarray], Dict[Tuple[int, int], np.ndarray]]


@dataclass(frozen=True)
class MemberSpec:
    member_id: int
    layers: Tuple[LayerSpec, ...]
    head_shape: Tuple[int, int]  # (classes, features)

    def __post_init__(self):
        if not self.layers:
            raise ValueError(f"member {self.member_id} has no generated layers")
        for l in self.layers:
            if l.member_id != self.member_id:
                raise ValueError(
                    f"layer {l.layer_id} belongs to member {l.member_id}, "
                    f"not {self.member_id}"
                )
        feat = self.layers[-1].out_ch
        if self.head_shape[1] != feat:
            raise ValueError(
                f"member {self.member_id}: head expects {self.head_shape[1]} "
                f"features but the last layer emits {feat}"
            )


def _scalar_mix(terms: Sequence[Tensor], weights: Sequence[float]) -> Tensor:
    """Weighted sum of scalar loss nodes."""
    value = sum(w * float(t.data) for t, w in zip(terms, weights))

    def backward(gy):
        return tuple(np.asarray(gy * w) for w in weights)

    return make_node(np.asarray(value), list(terms), backward, name="loss_mix")


class SharedEnsemble:
    def __init__(
        self,
        store: ParameterStore,
        members: Sequence[MemberSpec],
        member_loss_weights: Optional[Sequence[float]] = None,
    ):
        self.store = store
        self.members = sorted(members, key=lambda m: m.member_id)
        ids = [m.member_id for m in self.members]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate member ids in {ids}")
        for m in self.members:
            if m.member_id not in store.heads:
                raise ValueError(f"store has no head for member {m.member_id}")
        if member_loss_weights is None:
            self.loss_weights = [1.0 / len(self.members)] * len(self.members)
        else:
            if len(member_loss_weights) != len(self.members):
                raise ValueError("need one loss weight per member")
            self.loss_weights = [float(w) for w in member_loss_weights]

    def member(self, member_id: int) -> MemberSpec:
        for m in self.members:
            if m.member_id == member_id:
                return m
        raise KeyError(f"no member {member_id}")

    def _forward(
        self, member: MemberSpec, x: np.ndarray, track: bool
    ) -> Tuple[Tensor, Dict[int, Tensor]]:
        leaves: Dict[int, Tensor] = {}
        h: Tensor = Tensor(np.asarray(x))
        for spec in member.layers:
            w = leaf(
                self.store.layer_weight(spec.layer_id),
                name=f"w:{spec.layer_id}",
                track_grad=track,
            )
            leaves[spec.layer_id] = w
            b = self.store.biases[spec.layer_id]
            if spec.kind == "affine":
                if h.data.ndim == 4:
                    h = avg_pool(h, label=f"pool_before_{spec.layer_id}")
                h = affine(h, w, b, label=f"layer{spec.layer_id}")
            else:
                h = conv2d(h, w, b, label=f"layer{spec.layer_id}")
            h = relu(h, label=f"relu{spec.layer_id}")
        if h.data.ndim == 4:
            h = avg_pool(h, label=f"pool_m{member.member_id}")
        hw, hb = self.store.heads[member.member_id]
        return affine(h, hw, hb, label=f"head{member.member_id}"), leaves

    def member_logits(self, member_id: int, x: np.ndarray) -> np.ndarray:
        logits, _ = self._forward(self.member(member_id), x, track=False)
        return logits.data

    def loss_and_grads(
        self, x: np.ndarray, labels: np.ndarray
    ) -> Tuple[float, GradMap, LedgerFeed]:
        """Mean member cross-entropy; gradients for every store parameter.

        Also returns the per-layer weight-block gradients and coefficient
        contributions so a ledger can observe this batch.
        """
        params = self.store.parameters()
        zero_grads(params)
        losses: List[Tensor] = []
        leaves: Dict[int, Tensor] = {}
        for m in self.members:
            logits, member_leaves = self._forward(m, x, track=True)
            leaves.update(member_leaves)
            losses.append(
                softmax_cross_entropy(logits, labels, label=f"ce{m.member_id}")
            )
        total = _scalar_mix(losses, self.loss_weights)
        total.backward()

        plan = self.store.plan
        dl_dtheta: Dict[Tuple[int, int], np.ndarray] = {}
        for lid, w_leaf in leaves.items():
            g = w_leaf.grad
            if g is None:
                g = np.zeros_like(w_leaf.data)
            sliced = slice_layer_grad(
                g,
                plan.placements[lid],
                {sid: plan.slots[sid].shape for sid in plan.slots},
            )
            for sid, block in sliced.items():
                dl_dtheta[(lid, sid)] = block
        chain, contribs = grads_to_templates_and_coeffs(self.store, plan, dl_dtheta)

        grads: GradMap = dict(chain)
        for p in params:
            if p.pid not in grads:
                grads[p.pid] = p.grad if p.grad is not None else np.zeros_like(p.data)
        zero_grads(params)
        return float(total.data), grads, (dl_dtheta, contribs)

    def loss(self, x: np.ndarray, labels: np.ndarray) -> float:
        total = 0.0
        for m, w in zip(self.members, self.loss_weights):
            logits, _ = self._forward(m, x, track=False)
            total += w * float(softmax_cross_entropy(logits, labels).data)
        return total
