"""Inference helpers: subset prediction and member interpolation."""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .model import MemberSpec, SharedEnsemble


def np_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def ensemble_predict(
    model: SharedEnsemble, x: np.ndarray, member_ids: Optional[Sequence[int]] = None
) -> np.ndarray:
    """Mean of member softmax outputs over the chosen subset."""
    if member_ids is None:
        member_ids = [m.member_id for m in model.members]
    member_ids = list(member_ids)
    if not member_ids:
        raise ValueError("prediction needs at least one member")
    probs = [np_softmax(model.member_logits(mid, x)) for mid in member_ids]
    return np.mean(probs, axis=0)


@dataclass
class FrozenMember:
    """A member detached from the store: explicit weights, no sharing."""

    layers: List[Tuple[str, np.ndarray, np.ndarray]]  # (kind, weights, bias)
    head: Tuple[np.ndarray, np.ndarray]

    def predict_logits(self, x: np.ndarray) -> np.ndarray:
        h = np.asarray(x)
        for kind, w, b in self.layers:
            if kind == "affine":
                if h.ndim == 4:
                    h = h.mean(axis=(2, 3))
                h = h @ w.reshape(w.shape[0], -1).T + b
            else:
                h = _np_conv2d(h, w) + b[None, :, None, None]
            h = np.maximum(h, 0)
        if h.ndim == 4:
            h = h.mean(axis=(2, 3))
        hw, hb = self.head
        return h @ hw.T + hb


def _np_conv2d(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    out_ch, in_ch, kh, kw = w.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    batch, _, height, width = x.shape
    y = np.zeros((batch, out_ch, height, width), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i : i + height, j : j + width]
            y += np.einsum("oc,bchw->bohw", w[:, :, i, j], patch)
    return y


def _freeze(model: SharedEnsemble, member: MemberSpec) -> FrozenMember:
    layers = []
    for spec in member.layers:
        w = np.array(model.store.layer_weight(spec.layer_id))
        b = np.array(model.store.biases[spec.layer_id].data)
        layers.append((spec.kind, w, b))
    hw, hb = model.store.heads[member.member_id]
    return FrozenMember(layers, (np.array(hw.data), np.array(hb.data)))


def interpolate_members(
    model: SharedEnsemble, member_a: int, member_b: int, lam: float
) -> FrozenMember:
    """Blend two same-architecture members: lam 0 is exactly member_a,
    lam 1 exactly member_b, in between a convex mix of every weight."""
    a = model.member(member_a)
    b = model.member(member_b)
    sig_a = [(l.kind, l.weight_shape) for l in a.layers]
    sig_b = [(l.kind, l.weight_shape) for l in b.layers]
    if sig_a != sig_b or a.head_shape != b.head_shape:
        raise ValueError(
            f"members {member_a} and {member_b} differ in architecture; "
            "interpolation needs matching layer shapes"
        )
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lam must be in [0, 1], got {lam}")
    fa = _freeze(model, a)
    fb = _freeze(model, b)
    if lam == 0.0:
        return fa
    if lam == 1.0:
        return fb
    mixed = [
        (kind, (1 - lam) * wa + lam * wb, (1 - lam) * ba + lam * bb)
        for (kind, wa, ba), (_, wb, bb) in zip(fa.layers, fb.layers)
    ]
    head = (
        (1 - lam) * fa.head[0] + lam * fb.head[0],
        (1 - lam) * fa.head[1] + lam * fb.head[1],
    )
    return FrozenMember(mixed, head)
