"""Layer kernels and the classification loss.

Supported layer kinds: affine, conv2d (stride 1, zero padding, spatial size
preserved, odd kernels), relu, and global average pooling. Nothing else, and
no batch norm. All kernels record their backward rule on the tape.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from .tensor import GradMap, Parameter, Tensor, collect_parameters, make_node

LAYER_KINDS = ("affine", "conv2d", "relu", "avgpool")


class ShapeError(ValueError):
    """Shape mismatch at a named layer, carrying expected vs actual."""

    def __init__(self, label: Optional[str], what: str, expected, actual):
        self.label = label or "?"
        self.what = what
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        super().__init__(
            f"layer {self.label}: expected {what} shape {self.expected}, got {self.actual}"
        )


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _weight_2d(w: Tensor, label: Optional[str]) -> np.ndarray:
    """Accept (out, in) or (out, in, 1, 1) weight arrays for affine layers."""
    wd = w.data
    if wd.ndim == 4:
        if wd.shape[2] != 1 or wd.shape[3] != 1:
            raise ShapeError(label, "affine weight", (wd.shape[0], wd.shape[1], 1, 1), wd.shape)
        return wd[:, :, 0, 0]
    if wd.ndim == 2:
        return wd
    raise ShapeError(label, "affine weight", ("out", "in"), wd.shape)


def affine(x, w, b=None, label: Optional[str] = None) -> Tensor:
    x = _wrap(x)
    w = _wrap(w)
    w2 = _weight_2d(w, label)
    out_ch, in_ch = w2.shape
    if x.data.ndim != 2 or x.data.shape[1] != in_ch:
        raise ShapeError(label, "input", ("batch", in_ch), x.data.shape)
    y = x.data @ w2.T
    parents = [x, w]
    if b is not None:
        b = _wrap(b)
        if b.data.shape != (out_ch,):
            raise ShapeError(label, "bias", (out_ch,), b.data.shape)
        y = y + b.data
        parents.append(b)
    w_shape = w.data.shape

    def backward(gy):
        gx = gy @ w2
        gw = (gy.T @ x.data).reshape(w_shape)
        if len(parents) == 3:
            return (gx, gw, gy.sum(axis=0))
        return (gx, gw)

    return make_node(y, parents, backward, name=label)


def conv2d(x, w, b=None, label: Optional[str] = None) -> Tensor:
    """Stride-1 convolution with zero padding that preserves spatial size."""
    x = _wrap(x)
    w = _wrap(w)
    wd = w.data
    if wd.ndim != 4:
        raise ShapeError(label, "conv weight", ("out", "in", "kh", "kw"), wd.shape)
    out_ch, in_ch, kh, kw = wd.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"layer {label or '?'}: conv kernels must be odd, got ({kh}, {kw})")
    if x.data.ndim != 4 or x.data.shape[1] != in_ch:
        raise ShapeError(label, "input", ("batch", in_ch, "h", "w"), x.data.shape)
    batch, _, height, width = x.data.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    y = np.zeros((batch, out_ch, height, width), dtype=x.data.dtype)
    for i in range(kh):
        for j in range(kw):
            y += np.einsum(
                "oc,bchw->bohw", wd[:, :, i, j], xp[:, :, i : i + height, j : j + width]
            )
    parents = [x, w]
    if b is not None:
        b = _wrap(b)
        if b.data.shape != (out_ch,):
            raise ShapeError(label, "bias", (out_ch,), b.data.shape)
        y = y + b.data[None, :, None, None]
        parents.append(b)

    def backward(gy):
        gw = np.zeros_like(wd)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                patch = xp[:, :, i : i + height, j : j + width]
                gw[:, :, i, j] = np.einsum("bohw,bchw->oc", gy, patch)
                gxp[:, :, i : i + height, j : j + width] += np.einsum(
                    "oc,bohw->bchw", wd[:, :, i, j], gy
                )
        gx = gxp[:, :, ph : ph + height, pw : pw + width]
        if len(parents) == 3:
            return (gx, gw, gy.sum(axis=(0, 2, 3)))
        return (gx, gw)

    return make_node(y, parents, backward, name=label)


def relu(x, label: Optional[str] = None) -> Tensor:
    x = _wrap(x)
    mask = x.data > 0
    y = np.where(mask, x.data, 0).astype(x.data.dtype, copy=False)

    def backward(gy):
        return (gy * mask,)

    return make_node(y, [x], backward, name=label)


def avg_pool(x, label: Optional[str] = None) -> Tensor:
    """Global spatial average: (batch, ch, h, w) -> (batch, ch)."""
    x = _wrap(x)
    if x.data.ndim != 4:
        raise ShapeError(label, "input", ("batch", "ch", "h", "w"), x.data.shape)
    _, _, height, width = x.data.shape
    y = x.data.mean(axis=(2, 3))

    def backward(gy):
        gx = np.broadcast_to(
            gy[:, :, None, None] / (height * width), x.data.shape
        ).astype(gy.dtype, copy=True)
        return (gx,)

    return make_node(y, [x], backward, name=label)


def layer_forward(kind: str, x, weights=None, bias=None, label: Optional[str] = None) -> Tensor:
    if kind == "affine" or kind == "conv2d":
        if weights is None:
            raise ValueError(f"layer {label or '?'}: kind {kind} requires weights")
        fn = affine if kind == "affine" else conv2d
        return fn(x, weights, bias, label=label)
    if kind == "relu" or kind == "avgpool":
        if weights is not None or bias is not None:
            raise ValueError(f"layer {label or '?'}: kind {kind} takes no weights")
        return relu(x, label=label) if kind == "relu" else avg_pool(x, label=label)
    raise ValueError(f"unknown layer kind {kind!r}, expected one of {LAYER_KINDS}")


def _check_labels(labels, classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError(f"labels must be 1-d, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError(f"labels must be integers, got dtype {labels.dtype}")
    bad = (labels < 0) | (labels >= classes)
    if bad.any():
        idx = int(np.argmax(bad))
        raise ValueError(
            f"label {int(labels[idx])} at index {idx} outside [0, {classes})"
        )
    return labels


def softmax_cross_entropy(logits, labels, label: Optional[str] = None) -> Tensor:
    """Mean softmax cross-entropy over the batch. Always non-negative."""
    logits = _wrap(logits)
    ld = logits.data
    if ld.ndim != 2:
        raise ShapeError(label, "logits", ("batch", "classes"), ld.shape)
    batch, classes = ld.shape
    labels = _check_labels(labels, classes)
    if labels.shape[0] != batch:
        raise ShapeError(label, "labels", (batch,), labels.shape)
    shift = ld - ld.max(axis=1, keepdims=True)
    exps = np.exp(shift)
    sums = exps.sum(axis=1, keepdims=True)
    log_probs = shift - np.log(sums)
    loss = -log_probs[np.arange(batch), labels].mean()
    probs = exps / sums

    def backward(gy):
        g = probs.copy()
        g[np.arange(batch), labels] -= 1.0
        g *= gy / batch
        return (g.astype(ld.dtype, copy=False),)

    return make_node(np.asarray(loss, dtype=ld.dtype), [logits], backward, name="xent")


def loss_and_grad(logits: Tensor, labels) -> Tuple[float, GradMap]:
    """Loss plus gradients for every trainable parameter reachable from logits."""
    loss = softmax_cross_entropy(logits, labels)
    loss.backward()
    grads: GradMap = {}
    for p in collect_parameters(loss):
        if not isinstance(p, Parameter) or not p.trainable:
            continue
        grads[p.pid] = p.grad if p.grad is not None else np.zeros_like(p.data)
    return loss.item(), grads
