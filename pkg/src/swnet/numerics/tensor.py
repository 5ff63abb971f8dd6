"""Tape-based reverse-mode differentiation over numpy arrays.

A Tensor wraps one ndarray plus the closure that routes its output gradient
back to its parents. Calling backward() on a scalar walks the tape in reverse
topological order and accumulates into .grad on every node that requested it.
Precision follows the leaf arrays (float32 by default, float64 for checks).
"""

from __future__ import annotations

import itertools
from typing import Callable, Dict, Iterable, Optional, Sequence

import numpy as np

# param id -> gradient array, same shape and dtype as the parameter
GradMap = Dict[str, np.ndarray]

_param_ids = itertools.count()


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: Optional[str] = None,
    ):
        self.data = np.asarray(data)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._parents: Sequence["Tensor"] = ()
        self._backward: Optional[Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]] = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Backpropagate from this scalar through the recorded tape."""
        if self.data.size != 1:
            raise ValueError(f"backward() needs a scalar, got shape {self.data.shape}")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in order:
            if node._backward is None or node.grad is None:
                continue
            contribs = node._backward(node.grad)
            for parent, contrib in zip(node._parents, contribs):
                if contrib is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += contrib

    def __repr__(self):
        tag = self.name or "tensor"
        return f"Tensor({tag}, shape={self.data.shape}, dtype={self.data.dtype})"


class Parameter(Tensor):
    """A trainable leaf with a process-unique id."""

    __slots__ = ("pid", "trainable")

    def __init__(self, data, pid: Optional[str] = None, trainable: bool = True):
        arr = np.array(data, copy=True)
        super().__init__(arr, requires_grad=trainable, name=pid)
        self.pid = pid if pid is not None else f"p{next(_param_ids)}"
        self.trainable = bool(trainable)
        self.name = self.pid

    def __repr__(self):
        return f"Parameter({self.pid}, shape={self.data.shape}, trainable={self.trainable})"


def make_node(
    data: np.ndarray,
    parents: Sequence[Tensor],
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]],
    name: Optional[str] = None,
) -> Tensor:
    """Create an interior tape node. Grad tracking is inherited from parents."""
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents), name=name)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _toposort(root: Tensor) -> list:
    order: list = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return list(reversed(order))


def collect_parameters(root: Tensor) -> list:
    """All Parameter leaves reachable from root, in first-visit order."""
    params = []
    seen = set()
    stack = [root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if isinstance(node, Parameter):
            params.append(node)
        stack.extend(node._parents)
    return params


def leaf(data, name: Optional[str] = None, track_grad: bool = False) -> Tensor:
    """A non-trainable leaf that still accumulates a gradient when asked.

    Used for generated layer weights: they are produced outside the tape each
    forward pass, but their gradient is needed to chain back into templates
    and coefficients.
    """
    return Tensor(np.asarray(data), requires_grad=track_grad, name=name)


def zero_grads(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.grad = None
