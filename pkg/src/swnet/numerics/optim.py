"""Plain SGD with momentum and decoupled-by-id weight decay exemptions."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .tensor import GradMap, Parameter


class SGD:
    """In-place SGD. Update: buf = momentum*buf + (g + wd*p); p -= lr*buf.

    Parameters whose ids appear in decay_exempt skip the weight decay term.
    No Nesterov variant.
    """

    def __init__(
        self,
        params: Sequence[Parameter],
        lr: float,
        momentum: float = 0.0,
        weight_decay: float = 0.0,
        decay_exempt: Iterable[str] = (),
    ):
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {momentum}")
        if weight_decay < 0:
            raise ValueError(f"weight_decay must be non-negative, got {weight_decay}")
        self.params = [p for p in params if p.trainable]
        seen = set()
        for p in self.params:
            if p.pid in seen:
                raise ValueError(f"duplicate parameter id {p.pid!r}")
            seen.add(p.pid)
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.weight_decay = float(weight_decay)
        self.decay_exempt = frozenset(decay_exempt)
        self._buffers: dict = {}

    def step(self, grads: GradMap) -> None:
        for p in self.params:
            if p.pid not in grads:
                raise KeyError(f"missing gradient for trainable parameter {p.pid!r}")
            g = np.asarray(grads[p.pid])
            if g.shape != p.data.shape:
                raise ValueError(
                    f"gradient shape {g.shape} does not match parameter "
                    f"{p.pid!r} shape {p.data.shape}"
                )
            if self.weight_decay and p.pid not in self.decay_exempt:
                g = g + self.weight_decay * p.data
            if self.momentum:
                buf = self._buffers.get(p.pid)
                if buf is None:
                    buf = np.zeros_like(p.data)
                    self._buffers[p.pid] = buf
                buf *= self.momentum
                buf += g
                g = buf
            p.data -= self.lr * g
