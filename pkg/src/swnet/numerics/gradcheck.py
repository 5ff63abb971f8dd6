"""Central finite-difference verification of analytic gradients.

A checkable model exposes loss() recomputing the scalar loss from current
parameter values, loss_and_grads() returning (loss, GradMap), and
parameters(). Run at float64; float32 roundoff swamps the difference
quotients.
"""

from __future__ import annotations

from typing import Optional, Protocol, Sequence

import numpy as np

from .tensor import GradMap, Parameter


class DifferentiableModel(Protocol):
    def loss(self) -> float: ...

    def loss_and_grads(self) -> tuple: ...

    def parameters(self) -> Sequence[Parameter]: ...


def finite_diff_check(
    model: DifferentiableModel,
    params: Optional[Sequence[Parameter]] = None,
    epsilon: float = 1e-5,
    max_entries_per_param: int = 4,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Samples up to max_entries_per_param entries of each parameter. Relative
    error is |analytic - numeric| / max(|analytic|, |numeric|); entries where
    both are below 1e-12 count as zero error.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if params is None:
        params = [p for p in model.parameters() if p.trainable]
    base_loss, grads = model.loss_and_grads()
    if not np.isfinite(base_loss):
        raise ValueError(f"non-finite loss {base_loss}")
    worst = 0.0
    for p in params:
        if p.pid not in grads:
            raise KeyError(f"no analytic gradient for parameter {p.pid!r}")
        analytic = grads[p.pid]
        if not np.all(np.isfinite(analytic)):
            raise ValueError(f"non-finite gradient for parameter {p.pid!r}")
        size = p.data.size
        n = min(max_entries_per_param, size)
        picks = rng.choice(size, size=n, replace=False) if size > n else np.arange(size)
        flat = p.data.reshape(-1)
        for idx in picks:
            idx = int(idx)
            orig = flat[idx]
            flat[idx] = orig + epsilon
            up = model.loss()
            flat[idx] = orig - epsilon
            down = model.loss()
            flat[idx] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise ValueError(f"non-finite loss while perturbing {p.pid!r}")
            numeric = (up - down) / (2.0 * epsilon)
            a = float(analytic.reshape(-1)[idx])
            denom = max(abs(a), abs(numeric))
            if denom < 1e-12:
                continue
            worst = max(worst, abs(a - numeric) / denom)
    return worst
