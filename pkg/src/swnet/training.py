"""Epoch loops with seeded shuffles, stepped lr decay, and ledger hooks."""

from typing import Callable, Iterable, List, Optional

import numpy as np

from .config import TrainConfig
from .ensembles.model import SharedEnsemble
from .numerics import SGD
from .search.ledger import GradientLedger

# distinct shuffle streams so the main phase is independent of warmup history
WARMUP_STREAM = 5
MAIN_STREAM = 7


def lr_for_epoch(
    base: float, factor: float, decay_epochs: Iterable[int], epoch: int
) -> float:
    steps = sum(1 for e in decay_epochs if epoch >= e)
    return base * factor**steps


def build_optimizer(model: SharedEnsemble, cfg: TrainConfig) -> SGD:
    store = model.store
    return SGD(
        store.parameters(),
        lr=cfg.lr,
        momentum=cfg.momentum,
        weight_decay=cfg.weight_decay,
        decay_exempt=store.decay_exempt_ids(),
    )


def train_epochs(
    model: SharedEnsemble,
    x: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    seed: int,
    stream: int,
    epochs: Optional[int] = None,
    ledger: Optional[GradientLedger] = None,
    record_epochs: Iterable[int] = (),
    after_epoch: Optional[Callable[[int], None]] = None,
) -> List[float]:
    """Train for the given epochs (1-based); returns mean loss per epoch.

    The shuffle for epoch e is seeded by (seed, stream, e) alone, so two runs
    that share seed and stream see identical batches no matter what happened
    before the loop. When an epoch is in record_epochs, every batch's weight
    and coefficient gradients are accumulated into the ledger; the ledger is
    reset as the epoch starts so it holds exactly one epoch of evidence.
    """
    total_epochs = cfg.epochs if epochs is None else epochs
    record = set(record_epochs)
    if ledger is None and record:
        raise ValueError("record_epochs given without a ledger")
    opt = build_optimizer(model, cfg)
    history: List[float] = []
    n = len(x)
    for epoch in range(1, total_epochs + 1):
        opt.lr = lr_for_epoch(cfg.lr, cfg.lr_decay_factor, cfg.lr_decay_epochs, epoch)
        recording = epoch in record
        if recording:
            ledger.reset()
        perm = np.random.default_rng([seed, stream, epoch]).permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            loss, grads, feed = model.loss_and_grads(x[idx], y[idx])
            if recording:
                ledger.accumulate(*feed)
            opt.step(grads)
            losses.append(loss)
        history.append(float(np.mean(losses)))
        if after_epoch is not None:
            after_epoch(epoch)
    return history
