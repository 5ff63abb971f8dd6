"""Learning-rate schedule, seeded shuffles, and ledger recording windows."""

import numpy as np
import pytest

from swnet.config import TrainConfig
from swnet.ensembles import MemberSpec, SharedEnsemble
from swnet.search import GradientLedger
from swnet.training import (
    MAIN_STREAM,
    WARMUP_STREAM,
    build_optimizer,
    lr_for_epoch,
    train_epochs,
)
from swnet.weightgen import (
    LayerSpec,
    ParameterStore,
    allocate_templates,
    build_sharing_plan,
)


def aff(layer_id, out_ch, in_ch, member=0):
    return LayerSpec(layer_id, member, "affine", (out_ch, in_ch, 1, 1))


def small_ensemble(seed=0, budget=300):
    layers = []
    members = []
    lid = 0
    for m in range(2):
        mine = [aff(lid, 4, 3, member=m), aff(lid + 1, 4, 4, member=m)]
        lid += 2
        layers.extend(mine)
        members.append(MemberSpec(m, tuple(mine), (3, 4)))
    plan = build_sharing_plan([layers])
    alloc = allocate_templates(plan, budget=budget, reserve=0)
    plan.bank_sizes = alloc.bank_sizes
    store = ParameterStore(
        plan, layers, head_shapes={0: (3, 4), 1: (3, 4)}, seed=seed
    )
    return SharedEnsemble(store, members), plan


def batch(n=40, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, 3)), rng.integers(0, 3, size=n)


# ---- lr schedule ------------------------------------------------------------


def test_lr_schedule_steps():
    assert lr_for_epoch(0.1, 0.2, [], 1) == 0.1
    assert lr_for_epoch(0.1, 0.2, [5, 8], 4) == 0.1
    assert lr_for_epoch(0.1, 0.2, [5, 8], 5) == 0.1 * 0.2
    assert lr_for_epoch(0.1, 0.2, [5, 8], 7) == 0.1 * 0.2
    assert lr_for_epoch(0.1, 0.2, [5, 8], 8) == 0.1 * 0.2**2
    assert lr_for_epoch(0.1, 0.2, [5, 8], 30) == 0.1 * 0.2**2


def test_lr_schedule_decay_is_one_fifth():
    # each boundary multiplies the rate by exactly 0.2
    before = lr_for_epoch(1.0, 0.2, [3], 2)
    after = lr_for_epoch(1.0, 0.2, [3], 3)
    assert after == pytest.approx(before / 5.0)


def test_optimizer_exempts_coefficients_from_decay():
    model, _ = small_ensemble()
    cfg = TrainConfig(epochs=1, lr=0.1, weight_decay=5e-4)
    opt = build_optimizer(model, cfg)
    exempt = model.store.decay_exempt_ids()
    assert exempt  # the store holds at least one coefficient vector
    assert opt.decay_exempt == exempt


# ---- seeded shuffles --------------------------------------------------------


def test_identical_runs_bitwise_equal():
    x, y = batch()
    cfg = TrainConfig(epochs=3, batch_size=16, lr=0.05)
    outs = []
    for _ in range(2):
        model, _ = small_ensemble(seed=1)
        hist = train_epochs(model, x, y, cfg, seed=9, stream=MAIN_STREAM)
        outs.append((hist, {p.pid: p.data.copy() for p in model.store.parameters()}))
    assert outs[0][0] == outs[1][0]
    for label, val in outs[0][1].items():
        assert np.array_equal(val, outs[1][1][label])


def test_streams_are_independent():
    # the epoch shuffle depends only on (seed, stream, epoch), so a main
    # phase is unaffected by whether a warmup phase ran first
    x, y = batch()
    cfg = TrainConfig(epochs=2, batch_size=16, lr=0.05)

    model_a, _ = small_ensemble(seed=2)
    train_epochs(model_a, x, y, cfg, seed=9, stream=WARMUP_STREAM, epochs=1)

    perm_main = np.random.default_rng([9, MAIN_STREAM, 1]).permutation(len(x))
    perm_warm = np.random.default_rng([9, WARMUP_STREAM, 1]).permutation(len(x))
    assert not np.array_equal(perm_main, perm_warm)

    # same stream, different epochs, different orders
    perm_e2 = np.random.default_rng([9, MAIN_STREAM, 2]).permutation(len(x))
    assert not np.array_equal(perm_main, perm_e2)


def test_epochs_argument_overrides_config():
    x, y = batch()
    cfg = TrainConfig(epochs=5, batch_size=16, lr=0.05)
    model, _ = small_ensemble(seed=3)
    hist = train_epochs(model, x, y, cfg, seed=1, stream=MAIN_STREAM, epochs=2)
    assert len(hist) == 2


def test_loss_decreases_on_average():
    x, y = batch(n=120, seed=4)
    cfg = TrainConfig(epochs=8, batch_size=24, lr=0.1)
    model, _ = small_ensemble(seed=4)
    hist = train_epochs(model, x, y, cfg, seed=2, stream=MAIN_STREAM)
    assert hist[-1] < hist[0]


# ---- ledger recording -------------------------------------------------------


def test_ledger_records_exactly_one_epoch():
    x, y = batch(n=48)
    cfg = TrainConfig(epochs=3, batch_size=16, lr=0.05)
    model, plan = small_ensemble(seed=5)
    ledger = GradientLedger(plan)
    train_epochs(
        model, x, y, cfg, seed=7, stream=MAIN_STREAM,
        ledger=ledger, record_epochs={2},
    )
    assert ledger.batches == 3  # 48 examples / batch 16, one recorded epoch
    assert any(np.linalg.norm(v) > 0 for v in ledger.theta_sums.values())


def test_record_epochs_need_a_ledger():
    x, y = batch()
    cfg = TrainConfig(epochs=1, lr=0.05)
    model, _ = small_ensemble()
    with pytest.raises(ValueError, match="without a ledger"):
        train_epochs(
            model, x, y, cfg, seed=0, stream=MAIN_STREAM, record_epochs={1}
        )


def test_recording_window_resets_prior_evidence():
    # recording epochs 2 and 3 must leave only epoch-3 evidence, since the
    # ledger resets at the start of each recorded epoch
    x, y = batch(n=32)
    cfg = TrainConfig(epochs=3, batch_size=16, lr=0.05)

    model_a, plan_a = small_ensemble(seed=6)
    ledger_a = GradientLedger(plan_a)
    train_epochs(
        model_a, x, y, cfg, seed=3, stream=MAIN_STREAM,
        ledger=ledger_a, record_epochs={2, 3},
    )

    model_b, plan_b = small_ensemble(seed=6)
    ledger_b = GradientLedger(plan_b)
    train_epochs(
        model_b, x, y, cfg, seed=3, stream=MAIN_STREAM,
        ledger=ledger_b, record_epochs={3},
    )

    assert ledger_a.batches == ledger_b.batches == 2
    for key, val in ledger_a.theta_sums.items():
        assert np.array_equal(val, ledger_b.theta_sums[key])
