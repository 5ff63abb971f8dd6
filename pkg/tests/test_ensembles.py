"""Shared-store ensembles: forward, gradients, anytime schedules, blending."""

import numpy as np
import pytest

from swnet.ensembles import (
    AnytimeEntry,
    MemberSpec,
    SharedEnsemble,
    ensemble_predict,
    enumerate_anytime_schedule,
    interpolate_members,
    member_cost,
    np_softmax,
    select_under_budget,
)
from swnet.numerics import SGD, finite_diff_check
from swnet.weightgen import (
    LayerSpec,
    ParameterStore,
    allocate_templates,
    build_sharing_plan,
)


def aff(layer_id, out_ch, in_ch, member=0):
    return LayerSpec(layer_id, member, "affine", (out_ch, in_ch, 1, 1))


def conv(layer_id, out_ch, in_ch, k, member=0):
    return LayerSpec(layer_id, member, "conv2d", (out_ch, in_ch, k, k))


def mlp_ensemble(n_members=2, in_dim=3, width=4, classes=3, budget=400, seed=0,
                 dtype=np.float64):
    layers = []
    members = []
    lid = 0
    for m in range(n_members):
        mine = [aff(lid, width, in_dim, member=m), aff(lid + 1, width, width, member=m)]
        lid += 2
        layers.extend(mine)
        members.append(MemberSpec(m, tuple(mine), (classes, width)))
    plan = build_sharing_plan([layers])
    alloc = allocate_templates(plan, budget=budget, reserve=0)
    plan.bank_sizes = alloc.bank_sizes
    store = ParameterStore(
        plan, layers, head_shapes={m: (classes, width) for m in range(n_members)},
        dtype=dtype, seed=seed,
    )
    return SharedEnsemble(store, members)


def batch(seed=0, n=6, d=3, classes=3):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, d)), rng.integers(0, classes, size=n)


# ---- member spec -----------------------------------------------------------


def test_member_spec_validation():
    with pytest.raises(ValueError, match="no generated layers"):
        MemberSpec(0, (), (3, 4))
    with pytest.raises(ValueError, match="belongs to member"):
        MemberSpec(0, (aff(0, 4, 3, member=1),), (3, 4))
    with pytest.raises(ValueError, match="head expects"):
        MemberSpec(0, (aff(0, 4, 3),), (3, 5))


# ---- forward + gradients ---------------------------------------------------


class _EnsembleAdapter:
    def __init__(self, model, x, y):
        self.model = model
        self.x = x
        self.y = y

    def loss(self):
        return self.model.loss(self.x, self.y)

    def loss_and_grads(self):
        loss, grads, _ = self.model.loss_and_grads(self.x, self.y)
        return loss, grads

    def parameters(self):
        return self.model.store.parameters()


def jitter_params(store, seed, scale=0.05):
    """Nudge every parameter off zero so no relu input sits on its kink.

    Zero-initialized biases otherwise leave dead examples exactly at the
    kink, where central differences disagree with the subgradient.
    """
    rng = np.random.default_rng(seed)
    for p in store.parameters():
        p.data += rng.uniform(0.01, scale, size=p.data.shape)


def test_gradients_finite_difference_full_stack():
    model = mlp_ensemble()
    jitter_params(model.store, seed=20)
    x, y = batch()
    err = finite_diff_check(_EnsembleAdapter(model, x, y), epsilon=1e-6,
                            max_entries_per_param=3)
    assert err < 1e-5


def test_gradients_finite_difference_conv_member():
    layers = [conv(0, 3, 2, 3, member=0), aff(1, 4, 3, member=0)]
    plan = build_sharing_plan([layers])
    alloc = allocate_templates(plan, budget=200, reserve=0)
    plan.bank_sizes = alloc.bank_sizes
    store = ParameterStore(plan, layers, head_shapes={0: (2, 4)},
                           dtype=np.float64, seed=1)
    member = MemberSpec(0, tuple(layers), (2, 4))
    model = SharedEnsemble(store, [member])
    jitter_params(store, seed=21)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(3, 2, 5, 5))
    y = rng.integers(0, 2, size=3)
    err = finite_diff_check(_EnsembleAdapter(model, x, y), epsilon=1e-6,
                            max_entries_per_param=3)
    assert err < 1e-5


def test_grads_cover_every_store_parameter():
    model = mlp_ensemble()
    x, y = batch()
    _, grads, (dl_dtheta, contribs) = model.loss_and_grads(x, y)
    pids = {p.pid for p in model.store.parameters()}
    assert set(grads) == pids
    for key in model.store.plan.coeff_assign:
        assert key in dl_dtheta and key in contribs


def test_template_perturbation_reaches_every_member():
    model = mlp_ensemble()
    x, _ = batch()
    before = [model.member_logits(m, x).copy() for m in (0, 1)]
    model.store.banks[0].templates[0].data += 0.5
    after = [model.member_logits(m, x) for m in (0, 1)]
    for b, a in zip(before, after):
        assert np.abs(b - a).max() > 1e-6


def test_member_loss_weights_zero_silences_member():
    model = mlp_ensemble()
    x, y = batch()
    solo = SharedEnsemble(model.store, model.members, member_loss_weights=[1.0, 0.0])
    loss, grads, _ = solo.loss_and_grads(x, y)
    # member 1's head never sees loss, so its gradient is exactly zero
    assert not grads["head:1:w"].any()
    assert grads["head:0:w"].any()


def test_training_reduces_loss():
    model = mlp_ensemble(seed=4)
    jitter_params(model.store, seed=22)
    x, y = batch(seed=5)
    store = model.store
    opt = SGD(store.parameters(), lr=0.1, momentum=0.9, weight_decay=0.0)
    first, *_ = model.loss_and_grads(x, y)
    for _ in range(60):
        _, grads, _ = model.loss_and_grads(x, y)
        opt.step(grads)
    last = model.loss(x, y)
    assert last < first * 0.7


def test_loss_and_grads_deterministic():
    x, y = batch(seed=6)
    a = mlp_ensemble(seed=7)
    b = mlp_ensemble(seed=7)
    la, ga, _ = a.loss_and_grads(x, y)
    lb, gb, _ = b.loss_and_grads(x, y)
    assert la == lb
    for pid in ga:
        assert np.array_equal(ga[pid], gb[pid])


# ---- prediction ------------------------------------------------------------


def test_ensemble_predict_is_mean_of_member_softmax():
    model = mlp_ensemble()
    x, _ = batch()
    probs = ensemble_predict(model, x)
    manual = np.mean(
        [np_softmax(model.member_logits(m, x)) for m in (0, 1)], axis=0
    )
    np.testing.assert_allclose(probs, manual)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    solo = ensemble_predict(model, x, member_ids=[1])
    np.testing.assert_allclose(solo, np_softmax(model.member_logits(1, x)))
    with pytest.raises(ValueError, match="at least one member"):
        ensemble_predict(model, x, member_ids=[])


# ---- anytime ---------------------------------------------------------------


def test_member_cost_hand_values():
    m = MemberSpec(0, (aff(0, 3, 2), aff(1, 3, 3)), (2, 3))
    assert member_cost(m, (2,)) == 6 + 9 + 6
    c = MemberSpec(1, (conv(2, 4, 3, 3, member=1),), (2, 4))
    assert member_cost(c, (3, 8, 8)) == 4 * 3 * 9 * 64 + 8


def test_schedule_four_members_has_fifteen_entries():
    members = [
        MemberSpec(m, (aff(2 * m, 4, 3, member=m), aff(2 * m + 1, 4, 4, member=m)), (3, 4))
        for m in range(4)
    ]
    entries = enumerate_anytime_schedule(members, (3,))
    assert len(entries) == 15
    costs = [e.cost for e in entries]
    assert costs == sorted(costs)
    # identical members: equal-cost ties are ordered by bitmask
    singles = [e for e in entries if bin(e.bitmask).count("1") == 1]
    assert [e.bitmask for e in singles] == [1, 2, 4, 8]
    full = entries[-1]
    assert full.member_ids == (0, 1, 2, 3)
    assert full.cost == 4 * singles[0].cost


def test_select_under_budget_prefers_accuracy_then_cost():
    a = AnytimeEntry(1, (0,), 10)
    b = AnytimeEntry(2, (1,), 20)
    ab = AnytimeEntry(3, (0, 1), 30)
    scored = [(a, 0.7), (b, 0.6), (ab, 0.75)]
    assert select_under_budget(scored, 25)[0] is a
    assert select_under_budget(scored, 30)[0] is ab
    # equal accuracy: cheaper entry wins
    assert select_under_budget([(a, 0.7), (b, 0.7)], 30)[0] is a
    with pytest.raises(ValueError, match="cheapest costs 10"):
        select_under_budget(scored, 5)


def test_select_under_budget_monotone_in_budget():
    rng = np.random.default_rng(9)
    entries = [AnytimeEntry(i + 1, (i,), int(c)) for i, c in
               enumerate(rng.integers(5, 100, size=8))]
    scored = [(e, float(rng.random())) for e in entries]
    best = -1.0
    for budget in range(0, 120, 5):
        try:
            _, acc = select_under_budget(scored, budget)
        except ValueError:
            continue
        assert acc >= best
        best = acc


# ---- interpolation ---------------------------------------------------------


def test_interpolation_endpoints_match_members_exactly():
    model = mlp_ensemble(seed=11)
    x, _ = batch(seed=12)
    f0 = interpolate_members(model, 0, 1, 0.0)
    f1 = interpolate_members(model, 0, 1, 1.0)
    np.testing.assert_array_equal(f0.predict_logits(x), model.member_logits(0, x))
    np.testing.assert_array_equal(f1.predict_logits(x), model.member_logits(1, x))
    mid = interpolate_members(model, 0, 1, 0.5)
    assert mid.predict_logits(x).shape == (len(x), 3)


def test_interpolation_rejects_architecture_mismatch():
    layers = [aff(0, 4, 3, member=0), aff(1, 5, 3, member=1)]
    plan = build_sharing_plan([[layers[0]], [layers[1]]])
    alloc = allocate_templates(plan, budget=100, reserve=0)
    plan.bank_sizes = alloc.bank_sizes
    store = ParameterStore(plan, layers, head_shapes={0: (2, 4), 1: (2, 5)},
                           dtype=np.float64, seed=0)
    members = [MemberSpec(0, (layers[0],), (2, 4)), MemberSpec(1, (layers[1],), (2, 5))]
    model = SharedEnsemble(store, members)
    with pytest.raises(ValueError, match="differ in architecture"):
        interpolate_members(model, 0, 1, 0.5)


def test_frozen_conv_member_matches_live_forward():
    layers = [conv(0, 3, 2, 3, member=0), aff(1, 4, 3, member=0)]
    plan = build_sharing_plan([layers])
    plan.bank_sizes = allocate_templates(plan, budget=200, reserve=0).bank_sizes
    store = ParameterStore(plan, layers, head_shapes={0: (2, 4)},
                           dtype=np.float64, seed=3)
    member = MemberSpec(0, tuple(layers), (2, 4))
    model = SharedEnsemble(store, [member])
    rng = np.random.default_rng(4)
    x = rng.normal(size=(2, 2, 5, 5))
    frozen = interpolate_members(model, 0, 0, 0.0)
    np.testing.assert_allclose(frozen.predict_logits(x), model.member_logits(0, x),
                               rtol=1e-12, atol=1e-12)
