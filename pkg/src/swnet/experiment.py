"""End-to-end runs: search, train, refine, evaluate, and their artifacts.

A run writes one directory named by config hash and seed, containing the
resolved config, plan texts before and after refinement plus their diff, the
similarity table, the anytime schedule, a binary checkpoint, and a
schema-validated JSON report. Every artifact is a pure function of config
and seed; reports carry no timestamps so reruns are byte-identical.
"""

import csv
import json
import math
import os
import tempfile
from contextlib import contextmanager
from typing import Dict, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np

from .config import RunConfig, config_from_dict
from .data import make_dataset, split_indices
from .ensembles import (
    MemberSpec,
    SharedEnsemble,
    enumerate_anytime_schedule,
    interpolate_members,
    np_softmax,
    select_under_budget,
)
from .metrics import disagreement_diversity, evaluate_probs, top1_accuracy
from .search import (
    GradientLedger,
    depth_bin_grouping,
    kmeans,
    propose_groups,
    random_grouping,
    refine_coefficients,
    similarity_table,
)
from .training import MAIN_STREAM, WARMUP_STREAM, train_epochs
from .weightgen import (
    LayerSpec,
    ParameterStore,
    SharingPlan,
    diff_plans,
    load_checkpoint,
    save_checkpoint,
)
from .weightgen.plan import build_feasible_plan

REFINING_MODES = (
    "swn",
    "single_cluster",
    "random_cluster",
    "depth_bin",
    "coeff_cluster",
    "no_grad_sim",
)
SEARCH_MODES = ("swn", "no_refine")
SOFT_WARMUP_MODES = ("coeff_cluster", "no_grad_sim")


class StageError(RuntimeError):
    """An error tagged with the pipeline stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as err:
        raise StageError(name, err) from err


# ---- model construction ----------------------------------------------------


def member_layer_specs(
    cfg: RunConfig, input_dim: int
) -> Tuple[List[LayerSpec], List[MemberSpec], Dict[int, Tuple[int, int]]]:
    """Affine members: (width, input), then width x width, plus a head."""
    width = cfg.ensemble.width
    classes = cfg.dataset.classes
    layers: List[LayerSpec] = []
    members: List[MemberSpec] = []
    head_shapes: Dict[int, Tuple[int, int]] = {}
    lid = 0
    for m in range(cfg.ensemble.members):
        mine = []
        for d in range(cfg.ensemble.depth):
            in_ch = input_dim if d == 0 else width
            mine.append(LayerSpec(lid, m, "affine", (width, in_ch, 1, 1)))
            lid += 1
        layers.extend(mine)
        members.append(MemberSpec(m, tuple(mine), (classes, width)))
        head_shapes[m] = (classes, width)
    return layers, members, head_shapes


def reserve_count(
    layers: Sequence[LayerSpec], head_shapes: Dict[int, Tuple[int, int]]
) -> int:
    biases = sum(l.out_ch for l in layers)
    heads = sum(c * f + c for c, f in head_shapes.values())
    return biases + heads


def full_param_count(
    layers: Sequence[LayerSpec], head_shapes: Dict[int, Tuple[int, int]]
) -> int:
    return sum(l.param_count for l in layers) + reserve_count(layers, head_shapes)


# ---- search ----------------------------------------------------------------


def _grouping_stage(
    cfg: RunConfig,
    layers: List[LayerSpec],
    members: List[MemberSpec],
    head_shapes: Dict[int, Tuple[int, int]],
    x_train: np.ndarray,
    y_train: np.ndarray,
    budget: int,
    reserve: int,
) -> Tuple[List[List[LayerSpec]], dict]:
    mode = cfg.mode
    info: dict = {"policy": mode, "warmup_epochs": 0, "pairs": []}
    if mode == "single_cluster":
        return [list(layers)], info
    if mode == "random_cluster":
        k = min(cfg.search.random_groups, len(layers))
        return random_grouping(layers, k=k, seed=cfg.seed), info
    if mode == "depth_bin":
        return depth_bin_grouping(layers, bins=cfg.search.depth_bins), info

    soft = mode in SOFT_WARMUP_MODES
    plan0, alloc0, merges0 = build_feasible_plan(
        [layers], budget=budget, reserve=reserve, soft=soft
    )
    store0 = ParameterStore(
        plan0, layers, head_shapes=head_shapes, dtype=np.float32, seed=cfg.seed
    )
    model0 = SharedEnsemble(store0, members)
    ledger = GradientLedger(plan0)
    warmup = cfg.search.warmup_epochs
    train_epochs(
        model0,
        x_train,
        y_train,
        cfg.train,
        seed=cfg.seed,
        stream=WARMUP_STREAM,
        epochs=warmup,
        ledger=ledger,
        record_epochs={warmup},  # evidence comes from the final warmup epoch
    )
    info["warmup_epochs"] = warmup

    if soft:
        # cluster layers by their warmed-up coefficients on the chain's base slot
        groups: List[List[LayerSpec]] = []
        by_id = {l.layer_id: l for l in layers}
        for cluster in plan0.clusters:
            lids = list(cluster.layer_ids)
            base_sid = min(
                min(p.slot_id for p in plan0.placements[lid]) for lid in lids
            )
            feats = np.stack(
                [
                    store0.coeff_sets[plan0.coeff_assign[(lid, base_sid)]].alpha.data
                    for lid in lids
                ]
            )
            k = min(cfg.search.coeff_clusters, len(lids))
            labels = kmeans(feats, k=k, seed=cfg.seed + 31 * cluster.cluster_id)
            for lab in range(k):
                grp = [by_id[lid] for lid, l in zip(lids, labels) if l == lab]
                if grp:
                    groups.append(grp)
        info["policy"] = "coefficient_clusters"
        return groups, info

    psis = similarity_table(ledger)
    info["policy"] = "gradient_similarity"
    info["pairs"] = [
        {
            "layer_i": i,
            "layer_j": j,
            "shared_slots": ";".join(str(s) for s in plan0.shared_slots(i, j)),
            "psi": float(psi),
        }
        for (i, j), psi in sorted(psis.items())
    ]
    return propose_groups(layers, psis, tau=cfg.search.tau), info


# ---- artifacts -------------------------------------------------------------


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


REPORT_SCHEMA = {
    "type": "object",
    "required": [
        "mode",
        "seed",
        "config_hash",
        "budget",
        "search",
        "train",
        "refine",
        "eval",
        "anytime",
    ],
    "properties": {
        "mode": {"type": "string"},
        "seed": {"type": "integer"},
        "config_hash": {"type": "string"},
        "budget": {
            "type": "object",
            "required": [
                "full_params",
                "budget",
                "reserve",
                "committed",
                "leftover",
                "minimum",
                "merge_log",
            ],
            "properties": {
                "full_params": {"type": "integer"},
                "budget": {"type": "integer"},
                "reserve": {"type": "integer"},
                "committed": {"type": "integer"},
                "leftover": {"type": "integer"},
                "minimum": {"type": "integer"},
                "merge_log": {"type": "array", "items": {"type": "string"}},
            },
        },
        "search": {
            "type": "object",
            "required": ["policy", "warmup_epochs", "groups", "pairs"],
        },
        "train": {
            "type": "object",
            "required": ["epoch_losses"],
            "properties": {
                "epoch_losses": {"type": "array", "items": {"type": "number"}}
            },
        },
        "refine": {
            "type": "object",
            "required": ["applied", "log", "coeff_sets_before", "coeff_sets_after"],
        },
        "eval": {
            "type": "object",
            "required": ["per_member", "ensemble", "diversity"],
            "properties": {
                "ensemble": {
                    "type": "object",
                    "required": ["top1", "nll", "ece"],
                },
                "diversity": {
                    "type": "object",
                    "required": ["ordered", "symmetric"],
                    "properties": {
                        "ordered": {"type": ["number", "null"]},
                        "symmetric": {"type": ["number", "null"]},
                    },
                },
            },
        },
        "anytime": {
            "type": "object",
            "required": ["entries", "selected"],
        },
    },
}


def emit_report(path: str, report: dict) -> None:
    """Validate against the schema and write atomically."""
    jsonschema.validate(report, REPORT_SCHEMA)
    blob = json.dumps(report, sort_keys=True, indent=2)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(blob + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---- the run ---------------------------------------------------------------


def _serialize_members(members: Sequence[MemberSpec]) -> list:
    return [
        {
            "member_id": m.member_id,
            "head": list(m.head_shape),
            "layers": [
                {
                    "layer_id": l.layer_id,
                    "member_id": l.member_id,
                    "kind": l.kind,
                    "shape": list(l.weight_shape),
                }
                for l in m.layers
            ],
        }
        for m in members
    ]


def _deserialize_members(
    blobs: list,
) -> Tuple[List[LayerSpec], List[MemberSpec], Dict[int, Tuple[int, int]]]:
    layers: List[LayerSpec] = []
    members: List[MemberSpec] = []
    head_shapes: Dict[int, Tuple[int, int]] = {}
    for blob in blobs:
        mine = [
            LayerSpec(
                l["layer_id"], l["member_id"], l["kind"], tuple(l["shape"])
            )
            for l in blob["layers"]
        ]
        layers.extend(mine)
        head = (int(blob["head"][0]), int(blob["head"][1]))
        members.append(MemberSpec(int(blob["member_id"]), tuple(mine), head))
        head_shapes[int(blob["member_id"])] = head
    return layers, members, head_shapes


def _load_splits(cfg: RunConfig):
    x, y = make_dataset(
        cfg.dataset.kind,
        n=cfg.dataset.n,
        classes=cfg.dataset.classes,
        noise=cfg.dataset.noise,
        input_dim=cfg.dataset.input_dim,
        separation=cfg.dataset.separation,
        seed=cfg.seed,
        path=cfg.dataset.path,
    )
    idx = split_indices(len(x), cfg.splits.as_dict(), seed=cfg.seed)
    return {name: (x[i], y[i]) for name, i in idx.items()}


def _check_budget_invariants(store: ParameterStore, budget: int, where: str) -> None:
    committed = store.committed_trainable()
    materialized = store.total_trainable()
    if committed > budget:
        raise RuntimeError(
            f"{where}: committed {committed} exceeds budget {budget}"
        )
    if materialized > committed:
        raise RuntimeError(
            f"{where}: materialized {materialized} exceeds committed {committed}"
        )


def _member_probs(model: SharedEnsemble, x: np.ndarray) -> Dict[int, np.ndarray]:
    return {
        m.member_id: np_softmax(model.member_logits(m.member_id, x))
        for m in model.members
    }


def _eval_block(model: SharedEnsemble, x, y, bins: int) -> dict:
    probs = _member_probs(model, x)
    per_member = {
        str(mid): evaluate_probs(p, y, bins=bins) for mid, p in probs.items()
    }
    ens = evaluate_probs(np.mean(list(probs.values()), axis=0), y, bins=bins)
    preds = {mid: p.argmax(axis=1) for mid, p in probs.items()}
    diversity: Dict[str, Optional[float]] = {"ordered": None, "symmetric": None}
    if len(preds) >= 2:
        try:
            diversity["ordered"] = disagreement_diversity(preds, y)
            diversity["symmetric"] = disagreement_diversity(preds, y, symmetric=True)
        except ValueError:
            pass  # a zero-error member leaves the ratio undefined
    return {"per_member": per_member, "ensemble": ens, "diversity": diversity}


def run_experiment(cfg: RunConfig, out_root: str) -> Tuple[dict, str]:
    run_dir = os.path.join(out_root, f"{cfg.config_hash()}-s{cfg.seed}")
    os.makedirs(run_dir, exist_ok=True)
    with open(os.path.join(run_dir, "config.json"), "w") as fh:
        json.dump(cfg.resolved(), fh, sort_keys=True, indent=2)

    with _stage("setup"):
        splits = _load_splits(cfg)
        x_train, y_train = splits["train"]
        input_dim = int(x_train.shape[1])
        layers, members, head_shapes = member_layer_specs(cfg, input_dim)
        reserve = reserve_count(layers, head_shapes)
        full = full_param_count(layers, head_shapes)
        budget = int(math.floor(cfg.budget_fraction * full))

    with _stage("search"):
        groups, search_info = _grouping_stage(
            cfg, layers, members, head_shapes, x_train, y_train, budget, reserve
        )
        plan, alloc, merge_log = build_feasible_plan(
            groups, budget=budget, reserve=reserve
        )
        search_info["groups"] = [
            sorted(l.layer_id for l in g) for g in groups
        ]
        write_csv(
            os.path.join(run_dir, "similarity.csv"),
            ["layer_i", "layer_j", "shared_slots", "psi"],
            [
                [p["layer_i"], p["layer_j"], p["shared_slots"], repr(p["psi"])]
                for p in search_info["pairs"]
            ],
        )

    with _stage("train"):
        store = ParameterStore(
            plan, layers, head_shapes=head_shapes, dtype=np.float32,
            seed=cfg.seed + 1,
        )
        model = SharedEnsemble(store, members)
        _check_budget_invariants(store, budget, "after allocation")
        plan_before = SharingPlan.from_text(plan.to_text())
        with open(os.path.join(run_dir, "plan_initial.txt"), "w") as fh:
            fh.write(plan.to_text())

        refining = cfg.mode in REFINING_MODES
        coeff_sets_before = len(plan.coeff_slot)
        refine_log: List[str] = []
        ledger = GradientLedger(plan) if refining else None

        def after_epoch(epoch: int) -> None:
            if refining and epoch == cfg.refine.epoch:
                with _stage("refine"):
                    refine_log.extend(
                        refine_coefficients(store, ledger, beta=cfg.refine.beta)
                    )
                    _check_budget_invariants(store, budget, "after refinement")

        history = train_epochs(
            model,
            x_train,
            y_train,
            cfg.train,
            seed=cfg.seed,
            stream=MAIN_STREAM,
            ledger=ledger,
            record_epochs={cfg.refine.epoch} if refining else (),
            after_epoch=after_epoch,
        )
        _check_budget_invariants(store, budget, "after training")
        with open(os.path.join(run_dir, "plan_final.txt"), "w") as fh:
            fh.write(plan.to_text())
        with open(os.path.join(run_dir, "plan_diff.txt"), "w") as fh:
            fh.write(diff_plans(plan_before, plan) + "\n")

    with _stage("eval"):
        x_test, y_test = splits["test"]
        eval_block = _eval_block(model, x_test, y_test, cfg.eval.ece_bins)

        x_val, y_val = splits["val"]
        entries = enumerate_anytime_schedule(members, (input_dim,))
        val_probs = _member_probs(model, x_val)
        scored = []
        for e in entries:
            mean = np.mean([val_probs[mid] for mid in e.member_ids], axis=0)
            scored.append((e, top1_accuracy(mean, y_val)))
        write_csv(
            os.path.join(run_dir, "anytime.csv"),
            ["bitmask", "member_ids", "cost", "val_top1"],
            [
                [e.bitmask, ";".join(str(m) for m in e.member_ids), e.cost, repr(acc)]
                for e, acc in scored
            ],
        )
        selected = None
        if cfg.eval.anytime_budget is not None:
            entry, val_acc = select_under_budget(scored, cfg.eval.anytime_budget)
            test_mean = np.mean(
                [_member_probs(model, x_test)[mid] for mid in entry.member_ids],
                axis=0,
            )
            selected = {
                "bitmask": entry.bitmask,
                "member_ids": list(entry.member_ids),
                "cost": entry.cost,
                "val_top1": val_acc,
                "test_top1": top1_accuracy(test_mean, y_test),
            }

    with _stage("report"):
        save_checkpoint(
            os.path.join(run_dir, "model.swck"),
            store,
            meta={
                "config": cfg.resolved(),
                "members": _serialize_members(members),
                "input_dim": input_dim,
            },
        )
        report = {
            "mode": cfg.mode,
            "seed": cfg.seed,
            "config_hash": cfg.config_hash(),
            "budget": {
                "full_params": full,
                "budget": budget,
                "reserve": reserve,
                "committed": alloc.committed,
                "leftover": alloc.leftover,
                "minimum": alloc.minimum,
                "merge_log": list(merge_log),
            },
            "search": search_info,
            "train": {"epoch_losses": [float(v) for v in history]},
            "refine": {
                "applied": cfg.mode in REFINING_MODES,
                "log": refine_log,
                "coeff_sets_before": coeff_sets_before,
                "coeff_sets_after": len(plan.coeff_slot),
            },
            "eval": eval_block,
            "anytime": {
                "entries": [
                    {
                        "bitmask": e.bitmask,
                        "member_ids": list(e.member_ids),
                        "cost": e.cost,
                        "val_top1": acc,
                    }
                    for e, acc in scored
                ],
                "selected": selected,
            },
        }
        emit_report(os.path.join(run_dir, "report.json"), report)
    return report, run_dir


def search_only(cfg: RunConfig, out_root: str) -> Tuple[dict, str]:
    """Run setup and search, then stop: plan, similarity table, summary."""
    run_dir = os.path.join(out_root, f"{cfg.config_hash()}-s{cfg.seed}")
    os.makedirs(run_dir, exist_ok=True)
    with _stage("setup"):
        splits = _load_splits(cfg)
        x_train, y_train = splits["train"]
        input_dim = int(x_train.shape[1])
        layers, members, head_shapes = member_layer_specs(cfg, input_dim)
        reserve = reserve_count(layers, head_shapes)
        full = full_param_count(layers, head_shapes)
        budget = int(math.floor(cfg.budget_fraction * full))
    with _stage("search"):
        groups, search_info = _grouping_stage(
            cfg, layers, members, head_shapes, x_train, y_train, budget, reserve
        )
        plan, alloc, merge_log = build_feasible_plan(
            groups, budget=budget, reserve=reserve
        )
        search_info["groups"] = [sorted(l.layer_id for l in g) for g in groups]
        write_csv(
            os.path.join(run_dir, "similarity.csv"),
            ["layer_i", "layer_j", "shared_slots", "psi"],
            [
                [p["layer_i"], p["layer_j"], p["shared_slots"], repr(p["psi"])]
                for p in search_info["pairs"]
            ],
        )
        with open(os.path.join(run_dir, "plan_initial.txt"), "w") as fh:
            fh.write(plan.to_text())
        summary = {
            "mode": cfg.mode,
            "seed": cfg.seed,
            "config_hash": cfg.config_hash(),
            "budget": {
                "full_params": full,
                "budget": budget,
                "reserve": reserve,
                "committed": alloc.committed,
                "leftover": alloc.leftover,
                "minimum": alloc.minimum,
                "merge_log": list(merge_log),
            },
            "search": search_info,
        }
        with open(os.path.join(run_dir, "search.json"), "w") as fh:
            fh.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return summary, run_dir


# ---- checkpoint-driven entry points ----------------------------------------


def model_from_checkpoint(path: str) -> Tuple[SharedEnsemble, RunConfig, dict]:
    data = load_checkpoint(path)
    meta = data.meta
    cfg = config_from_dict(meta["config"])
    layers, members, head_shapes = _deserialize_members(meta["members"])
    store = ParameterStore(
        data.plan, layers, head_shapes=head_shapes, dtype=data.dtype, seed=0
    )
    for bid, arr in data.bank_arrays.items():
        for i, tpl in enumerate(store.banks[bid].templates):
            tpl.data[...] = arr[i]
    for cid, arr in data.coeff_arrays.items():
        store.coeff_sets[cid].alpha.data[...] = arr
    for lid, b in store.biases.items():
        b.data[...] = data.extras[f"bias:{lid}"]
    for mid, (w, b) in store.heads.items():
        w.data[...] = data.extras[f"head:{mid}:w"]
        b.data[...] = data.extras[f"head:{mid}:b"]
    return SharedEnsemble(store, members), cfg, meta


def evaluate_checkpoint(path: str, split: str = "test") -> dict:
    model, cfg, _ = model_from_checkpoint(path)
    splits = _load_splits(cfg)
    if split not in splits:
        raise ValueError(f"unknown split {split!r}, expected one of {sorted(splits)}")
    x, y = splits[split]
    out = _eval_block(model, x, y, cfg.eval.ece_bins)
    out["split"] = split
    out["examples"] = int(len(y))
    return out


def anytime_from_checkpoint(
    path: str, budget: Optional[int] = None
) -> Tuple[List[dict], Optional[dict]]:
    model, cfg, meta = model_from_checkpoint(path)
    splits = _load_splits(cfg)
    x_val, y_val = splits["val"]
    x_test, y_test = splits["test"]
    entries = enumerate_anytime_schedule(model.members, (int(meta["input_dim"]),))
    val_probs = _member_probs(model, x_val)
    scored = []
    for e in entries:
        mean = np.mean([val_probs[mid] for mid in e.member_ids], axis=0)
        scored.append((e, top1_accuracy(mean, y_val)))
    rows = [
        {
            "bitmask": e.bitmask,
            "member_ids": list(e.member_ids),
            "cost": e.cost,
            "val_top1": acc,
        }
        for e, acc in scored
    ]
    selected = None
    if budget is not None:
        entry, val_acc = select_under_budget(scored, budget)
        test_probs = _member_probs(model, x_test)
        mean = np.mean([test_probs[mid] for mid in entry.member_ids], axis=0)
        selected = {
            "bitmask": entry.bitmask,
            "member_ids": list(entry.member_ids),
            "cost": entry.cost,
            "val_top1": val_acc,
            "test_top1": top1_accuracy(mean, y_test),
        }
    return rows, selected


def interpolate_from_checkpoint(
    path: str, member_a: int, member_b: int, steps: int
) -> List[dict]:
    """Evaluate blends between two members on the test split."""
    if steps < 2:
        raise ValueError(f"steps must be at least 2, got {steps}")
    model, cfg, _ = model_from_checkpoint(path)
    splits = _load_splits(cfg)
    x, y = splits["test"]
    rows = []
    for k in range(steps):
        lam = k / (steps - 1)
        frozen = interpolate_members(model, member_a, member_b, lam)
        probs = np_softmax(frozen.predict_logits(x))
        stats = evaluate_probs(probs, y, bins=cfg.eval.ece_bins)
        rows.append({"lam": lam, **stats})
    return rows
