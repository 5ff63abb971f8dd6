"""Synthetic datasets, raw-file round trips, and split determinism."""

import json

import numpy as np
import pytest

from swnet.data import (
    gaussians,
    load_raw_array,
    make_dataset,
    save_raw_array,
    spirals,
    split_indices,
)


# ---- spirals ----------------------------------------------------------------


def test_spirals_shapes_and_labels():
    x, y = spirals(301, classes=3, noise=0.1, seed=4)
    assert x.shape == (301, 2) and x.dtype == np.float32
    assert y.shape == (301,) and y.dtype == np.int64
    # 301 = 3 * 100 + 1, the remainder goes to the first class
    counts = np.bincount(y, minlength=3)
    assert sorted(counts.tolist()) == [100, 100, 101]


def test_spirals_deterministic_and_seed_sensitive():
    a = spirals(120, seed=9)
    b = spirals(120, seed=9)
    c = spirals(120, seed=10)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert not np.array_equal(a[0], c[0])


def test_spirals_radius_grows_with_noise_zero():
    x, y = spirals(90, classes=3, noise=0.0, seed=0)
    # noiseless arms live on radius t in [0.05, 1]
    r = np.linalg.norm(x, axis=1)
    assert r.min() >= 0.05 - 1e-6 and r.max() <= 1.0 + 1e-6


def test_spirals_rejects_fewer_points_than_classes():
    with pytest.raises(ValueError, match="at least one point per class"):
        spirals(2, classes=3)


# ---- gaussians --------------------------------------------------------------


def test_gaussians_zero_noise_linear_probe():
    # with noise 0 each point sits on its class mean; three means on a
    # circle are affinely independent, so a least-squares probe onto
    # one-hot targets interpolates them exactly and classifies perfectly
    x, y = gaussians(200, classes=3, dim=3, separation=3.0, noise=0.0, seed=2)
    onehot = np.eye(3)[y]
    design = np.concatenate([x, np.ones((len(x), 1))], axis=1)
    w, *_ = np.linalg.lstsq(design, onehot, rcond=None)
    pred = (design @ w).argmax(axis=1)
    assert np.array_equal(pred, y)


def test_gaussians_determinism_and_dim_check():
    a = gaussians(50, seed=7)
    b = gaussians(50, seed=7)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    with pytest.raises(ValueError, match="dim >= 2"):
        gaussians(10, dim=1)


def test_gaussians_means_on_circle():
    x, y = gaussians(300, classes=3, dim=2, separation=5.0, noise=0.0, seed=1)
    for c in range(3):
        pts = x[y == c]
        assert len(pts) > 0
        assert np.allclose(np.linalg.norm(pts, axis=1), 5.0, atol=1e-5)


# ---- raw-array files --------------------------------------------------------


def test_raw_array_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    x = rng.normal(size=(17, 5)).astype(np.float32)
    y = rng.integers(0, 4, size=17)
    path = str(tmp_path / "feat.bin")
    save_raw_array(path, x, y)
    x2, y2 = load_raw_array(path)
    assert np.array_equal(x, x2)
    assert np.array_equal(y, y2)
    assert x2.dtype == np.float32 and y2.dtype == np.int64


def test_raw_array_save_rejects_bad_shapes(tmp_path):
    path = str(tmp_path / "feat.bin")
    with pytest.raises(ValueError, match="matching labels"):
        save_raw_array(path, np.zeros((4, 2)), np.zeros(3))
    with pytest.raises(ValueError, match="matching labels"):
        save_raw_array(path, np.zeros(4), np.zeros(4))


def test_raw_array_missing_sidecar(tmp_path):
    path = str(tmp_path / "feat.bin")
    with open(path, "wb") as fh:
        fh.write(b"\x00" * 8)
    with pytest.raises(FileNotFoundError, match="missing sidecar"):
        load_raw_array(path)


def test_raw_array_truncated_payload(tmp_path):
    path = str(tmp_path / "feat.bin")
    save_raw_array(path, np.zeros((4, 3), dtype=np.float32), np.zeros(4, dtype=int))
    with open(path, "rb") as fh:
        blob = fh.read()
    with open(path, "wb") as fh:
        fh.write(blob[:-4])
    with pytest.raises(ValueError, match="mismatch at byte 44"):
        load_raw_array(path)


def test_raw_array_sidecar_errors(tmp_path):
    path = str(tmp_path / "feat.bin")
    save_raw_array(path, np.zeros((2, 2), dtype=np.float32), np.zeros(2, dtype=int))
    sidecar = path + ".json"

    with open(sidecar) as fh:
        good = json.load(fh)

    bad = dict(good)
    del bad["labels"]
    with open(sidecar, "w") as fh:
        json.dump(bad, fh)
    with pytest.raises(ValueError, match="lacks field 'labels'"):
        load_raw_array(path)

    bad = dict(good)
    bad["dtype"] = "float64"
    with open(sidecar, "w") as fh:
        json.dump(bad, fh)
    with pytest.raises(ValueError, match="unsupported dtype"):
        load_raw_array(path)

    bad = dict(good)
    bad["labels"] = [0]
    with open(sidecar, "w") as fh:
        json.dump(bad, fh)
    with pytest.raises(ValueError, match="lists 1 labels for 2 examples"):
        load_raw_array(path)

    with open(sidecar, "w") as fh:
        fh.write("{not json")
    with pytest.raises(ValueError, match="not valid JSON"):
        load_raw_array(path)


# ---- splits -----------------------------------------------------------------


def test_split_indices_disjoint_cover():
    fr = {"train": 0.7, "val": 0.15, "test": 0.15}
    for seed in range(10):
        out = split_indices(203, fr, seed)
        joined = np.concatenate([out[k] for k in fr])
        assert sorted(joined.tolist()) == list(range(203))
        assert len(out["train"]) == round(0.7 * 203)
        assert len(out["val"]) == round(0.15 * 203)


def test_split_indices_deterministic():
    fr = {"train": 0.5, "val": 0.25, "test": 0.25}
    a = split_indices(64, fr, seed=5)
    b = split_indices(64, fr, seed=5)
    c = split_indices(64, fr, seed=6)
    for k in fr:
        assert np.array_equal(a[k], b[k])
    assert any(not np.array_equal(a[k], c[k]) for k in fr)


def test_split_indices_fraction_check():
    with pytest.raises(ValueError, match="sum to 1"):
        split_indices(10, {"train": 0.5, "test": 0.4}, seed=0)


# ---- dataset dispatch -------------------------------------------------------


def test_make_dataset_dispatch(tmp_path):
    x, y = make_dataset("spirals", 60, 3, 0.1, 2, 4.0, seed=1)
    assert x.shape == (60, 2)
    x, y = make_dataset("gaussians", 60, 3, 0.5, 4, 4.0, seed=1)
    assert x.shape == (60, 4)

    path = str(tmp_path / "d.bin")
    save_raw_array(
        path,
        np.arange(12, dtype=np.float32).reshape(6, 2),
        np.array([0, 1, 0, 1, 0, 1]),
    )
    x, y = make_dataset("file", 0, 2, 0.0, 2, 4.0, seed=1, path=path)
    assert x.shape == (6, 2)

    with pytest.raises(ValueError, match="need a path"):
        make_dataset("file", 0, 2, 0.0, 2, 4.0, seed=1)
    with pytest.raises(ValueError, match="unknown dataset kind"):
        make_dataset("moons", 10, 2, 0.0, 2, 4.0, seed=1)
