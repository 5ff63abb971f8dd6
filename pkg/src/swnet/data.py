"""Synthetic datasets, raw-array file loading, and deterministic splits."""

import json
import os
from typing import Dict, Optional, Tuple

import numpy as np

Arrays = Tuple[np.ndarray, np.ndarray]


def spirals(
    n: int, classes: int = 3, noise: float = 0.15, seed: int = 0, turns: float = 1.5
) -> Arrays:
    """Interleaved 2-d spiral arms, one per class, radius growing with angle."""
    if n < classes:
        raise ValueError(f"need at least one point per class, got n={n}")
    rng = np.random.default_rng([seed, 11])
    counts = [n // classes + (1 if c < n % classes else 0) for c in range(classes)]
    xs, ys = [], []
    for c, m in enumerate(counts):
        t = np.linspace(0.05, 1.0, m)
        angle = 2.0 * np.pi * (turns * t + c / classes)
        pts = np.stack([t * np.cos(angle), t * np.sin(angle)], axis=1)
        pts += noise * rng.normal(size=pts.shape) * t[:, None]
        xs.append(pts)
        ys.append(np.full(m, c, dtype=np.int64))
    x = np.concatenate(xs).astype(np.float32)
    y = np.concatenate(ys)
    perm = rng.permutation(len(y))
    return x[perm], y[perm]


def gaussians(
    n: int,
    classes: int = 3,
    dim: int = 2,
    separation: float = 4.0,
    noise: float = 1.0,
    seed: int = 0,
) -> Arrays:
    """Class means spaced on a circle in the first two dims; isotropic noise.

    With noise 0 every point sits exactly on its class mean, so a linear
    model separates the classes perfectly.
    """
    if dim < 2:
        raise ValueError(f"gaussians need dim >= 2, got {dim}")
    rng = np.random.default_rng([seed, 13])
    means = np.zeros((classes, dim))
    angles = 2.0 * np.pi * np.arange(classes) / classes
    means[:, 0] = separation * np.cos(angles)
    means[:, 1] = separation * np.sin(angles)
    y = rng.integers(0, classes, size=n)
    x = means[y] + noise * rng.normal(size=(n, dim))
    return x.astype(np.float32), y


def save_raw_array(path: str, x: np.ndarray, y: np.ndarray) -> None:
    """Write features as little-endian float32 with a JSON sidecar.

    The sidecar (path + ".json") records dtype, shape, and the labels.
    """
    x = np.ascontiguousarray(x, dtype="<f4")
    y = np.asarray(y)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ValueError(
            f"need features (n, d) with matching labels, got {x.shape} and {y.shape}"
        )
    with open(path, "wb") as fh:
        fh.write(x.tobytes())
    sidecar = {
        "dtype": "float32",
        "byte_order": "little",
        "shape": list(x.shape),
        "labels": [int(v) for v in y],
    }
    with open(path + ".json", "w") as fh:
        json.dump(sidecar, fh)


def load_raw_array(path: str) -> Arrays:
    sidecar_path = path + ".json"
    if not os.path.exists(sidecar_path):
        raise FileNotFoundError(f"missing sidecar {sidecar_path}")
    with open(sidecar_path) as fh:
        try:
            sidecar = json.load(fh)
        except json.JSONDecodeError as err:
            raise ValueError(f"sidecar {sidecar_path} is not valid JSON: {err}")
    for field in ("dtype", "shape", "labels"):
        if field not in sidecar:
            raise ValueError(f"sidecar {sidecar_path} lacks field {field!r}")
    if sidecar["dtype"] != "float32":
        raise ValueError(f"unsupported dtype {sidecar['dtype']!r}, expected float32")
    shape = tuple(int(d) for d in sidecar["shape"])
    if len(shape) != 2:
        raise ValueError(f"shape must be (n, d), got {shape}")
    expected = shape[0] * shape[1] * 4
    actual = os.path.getsize(path)
    if actual != expected:
        raise ValueError(
            f"{path} holds {actual} bytes but shape {shape} needs {expected} "
            f"(mismatch at byte {min(actual, expected)})"
        )
    with open(path, "rb") as fh:
        x = np.frombuffer(fh.read(), dtype="<f4").reshape(shape)
    y = np.asarray(sidecar["labels"], dtype=np.int64)
    if y.shape != (shape[0],):
        raise ValueError(
            f"sidecar lists {y.shape[0]} labels for {shape[0]} examples"
        )
    return x.copy(), y


def split_indices(
    n: int, fractions: Dict[str, float], seed: int
) -> Dict[str, np.ndarray]:
    """Disjoint index sets covering range(n), sized by fractions, seeded."""
    total = sum(fractions.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {total}")
    rng = np.random.default_rng([seed, 17])
    perm = rng.permutation(n)
    out: Dict[str, np.ndarray] = {}
    start = 0
    names = list(fractions)
    for i, name in enumerate(names):
        if i == len(names) - 1:
            stop = n
        else:
            stop = start + int(round(fractions[name] * n))
        out[name] = perm[start:stop]
        start = stop
    return out


def make_dataset(
    kind: str,
    n: int,
    classes: int,
    noise: float,
    input_dim: int,
    separation: float,
    seed: int,
    path: Optional[str] = None,
) -> Arrays:
    if kind == "spirals":
        return spirals(n, classes=classes, noise=noise, seed=seed)
    if kind == "gaussians":
        return gaussians(
            n, classes=classes, dim=input_dim, separation=separation,
            noise=noise, seed=seed,
        )
    if kind == "file":
        if path is None:
            raise ValueError("file datasets need a path")
        return load_raw_array(path)
    raise ValueError(f"unknown dataset kind {kind!r}")
