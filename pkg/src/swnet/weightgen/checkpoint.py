"""Binary checkpoint container.

Layout, all integers little-endian:
  magic   8 bytes  b"SWNCKPT\\x00"
  u32     format version (currently 1)
  u8      float width in bytes: 4 or 8
  u32+n   meta JSON (free-form, filled by the harness)
  u32+n   sharing plan as structured text
  u32     bank count, then per bank:
            u32 bank_id, u32 n_templates, 4 x u32 slot shape, raw template data
  u32     coefficient-set count, then per set:
            u32 coeff_id, u32 slot_id, u32 n_owners, owners, u32 len, raw alphas
  u32     extra-array count, then per array (biases, heads):
            u16+n name, u8 ndim, dims, raw data
Float payloads are written as-is at the declared width, so a save/load cycle
is bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .types import SharingPlan

MAGIC = b"SWNCKPT\x00"
VERSION = 1


@dataclass
class CheckpointData:
    plan: SharingPlan
    meta: dict
    bank_arrays: Dict[int, np.ndarray]  # bank_id -> (N, *slot_shape)
    coeff_arrays: Dict[int, np.ndarray]  # coeff_id -> (N,)
    coeff_owners: Dict[int, List[int]]
    coeff_slots: Dict[int, int]
    extras: Dict[str, np.ndarray]  # parameter id -> array
    dtype: np.dtype


def _dtype_code(dtype: np.dtype) -> int:
    if dtype == np.float32:
        return 4
    if dtype == np.float64:
        return 8
    raise ValueError(f"unsupported checkpoint dtype {dtype}")


def _le(dtype: np.dtype) -> np.dtype:
    return np.dtype("<f4") if dtype == np.float32 else np.dtype("<f8")


def save_checkpoint(path, store, meta: dict) -> None:
    """Write the store's plan and every parameter to a checkpoint file."""
    plan = store.plan
    dtype = store.dtype
    le = _le(dtype)
    parts: List[bytes] = [MAGIC, struct.pack("<I", VERSION), struct.pack("<B", _dtype_code(dtype))]

    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    parts.append(struct.pack("<I", len(meta_bytes)))
    parts.append(meta_bytes)
    plan_bytes = plan.to_text().encode("utf-8")
    parts.append(struct.pack("<I", len(plan_bytes)))
    parts.append(plan_bytes)

    bank_ids = sorted(store.banks)
    parts.append(struct.pack("<I", len(bank_ids)))
    for bid in bank_ids:
        bank = store.banks[bid]
        shape = bank.slot_shape
        parts.append(struct.pack("<6I", bid, bank.n, *shape))
        parts.append(np.ascontiguousarray(bank.stacked(), dtype=le).tobytes())

    cids = sorted(store.coeff_sets)
    parts.append(struct.pack("<I", len(cids)))
    for cid in cids:
        cset = store.coeff_sets[cid]
        owners = sorted(cset.owner_layers)
        parts.append(struct.pack("<3I", cid, cset.slot_id, len(owners)))
        parts.append(struct.pack(f"<{len(owners)}I", *owners) if owners else b"")
        alpha = np.ascontiguousarray(cset.alpha.data, dtype=le)
        parts.append(struct.pack("<I", alpha.size))
        parts.append(alpha.tobytes())

    extras: List[Tuple[str, np.ndarray]] = []
    for lid in sorted(store.biases):
        extras.append((store.biases[lid].pid, store.biases[lid].data))
    for mid in sorted(store.heads):
        w, b = store.heads[mid]
        extras.append((w.pid, w.data))
        extras.append((b.pid, b.data))
    parts.append(struct.pack("<I", len(extras)))
    for name, arr in extras:
        nb = name.encode("utf-8")
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b"")
        parts.append(np.ascontiguousarray(arr, dtype=le).tobytes())

    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.off = 0

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.blob):
            raise ValueError(
                f"truncated checkpoint: wanted {n} bytes at offset {self.off}, "
                f"file has {len(self.blob)}"
            )
        out = self.blob[self.off : self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path) -> CheckpointData:
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob)
    if r.take(len(MAGIC)) != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    (width,) = r.unpack("<B")
    if width == 4:
        dtype, le = np.dtype(np.float32), np.dtype("<f4")
    elif width == 8:
        dtype, le = np.dtype(np.float64), np.dtype("<f8")
    else:
        raise ValueError(f"{path}: bad float width {width}")

    (meta_len,) = r.unpack("<I")
    meta = json.loads(r.take(meta_len).decode("utf-8"))
    (plan_len,) = r.unpack("<I")
    plan = SharingPlan.from_text(r.take(plan_len).decode("utf-8"))

    bank_arrays: Dict[int, np.ndarray] = {}
    (n_banks,) = r.unpack("<I")
    for _ in range(n_banks):
        bid, n, s0, s1, s2, s3 = r.unpack("<6I")
        count = n * s0 * s1 * s2 * s3
        data = np.frombuffer(r.take(count * width), dtype=le).astype(dtype, copy=True)
        bank_arrays[bid] = data.reshape(n, s0, s1, s2, s3)

    coeff_arrays: Dict[int, np.ndarray] = {}
    coeff_owners: Dict[int, List[int]] = {}
    coeff_slots: Dict[int, int] = {}
    (n_sets,) = r.unpack("<I")
    for _ in range(n_sets):
        cid, sid, n_owners = r.unpack("<3I")
        owners = list(r.unpack(f"<{n_owners}I")) if n_owners else []
        (alen,) = r.unpack("<I")
        alpha = np.frombuffer(r.take(alen * width), dtype=le).astype(dtype, copy=True)
        coeff_arrays[cid] = alpha
        coeff_owners[cid] = owners
        coeff_slots[cid] = sid

    extras: Dict[str, np.ndarray] = {}
    (n_extras,) = r.unpack("<I")
    for _ in range(n_extras):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (ndim,) = r.unpack("<B")
        dims = r.unpack(f"<{ndim}I") if ndim else ()
        count = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(r.take(count * width), dtype=le).astype(dtype, copy=True)
        extras[name] = arr.reshape(dims)

    if r.off != len(blob):
        raise ValueError(f"{path}: {len(blob) - r.off} trailing bytes at offset {r.off}")
    return CheckpointData(
        plan=plan,
        meta=meta,
        bank_arrays=bank_arrays,
        coeff_arrays=coeff_arrays,
        coeff_owners=coeff_owners,
        coeff_slots=coeff_slots,
        extras=extras,
        dtype=dtype,
    )
