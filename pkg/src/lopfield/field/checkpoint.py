"""Binary checkpoint format for trained fields.

    magic "LOPC" | u32 version=1
    u32 levels, features_per_level, log2_table_size, base_res, finest_res
    f64 bounds_min[3], bounds_max[3]
    u32 hidden, dv, ds, nonlinearity (0 = softplus)
    f64 weight_v, weight_s, tau_min, tau_max
    f32 parameter blocks, in order: tables by level, trunk (w, b),
    head_v (w, b), head_s (w, b), log_tau

Round trips are bitwise exact on the stored float32 parameters.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from ..errors import CorruptCheckpoint
from ..hashgrid import HashGrid, HashGridConfig
from .core import LopField
from .heads import FieldHeads
from .loss import LossConfig

MAGIC = b"LOPC"
VERSION = 1
NONLINEARITY_SOFTPLUS = 0
_HEAD = struct.Struct("<4sI5I6d4I4d")


def save_checkpoint(field: LopField, path) -> None:
    cfg = field.grid.config
    lcfg = field.loss_config
    d, dv, ds = field.dims
    blobs = [t.astype("<f4").tobytes() for t in field.grid.tables]
    hp = field.heads.params()
    for name in ("w_trunk", "b_trunk", "w_v", "b_v", "w_s", "b_s"):
        blobs.append(hp[name].astype("<f4").tobytes())
    blobs.append(np.float32(field.log_tau).astype("<f4").tobytes())
    header = _HEAD.pack(
        MAGIC,
        VERSION,
        cfg.levels,
        cfg.features_per_level,
        cfg.log2_table_size,
        cfg.base_resolution,
        cfg.finest_resolution,
        *cfg.bounds_min,
        *cfg.bounds_max,
        field.heads.hidden,
        dv,
        ds,
        NONLINEARITY_SOFTPLUS,
        lcfg.weight_v,
        lcfg.weight_s,
        lcfg.tau_min,
        lcfg.tau_max,
    )
    with open(path, "wb") as f:
        f.write(header)
        for b in blobs:
            f.write(b)


def load_checkpoint(path) -> LopField:
    raw = Path(path).read_bytes()
    if len(raw) < _HEAD.size:
        raise CorruptCheckpoint(f"{path}: truncated header")
    fields = _HEAD.unpack_from(raw)
    magic, version = fields[0], fields[1]
    if magic != MAGIC:
        raise CorruptCheckpoint(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CorruptCheckpoint(f"{path}: unsupported version {version}")
    levels, fpl, log2_t, base_res, finest_res = fields[2:7]
    bounds = fields[7:13]
    hidden, dv, ds, nonlinearity = fields[13:17]
    weight_v, weight_s, tau_min, tau_max = fields[17:21]
    if nonlinearity != NONLINEARITY_SOFTPLUS:
        raise CorruptCheckpoint(f"{path}: unknown nonlinearity id {nonlinearity}")

    cfg = HashGridConfig(
        levels=levels,
        features_per_level=fpl,
        log2_table_size=log2_t,
        base_resolution=base_res,
        finest_resolution=finest_res,
        bounds_min=bounds[:3],
        bounds_max=bounds[3:],
    )
    d = cfg.output_dim
    counts = [cfg.table_size * fpl] * levels + [
        d * hidden, hidden, hidden * dv, dv, hidden * ds, ds, 1,
    ]
    expected = _HEAD.size + 4 * sum(counts)
    if len(raw) != expected:
        raise CorruptCheckpoint(f"{path}: expected {expected} bytes, found {len(raw)}")

    offset = _HEAD.size
    arrays = []
    for n in counts:
        arrays.append(np.frombuffer(raw, dtype="<f4", count=n, offset=offset).copy())
        offset += 4 * n
    tables = [a.reshape(cfg.table_size, fpl) for a in arrays[:levels]]
    w1, b1, wv, bv, ws, bs, log_tau = arrays[levels:]
    heads = FieldHeads(
        w_trunk=w1.reshape(d, hidden),
        b_trunk=b1,
        w_v=wv.reshape(hidden, dv),
        b_v=bv,
        w_s=ws.reshape(hidden, ds),
        b_s=bs,
    )
    lcfg = LossConfig(
        log_tau_init=float(np.clip(float(log_tau[0]), np.log(tau_min), np.log(tau_max))),
        tau_min=tau_min,
        tau_max=tau_max,
        weight_v=weight_v,
        weight_s=weight_s,
    )
    return LopField(
        grid=HashGrid(cfg, tables),
        heads=heads,
        log_tau=float(log_tau[0]),
        loss_config=lcfg,
    )


def checkpoint_hash(path) -> str:
    """SHA-256 of the checkpoint bytes, recorded as graph provenance."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
