"""Standalone LOPF writer.

The format is the file contract shared with the field trainer:

    magic "LOPF" | u32 version=1 | u32 count | u32 dv | u32 ds | f32 voxel_size
    per point, little-endian float32:
        3 x position, weight, dist, conf, dv x e_v, ds x e_s

This module is deliberately independent of the consumer package; the bytes
are the only coupling.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"LOPF"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIf")


def merge_voxels(positions, e_v, e_s, dists, confs, voxel_size: float):
    """Average observations per voxel; weight = observation count.

    Returns (positions, e_v, e_s, weights, dists, confs) sorted by voxel key.
    Embeddings are re-normalized after averaging; merged positions are nudged
    one float32 ulp inward when casting would move them across their voxel
    boundary.
    """
    voxel_size = float(np.float32(voxel_size))
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    n = len(positions)
    e_v = np.asarray(e_v, dtype=np.float64).reshape(n, -1)
    e_s = np.asarray(e_s, dtype=np.float64).reshape(n, -1)
    dists = np.asarray(dists, dtype=np.float64).reshape(n)
    confs = np.asarray(confs, dtype=np.float64).reshape(n)

    keys = np.floor(positions / voxel_size).astype(np.int64)
    order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
    keys = keys[order]
    uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)

    def pool(values):
        values = np.asarray(values)[order]
        out = np.zeros((len(uniq),) + values.shape[1:], dtype=np.float64)
        np.add.at(out, inverse, values)
        return out

    cnt = counts.astype(np.float64)
    pos = pool(positions) / cnt[:, None]

    pos32 = pos.astype(np.float32)
    down = np.full_like(pos32, -np.inf)
    up = np.full_like(pos32, np.inf)
    for _ in range(4):
        off = np.floor(pos32.astype(np.float64) / voxel_size).astype(np.int64) - uniq
        if not np.any(off):
            break
        pos32 = np.where(off > 0, np.nextafter(pos32, down), pos32)
        pos32 = np.where(off < 0, np.nextafter(pos32, up), pos32)

    def renorm(rows):
        norms = np.linalg.norm(rows, axis=1, keepdims=True)
        safe = np.where(norms > 1e-12, norms, 1.0)
        return np.where(norms > 1e-12, rows / safe, 0.0)

    return (
        pos32,
        renorm(pool(e_v) / cnt[:, None]),
        renorm(pool(e_s) / cnt[:, None]),
        cnt,
        pool(dists) / cnt,
        pool(confs) / cnt,
    )


def write_lopf(path, positions, e_v, e_s, weights, dists, confs, voxel_size: float) -> int:
    """Write one LOPF file; returns the point count."""
    positions = np.asarray(positions, dtype=np.float32).reshape(-1, 3)
    n = len(positions)
    e_v = np.asarray(e_v, dtype=np.float32).reshape(n, -1)
    e_s = np.asarray(e_s, dtype=np.float32).reshape(n, -1)
    body = np.concatenate(
        [
            positions,
            np.asarray(weights, dtype=np.float32).reshape(n, 1),
            np.asarray(dists, dtype=np.float32).reshape(n, 1),
            np.asarray(confs, dtype=np.float32).reshape(n, 1),
            e_v,
            e_s,
        ],
        axis=1,
    ).astype("<f4")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, n, e_v.shape[1], e_s.shape[1],
                             float(np.float32(voxel_size))))
        f.write(body.tobytes())
    return n


def read_header(path) -> dict:
    with open(path, "rb") as f:
        raw = f.read(_HEADER.size)
    magic, version, n, dv, ds, voxel_size = _HEADER.unpack(raw)
    return {
        "magic": magic,
        "version": version,
        "count": n,
        "dv": dv,
        "ds": ds,
        "voxel_size": voxel_size,
    }
